#include "critedge/spectrum.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "critedge/errors.hpp"

namespace critedge {

DeformationSpectrum::DeformationSpectrum(std::vector<cd> ev, std::vector<std::int64_t> mult)
    : eigenvalues(std::move(ev)), multiplicities(std::move(mult)) {
    n = std::accumulate(multiplicities.begin(), multiplicities.end(), std::int64_t{0});
}

DeformationSpectrum DeformationSpectrum::from_values(std::vector<cd> ev) {
    std::vector<std::int64_t> m(ev.size(), 1);
    return DeformationSpectrum(std::move(ev), std::move(m));
}

void DeformationSpectrum::validate() const {
    if (eigenvalues.size() != multiplicities.size())
        throw DimensionMismatch("eigenvalues and multiplicities differ in length");
    std::int64_t s = 0;
    for (auto m : multiplicities) {
        if (m <= 0) throw DimensionMismatch("non-positive multiplicity");
        s += m;
    }
    if (s != n || n <= 0)
        throw DimensionMismatch("multiplicities sum to " + std::to_string(s) + ", n = " +
                                std::to_string(n));
    for (auto& z : eigenvalues)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw DimensionMismatch("non-finite eigenvalue");
}

void DeformationSpectrum::require_nonzero(double floor) const {
    for (std::size_t i = 0; i < eigenvalues.size(); ++i)
        if (std::abs(eigenvalues[i]) < floor)
            throw ZeroEigenvalue("eigenvalue " + std::to_string(i) + " vanishes");
}

std::vector<cd> DeformationSpectrum::expanded() const {
    std::vector<cd> out;
    out.reserve(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < eigenvalues.size(); ++i)
        out.insert(out.end(), static_cast<std::size_t>(multiplicities[i]), eigenvalues[i]);
    return out;
}

DeformationSpectrum DeformationSpectrum::collapsed() const {
    std::vector<cd> ev;
    std::vector<std::int64_t> m;
    std::map<std::pair<double, double>, std::size_t> seen;
    for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
        auto key = std::make_pair(eigenvalues[i].real(), eigenvalues[i].imag());
        auto it = seen.find(key);
        if (it == seen.end()) {
            seen.emplace(key, ev.size());
            ev.push_back(eigenvalues[i]);
            m.push_back(multiplicities[i]);
        } else {
            m[it->second] += multiplicities[i];
        }
    }
    DeformationSpectrum out(std::move(ev), std::move(m));
    out.basis_id = basis_id;
    return out;
}

double DeformationSpectrum::min_modulus() const {
    double r = INFINITY;
    for (auto& z : eigenvalues) r = std::min(r, std::abs(z));
    return r;
}

double DeformationSpectrum::max_modulus() const {
    double r = 0.0;
    for (auto& z : eigenvalues) r = std::max(r, std::abs(z));
    return r;
}

void to_json(nlohmann::json& j, const DeformationSpectrum& s) {
    nlohmann::json ev = nlohmann::json::array();
    for (auto& z : s.eigenvalues) ev.push_back({z.real(), z.imag()});
    j = nlohmann::json{{"n", s.n}, {"eigenvalues", ev}, {"multiplicities", s.multiplicities}};
    if (s.basis_id) j["basis_id"] = *s.basis_id;
}

void from_json(const nlohmann::json& j, DeformationSpectrum& s) {
    s = DeformationSpectrum{};
    j.at("n").get_to(s.n);
    for (auto& e : j.at("eigenvalues")) {
        if (!e.is_array() || e.size() != 2) throw DimensionMismatch("eigenvalue must be [re, im]");
        s.eigenvalues.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
    if (j.contains("multiplicities"))
        j.at("multiplicities").get_to(s.multiplicities);
    else
        s.multiplicities.assign(s.eigenvalues.size(), 1);
    if (j.contains("basis_id")) s.basis_id = j.at("basis_id").get<std::string>();
    s.validate();
}

DeformationSpectrum read_spectrum(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return nlohmann::json::parse(in).get<DeformationSpectrum>();
}

void write_spectrum(const std::string& path, const DeformationSpectrum& s) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << nlohmann::json(s).dump() << "\n";
}

}  // namespace critedge
