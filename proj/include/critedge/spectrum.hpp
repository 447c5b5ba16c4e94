#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace critedge {

using cd = std::complex<double>;

/// Normal deformation given by its eigenvalues and multiplicities.
struct DeformationSpectrum {
    std::vector<cd> eigenvalues;
    std::vector<std::int64_t> multiplicities;
    std::int64_t n = 0;
    std::optional<std::string> basis_id;

    DeformationSpectrum() = default;
    DeformationSpectrum(std::vector<cd> ev, std::vector<std::int64_t> mult);

    /// All multiplicities equal to one.
    static DeformationSpectrum from_values(std::vector<cd> ev);

    std::size_t size() const { return eigenvalues.size(); }

    /// Throws DimensionMismatch unless the multiplicities are positive and sum to n.
    void validate() const;

    /// Throws ZeroEigenvalue if any |lambda| is below the floor.
    void require_nonzero(double floor = 1e-300) const;

    /// Eigenvalues repeated by multiplicity, in entry order.
    std::vector<cd> expanded() const;

    /// Merge bitwise-equal eigenvalues, keeping first-occurrence order.
    DeformationSpectrum collapsed() const;

    /// Weighted trace sum_i (m_i / N) f(lambda_i).
    template <class F>
    auto trace(F&& f) const {
        using R = decltype(f(cd{}));
        R acc{};
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < eigenvalues.size(); ++i)
            acc += (static_cast<double>(multiplicities[i]) * inv_n) * f(eigenvalues[i]);
        return acc;
    }

    double min_modulus() const;
    double max_modulus() const;
};

void to_json(nlohmann::json& j, const DeformationSpectrum& s);
void from_json(const nlohmann::json& j, DeformationSpectrum& s);

DeformationSpectrum read_spectrum(const std::string& path);
void write_spectrum(const std::string& path, const DeformationSpectrum& s);

}  // namespace critedge
