// critedge: analyze / flow / simulate / compare front end.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "critedge/criticality.hpp"
#include "critedge/dyson.hpp"
#include "critedge/errors.hpp"
#include "critedge/flow.hpp"
#include "critedge/sampling.hpp"
#include "critedge/spectra.hpp"

using namespace critedge;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitError = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// defaults; also the set of accepted config keys
json defaults() {
    return json{{"n", 512},
                {"seed", 1},
                {"trials", 200},
                {"delta", 0.05},
                {"frak_c", 4.0},
                {"tol", 1e-8},
                {"jobs", 0},
                {"out", ""},
                {"input", ""},
                {"family", ""},
                {"model", "ginibre"},
                {"mode", "stat"},
                {"k", 1},
                {"test_function", "radial"},
                {"radius", 2.0},
                {"q", 128},
                {"points", 257},
                {"h0", 0.0},
                {"drift_exponent", 0.1},
                {"threshold", 2.0},
                {"eta", 0.0},
                {"path", ""},
                {"endpoint", "end"},
                {"chi_max", 0.7}};
}

struct RunConfig {
    std::int64_t n = 0;
    std::uint64_t seed = 0;
    int trials = 0;
    double delta = 0, frak_c = 0, tol = 0;
    int jobs = 0;
    std::string out, input, family, model, mode, test_function, path, endpoint;
    int k = 1, q = 0, points = 0;
    double radius = 0, h0 = 0, drift_exponent = 0, threshold = 0, eta = 0, chi_max = 0;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw UsageError("invalid configuration: " + what);
}

RunConfig to_config(const json& j) {
    RunConfig c;
    try {
        c.n = j.at("n").get<std::int64_t>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.trials = j.at("trials").get<int>();
        c.delta = j.at("delta").get<double>();
        c.frak_c = j.at("frak_c").get<double>();
        c.tol = j.at("tol").get<double>();
        c.jobs = j.at("jobs").get<int>();
        c.out = j.at("out").get<std::string>();
        c.input = j.at("input").get<std::string>();
        c.family = j.at("family").get<std::string>();
        c.model = j.at("model").get<std::string>();
        c.mode = j.at("mode").get<std::string>();
        c.k = j.at("k").get<int>();
        c.test_function = j.at("test_function").get<std::string>();
        c.radius = j.at("radius").get<double>();
        c.q = j.at("q").get<int>();
        c.points = j.at("points").get<int>();
        c.h0 = j.at("h0").get<double>();
        c.drift_exponent = j.at("drift_exponent").get<double>();
        c.threshold = j.at("threshold").get<double>();
        c.eta = j.at("eta").get<double>();
        c.path = j.at("path").get<std::string>();
        c.endpoint = j.at("endpoint").get<std::string>();
        c.chi_max = j.at("chi_max").get<double>();
    } catch (const json::exception& e) {
        throw UsageError(std::string("invalid configuration value: ") + e.what());
    }
    require(c.n >= 2, "n >= 2");
    require(c.trials >= 2, "trials >= 2");
    require(c.delta > 0 && c.delta < 0.25, "0 < delta < 0.25");
    require(c.frak_c > 1, "frak_c > 1");
    require(c.tol > 0, "tol > 0");
    require(c.jobs >= 0, "jobs >= 0");
    require(c.k >= 1 && c.k <= 4, "1 <= k <= 4");
    require(c.radius > 0, "radius > 0");
    require(c.q >= 8, "q >= 8");
    require(c.points >= 3, "points >= 3");
    require(c.h0 >= 0, "h0 >= 0");
    require(c.drift_exponent > 0, "drift_exponent > 0");
    require(c.threshold > 0, "threshold > 0");
    require(c.eta >= 0, "eta >= 0");
    require(c.chi_max > 0 && c.chi_max <= 1, "0 < chi_max <= 1");
    require(c.endpoint == "start" || c.endpoint == "end", "endpoint is start or end");
    require(c.mode == "stat" || c.mode == "radius" || c.mode == "girko" || c.mode == "eigs" || c.mode == "tail" ||
                c.mode == "ks",
            "mode is one of stat, radius, girko, eigs, tail, ks");
    parse_model(c.model);
    return c;
}

// flags > config file > defaults; unknown config keys are rejected
json resolve(const std::string& config_path, const json& flags) {
    json r = defaults();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw UsageError("cannot open config " + config_path);
        json file;
        try {
            file = json::parse(in);
        } catch (const json::parse_error& e) {
            throw UsageError(std::string("config parse error: ") + e.what());
        }
        if (!file.is_object()) throw UsageError("config must be a JSON object");
        for (auto& [key, value] : file.items()) {
            if (!r.contains(key)) throw UsageError("unknown config key '" + key + "'");
            r[key] = value;
        }
    }
    for (auto& [key, value] : flags.items()) r[key] = value;
    return r;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::string summary_path(const std::string& csv) {
    std::filesystem::path p(csv);
    p.replace_extension(".json");
    return p.string();
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// spectrum from --input, --path (flow endpoint) or a named family
DeformationSpectrum load_spectrum(const RunConfig& c) {
    if (!c.input.empty()) return read_spectrum(c.input);
    if (!c.path.empty()) {
        const FlowPath p = read_flow_jsonl(c.path);
        if (p.size() == 0) throw std::runtime_error("empty path file " + c.path);
        return c.endpoint == "start" ? p.states.front() : p.states.back();
    }
    const std::string& f = c.family;
    if (f == "pm1") return DeformationSpectrum({cd(1, 0), cd(-1, 0)}, {c.n / 2, c.n - c.n / 2});
    if (f == "zero") return DeformationSpectrum({cd(0, 0)}, {c.n});
    if (f == "random") {
        CriticalSampleOptions o;
        o.frak_c = c.frak_c;
        o.chi_max = c.chi_max;
        return random_critical_spectrum(c.n, c.seed, o);
    }
    if (f.rfind("ac:", 0) == 0) return ac_family(c.n, std::stod(f.substr(3)));
    throw UsageError("no spectrum: give an input file, --path or --family (pm1, zero, random, ac:<c>)");
}

int cmd_analyze(const RunConfig& c) {
    const DeformationSpectrum a = load_spectrum(c);
    const CriticalityReport rep = verify_criticality(a, c.frak_c, c.tol);
    emit(c.out, json(rep).dump(2) + "\n");
    return rep.is_critical ? kExitOk : kExitFail;
}

int cmd_flow(const RunConfig& c) {
    FlowConfig fc;
    fc.frak_c = c.frak_c;
    fc.tol = c.tol;
    fc.points = c.points;
    fc.h0 = c.h0;
    const double frak_c1 = fc.frak_c1 > 0 ? fc.frak_c1 : 2 * fc.frak_c;
    json summary;
    FlowPath path_a;
    if (!c.path.empty() && c.input.empty() && c.family.empty()) {
        path_a = read_flow_jsonl(c.path);
        summary["source"] = c.path;
    } else {
        const DeformationSpectrum a = load_spectrum(c);
        PipelineResult r = run_pipeline(a, fc);
        path_a = std::move(r.path_a);
        summary["hermitian"] = r.hermitian;
        if (r.finite) {
            summary["finite_support"] = {{"support", r.finite->support},
                                         {"support_bound", r.finite->m_bound},
                                         {"h", r.finite->h},
                                         {"kappa", r.finite->kappa},
                                         {"pairs", r.finite->pairs}};
        }
        if (r.target) summary["target"] = {{"q", r.target->q}, {"chi", r.target->chi}};
        if (!c.out.empty()) {
            write_flow_jsonl(c.out, path_a);
            summary["path_file"] = c.out;
        }
    }
    const std::int64_t n = path_a.states.empty() ? c.n : path_a.states.front().n;
    const AssumptionReport rep = validate_assumption(path_a, frak_c1, c.drift_exponent, n, c.tol);
    const bool ok = rep.crit_ok && rep.drift_ok && rep.deriv_ok;
    summary["points"] = path_a.size();
    summary["validation"] = rep;
    summary["valid"] = ok;
    if (!rep.flagged_crit.empty()) {
        const std::size_t i = rep.flagged_crit.front();
        summary["first_failure"] = {{"index", i}, {"t", path_a.grid[i]}};
    }
    std::cout << summary.dump(2) << "\n";
    return ok ? kExitOk : kExitFail;
}

KPointFunction test_function(const RunConfig& c) { return {c.k, test_function_by_id(c.test_function, c.radius)}; }

int cmd_simulate(const RunConfig& c) {
    const DeformationSpectrum a = load_spectrum(c);
    const Model model = parse_model(c.model);
    std::ostringstream csv;
    json s{{"mode", c.mode}, {"n", a.n}, {"model", model_name(model)}, {"seed", c.seed}, {"trials", c.trials}};
    if (c.mode == "stat") {
        const auto est = estimate_statistic(a, model, test_function(c), c.trials, c.seed);
        csv << "trial,seed,value\n";
        for (int j = 0; j < c.trials; ++j)
            csv << j << ',' << c.seed + static_cast<std::uint64_t>(j) << ',' << fmt(est.per_trial[j]) << '\n';
        s["k"] = est.k;
        s["test_function"] = est.test_function_id;
        s["radius"] = c.radius;
        s["value"] = est.value;
        s["std_error"] = est.std_error;
        s["scale"] = est.scale;
        s["gamma"] = {est.gamma.real(), est.gamma.imag()};
    } else if (c.mode == "radius") {
        csv << "trial,seed,spectral_radius\n";
        std::vector<double> r(static_cast<std::size_t>(c.trials));
        const Eigen::MatrixXcd d = diagonal_matrix(a);
#pragma omp parallel for schedule(dynamic)
        for (int j = 0; j < c.trials; ++j) {
            double m = 0;
            for (cd l : eigenvalues_of(d + sample_matrix(model, a.n, c.seed + j))) m = std::max(m, std::abs(l));
            r[static_cast<std::size_t>(j)] = m;
        }
        double mean = 0;
        for (int j = 0; j < c.trials; ++j) {
            csv << j << ',' << c.seed + static_cast<std::uint64_t>(j) << ',' << fmt(r[j]) << '\n';
            mean += r[j];
        }
        s["mean_spectral_radius"] = mean / c.trials;
    } else if (c.mode == "girko") {
        csv << "trial,seed,lhs,rhs,gap\n";
        const Eigen::MatrixXcd d = diagonal_matrix(a);
        const TestFunction f = test_function_by_id(c.test_function, c.radius);
        double worst = 0;
        for (int j = 0; j < c.trials; ++j) {
            const auto g = girko_check(d + sample_matrix(model, a.n, c.seed + j), f, c.q);
            csv << j << ',' << c.seed + static_cast<std::uint64_t>(j) << ',' << fmt(g.lhs) << ',' << fmt(g.rhs) << ','
                << fmt(g.gap) << '\n';
            worst = std::max(worst, g.gap);
        }
        s["q"] = c.q;
        s["max_gap"] = worst;
    } else if (c.mode == "eigs") {
        csv << "trial,re,im,w_re,w_im\n";
        const cd gamma = scaling_gamma(a).gamma;
        for (int j = 0; j < c.trials; ++j) {
            const auto ev = deformed_eigenvalues(a, sample_matrix(model, a.n, c.seed + j));
            const auto w = rescale(ev, a.n, gamma);
            for (std::size_t i = 0; i < ev.size(); ++i)
                csv << j << ',' << fmt(ev[i].real()) << ',' << fmt(ev[i].imag()) << ',' << fmt(w[i].real()) << ','
                    << fmt(w[i].imag()) << '\n';
        }
        s["gamma"] = {gamma.real(), gamma.imag()};
    } else if (c.mode == "tail") {
        const double eta = c.eta > 0 ? c.eta : std::pow(static_cast<double>(a.n), -0.75 - c.delta);
        const auto pool = smallest_sv_pool(a, 0, SvPool::direct, c.trials, c.seed, model);
        csv << "trial,seed,smallest_sv\n";
        int below = 0;
        for (int j = 0; j < c.trials; ++j) {
            csv << j << ',' << c.seed + static_cast<std::uint64_t>(j) << ',' << fmt(pool[j]) << '\n';
            below += pool[j] < eta;
        }
        const double p = static_cast<double>(below) / c.trials;
        s["eta"] = eta;
        s["probability"] = p;
        s["std_error"] = std::sqrt(p * (1 - p) / c.trials);
    } else {  // ks
        const std::uint64_t mod_seed = c.seed + (1ull << 32);
        const auto d = smallest_sv_pool(a, 0, SvPool::direct, c.trials, c.seed, model);
        const auto m = smallest_sv_pool(a, 0, SvPool::modulus, c.trials, mod_seed, model);
        csv << "trial,direct,modulus\n";
        for (int j = 0; j < c.trials; ++j) csv << j << ',' << fmt(d[j]) << ',' << fmt(m[j]) << '\n';
        const auto ks = ks_two_sample(d, m);
        s["ks_statistic"] = ks.statistic;
        s["p_value"] = ks.p_value;
    }
    if (c.out.empty()) {
        std::cout << s.dump(2) << "\n";
    } else {
        emit(c.out, csv.str());
        emit(summary_path(c.out), s.dump(2) + "\n");
    }
    return kExitOk;
}

CorrelationEstimate read_estimate(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    const json j = json::parse(in);
    if (j.value("mode", "") != "stat") throw UsageError(path + " is not a statistic summary");
    CorrelationEstimate e;
    e.value = j.at("value").get<double>();
    e.std_error = j.at("std_error").get<double>();
    e.trials = j.at("trials").get<int>();
    e.k = j.at("k").get<int>();
    e.test_function_id = j.at("test_function").get<std::string>();
    e.n = j.at("n").get<std::int64_t>();
    return e;
}

int cmd_compare(const RunConfig& c, const std::string& a_path, const std::string& b_path) {
    const auto a = read_estimate(a_path), b = read_estimate(b_path);
    if (a.k != b.k || a.test_function_id != b.test_function_id)
        throw UsageError("statistics use different test functions");
    const Comparison cmp = compare_estimates(a, b);
    const bool agree = cmp.z_score <= c.threshold;
    json v{{"a", a_path},
           {"b", b_path},
           {"value_a", a.value},
           {"value_b", b.value},
           {"difference", cmp.difference},
           {"combined_error", cmp.combined_error},
           {"z_score", cmp.z_score},
           {"threshold", c.threshold},
           {"identical", a.value == b.value && a.std_error == b.std_error},
           {"agree", agree}};
    emit(c.out, v.dump(2) + "\n");
    return agree ? kExitOk : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"critedge: critical-edge deformations, flows and Monte Carlo checks"};
    app.require_subcommand(1);
    std::string config_path;
    json flags;
    std::string cmp_a, cmp_b;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        auto num = [&](const char* flag, const char* key, const char* help) {
            sub->add_option_function<double>(
                flag, [&flags, key](double v) { flags[key] = v; }, help);
        };
        auto integer = [&](const char* flag, const char* key, const char* help) {
            sub->add_option_function<std::int64_t>(
                flag, [&flags, key](std::int64_t v) { flags[key] = v; }, help);
        };
        auto text = [&](const char* flag, const char* key, const char* help) {
            sub->add_option_function<std::string>(
                flag, [&flags, key](const std::string& v) { flags[key] = v; }, help);
        };
        integer("--n", "n", "matrix dimension");
        sub->add_option_function<std::uint64_t>(
            "--seed", [&flags](std::uint64_t v) { flags["seed"] = v; }, "base seed");
        integer("--trials", "trials", "Monte Carlo trials");
        num("--delta", "delta", "eta exponent offset");
        num("--frak-c", "frak_c", "norm bound constant");
        num("--tol", "tol", "tolerance");
        integer("--jobs", "jobs", "worker threads (0: runtime default)");
        text("--out", "out", "output file");
        text("--family", "family", "built-in spectrum: pm1, zero, random, ac:<c>");
        text("--model", "model", "ginibre or iid");
        text("--path", "path", "flow path JSONL");
        text("--endpoint", "endpoint", "start or end of --path");
        text("--mode", "mode", "simulate mode: stat, radius, girko, eigs, tail, ks");
        integer("--k", "k", "correlation order");
        text("--test-function", "test_function", "radial, anisotropic, gaussian, plateau");
        num("--radius", "radius", "test function radius");
        integer("--q", "q", "Girko quadrature points per axis");
        integer("--points", "points", "flow grid points");
        num("--h0", "h0", "initial cluster radius");
        num("--drift-exponent", "drift_exponent", "alpha drift bound exponent");
        num("--threshold", "threshold", "agreement threshold in combined standard errors");
        num("--eta", "eta", "tail threshold (0: N^{-3/4-delta})");
        num("--chi-max", "chi_max", "largest chi for --family random");
    };

    auto* analyze = app.add_subcommand("analyze", "criticality report of a spectrum");
    add_common(analyze);
    analyze->add_option_function<std::string>(
        "input", [&](const std::string& v) { flags["input"] = v; }, "spectrum JSON");
    auto* flow = app.add_subcommand("flow", "flow pipeline and assumption audit");
    add_common(flow);
    flow->add_option_function<std::string>(
        "input", [&](const std::string& v) { flags["input"] = v; }, "spectrum JSON");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo statistics");
    add_common(simulate);
    simulate->add_option_function<std::string>(
        "input", [&](const std::string& v) { flags["input"] = v; }, "spectrum JSON");
    auto* compare = app.add_subcommand("compare", "two-sample comparison of statistic summaries");
    add_common(compare);
    compare->add_option("a", cmp_a, "summary JSON")->required();
    compare->add_option("b", cmp_b, "summary JSON")->required();
    auto* config = app.add_subcommand("config", "print the resolved configuration");
    add_common(config);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        const json resolved = resolve(config_path, flags);
        const RunConfig c = to_config(resolved);
#ifdef _OPENMP
        if (c.jobs > 0) omp_set_num_threads(c.jobs);
#endif
        if (config->parsed()) {
            std::cout << resolved.dump(2) << "\n";
            return kExitOk;
        }
        if (analyze->parsed()) return cmd_analyze(c);
        if (flow->parsed()) return cmd_flow(c);
        if (simulate->parsed()) return cmd_simulate(c);
        return cmd_compare(c, cmp_a, cmp_b);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const ZeroEigenvalue& e) {
        std::cerr << e.what() << "\n";
        return kExitError;
    } catch (const json::exception& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitError;
    } catch (const DimensionMismatch& e) {
        std::cerr << e.what() << "\n";
        return kExitError;
    } catch (const UnknownModel& e) {
        std::cerr << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFail;
    }
}
