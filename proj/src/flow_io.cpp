#include <fstream>

#include "critedge/errors.hpp"
#include "critedge/flow.hpp"

namespace critedge {

// One JSON object per grid point. Segment membership is stored per line; junction markers are
// rebuilt from consecutive segments whose boundary times coincide.
void write_flow_jsonl(const std::string& path, const FlowPath& p) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    std::vector<int> seg_of(p.size(), -1);
    std::vector<SegmentKind> kinds;
    int sid = 0;
    for (auto& s : p.segments) {
        if (s.kind == SegmentKind::junction) continue;
        for (std::size_t i = s.begin; i <= s.end; ++i) seg_of[i] = sid;
        kinds.push_back(s.kind);
        ++sid;
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
        nlohmann::json j;
        j["t"] = p.grid[i];
        nlohmann::json ev = nlohmann::json::array();
        for (auto& z : p.states[i].eigenvalues) ev.push_back({z.real(), z.imag()});
        j["eigenvalues"] = ev;
        j["multiplicities"] = p.states[i].multiplicities;
        j["n"] = p.states[i].n;
        j["residual_crit"] = p.residual_crit.empty() ? 0.0 : p.residual_crit[i];
        j["residual_chi"] = p.residual_chi.empty() ? 0.0 : p.residual_chi[i];
        j["deriv_max"] = p.derivatives.empty() ? 0.0 : p.derivatives[i];
        const int s = seg_of[i];
        j["segment"] = s < 0 ? "constant" : segment_name(kinds[static_cast<std::size_t>(s)]);
        j["segment_index"] = s;
        j["side"] = p.a_side ? "A" : "B";
        out << j.dump() << '\n';
    }
}

FlowPath read_flow_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    FlowPath p;
    std::string line;
    int last = -2;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        DeformationSpectrum s;
        for (auto& e : j.at("eigenvalues")) s.eigenvalues.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
        s.multiplicities = j.at("multiplicities").get<std::vector<std::int64_t>>();
        s.n = j.at("n").get<std::int64_t>();
        const std::size_t i = p.size();
        p.grid.push_back(j.at("t").get<double>());
        p.states.push_back(std::move(s));
        p.residual_crit.push_back(j.at("residual_crit").get<double>());
        p.residual_chi.push_back(j.at("residual_chi").get<double>());
        p.derivatives.push_back(j.at("deriv_max").get<double>());
        p.a_side = j.value("side", "B") == "A";
        const int sid = j.value("segment_index", 0);
        if (sid != last) {
            if (i > 0 && p.grid[i] == p.grid[i - 1]) p.segments.push_back({i - 1, i, SegmentKind::junction});
            p.segments.push_back({i, i, parse_segment(j.value("segment", "constant"))});
            last = sid;
        } else {
            p.segments.back().end = i;
        }
    }
    return p;
}

void to_json(nlohmann::json& j, const AssumptionReport& r) {
    j = nlohmann::json{{"criticality_ok", r.crit_ok},
                       {"drift_ok", r.drift_ok},
                       {"derivative_ok", r.deriv_ok},
                       {"worst_criticality", r.worst_crit},
                       {"worst_criticality_index", r.worst_crit_index},
                       {"worst_drift", r.worst_drift},
                       {"worst_drift_index", r.worst_drift_index},
                       {"worst_derivative", r.worst_deriv},
                       {"worst_derivative_index", r.worst_deriv_index},
                       {"flagged_criticality", r.flagged_crit},
                       {"drift_bound", r.drift_bound},
                       {"derivative_bound", r.deriv_bound}};
}

}  // namespace critedge
