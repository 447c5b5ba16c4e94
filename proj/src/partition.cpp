#include "critedge/partition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>

#include "critedge/errors.hpp"

namespace critedge {

namespace {

using i64 = std::int64_t;

i64 total(const Partition& s) {
    i64 n = 0;
    for (auto& b : s) n += static_cast<i64>(b.size());
    return n;
}

// stable order by (size, lowest index), elements ascending inside each block
Partition size_sorted(const Partition& s) {
    Partition out = s;
    for (auto& b : out) std::sort(b.begin(), b.end());
    std::stable_sort(out.begin(), out.end(), [](const IndexSet& a, const IndexSet& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        const i64 la = a.empty() ? 0 : a.front(), lb = b.empty() ? 0 : b.front();
        return la < lb;
    });
    return out;
}

IndexSet flatten(const Partition& s) {
    IndexSet out;
    for (auto& b : s) out.insert(out.end(), b.begin(), b.end());
    return out;
}

std::vector<i64> boundaries(const Partition& s) {
    std::vector<i64> x;
    i64 acc = 0;
    for (auto& b : s) x.push_back(acc += static_cast<i64>(b.size()));
    return x;
}

// iota^-1 of (a, b]
IndexSet slice(const IndexSet& flat, i64 a, i64 b) { return IndexSet(flat.begin() + a, flat.begin() + b); }

struct Raw {
    Partition r1, r2;
};

Raw model_case(const Partition& s1, const Partition& s2) {
    const IndexSet f1 = flatten(s1), f2 = flatten(s2);
    std::set<i64> y;
    for (i64 v : boundaries(s1)) y.insert(v);
    for (i64 v : boundaries(s2)) y.insert(v);
    Raw r;
    i64 prev = 0;
    for (i64 v : y) {
        r.r1.push_back(slice(f1, prev, v));
        r.r2.push_back(slice(f2, prev, v));
        prev = v;
    }
    return r;
}

// general construction with N1 >= N2 and cutoff tau for the small blocks of S1
std::optional<Raw> general_case(const Partition& s1, const Partition& s2, double tau) {
    const std::size_t m1 = s1.size(), m2 = s2.size();
    std::size_t k = 0;
    while (k < m1 && static_cast<double>(s1[k].size()) <= tau) ++k;
    if (k + 1 > m1) return std::nullopt;
    i64 small = 0;
    for (std::size_t i = 0; i < k; ++i) small += static_cast<i64>(s1[i].size());
    const IndexSet& big = s2.back();
    if (static_cast<i64>(big.size()) - small <= 0) return std::nullopt;

    Raw r;
    // the largest block of S2 absorbs the small blocks of S1, pieces cut from its tail
    i64 end = static_cast<i64>(big.size());
    for (std::size_t i = 0; i < k; ++i) {
        const i64 len = static_cast<i64>(s1[i].size());
        r.r1.push_back(s1[i]);
        r.r2.push_back(slice(big, end - len, end));
        end -= len;
    }
    Partition h1(s1.begin() + static_cast<std::ptrdiff_t>(k), s1.end());
    Partition h2(s2.begin(), s2.end() - 1);
    h2.push_back(slice(big, 0, end));
    (void)m2;

    const IndexSet f1 = flatten(h1), f2 = flatten(h2);
    const i64 n1 = static_cast<i64>(f1.size()), n2 = static_cast<i64>(f2.size());
    const std::vector<i64> xs = boundaries(h1), ys = boundaries(h2);
    auto g = [&](i64 x) { return (x * n2 + n1 - 1) / n1; };
    auto g_right = [&](i64 y) -> i64 {
        if (y == 0) return 0;
        for (i64 x : xs)
            if ((y - 1) * n1 < x * n2 && x * n2 <= y * n1) return x;
        return (y * n1) / n2;
    };
    std::set<i64> yset(ys.begin(), ys.end());
    for (i64 x : xs) yset.insert(g(x));
    i64 prev = 0;
    for (i64 y : yset) {
        const i64 a = g_right(prev), b = g_right(y);
        if (b < a || b > n1) return std::nullopt;
        r.r1.push_back(slice(f1, a, b));
        r.r2.push_back(slice(f2, prev, y));
        prev = y;
    }
    return r;
}

PartitionMatching finish(Raw raw, bool swapped) {
    PartitionMatching m;
    m.swapped = swapped;
    if (swapped) std::swap(raw.r1, raw.r2);
    m.refined_s1 = std::move(raw.r1);
    m.refined_s2 = std::move(raw.r2);
    m.ratio_min = INFINITY;
    m.ratio_max = 0;
    for (std::size_t j = 0; j < m.refined_s1.size(); ++j) {
        const double q = m.refined_s1[j].empty()
                             ? INFINITY
                             : static_cast<double>(m.refined_s2[j].size()) / static_cast<double>(m.refined_s1[j].size());
        m.ratio_min = std::min(m.ratio_min, q);
        m.ratio_max = std::max(m.ratio_max, q);
    }
    return m;
}

}  // namespace

std::string check_matching(const Partition& s1, const Partition& s2, const PartitionMatching& m, double c) {
    if (m.refined_s1.size() != m.refined_s2.size()) return "refinements differ in length";
    if (m.refined_s1.size() > s1.size() + s2.size()) return "more than m1 + m2 blocks";
    auto refines = [](const Partition& coarse, const Partition& fine) -> std::string {
        std::map<i64, std::size_t> owner;
        for (std::size_t b = 0; b < coarse.size(); ++b)
            for (i64 i : coarse[b])
                if (!owner.emplace(i, b).second) return "input blocks overlap";
        std::set<i64> seen;
        for (auto& blk : fine) {
            if (blk.empty()) return "empty refined block";
            auto it = owner.find(blk.front());
            if (it == owner.end()) return "refined block leaves the index set";
            for (i64 i : blk) {
                auto jt = owner.find(i);
                if (jt == owner.end() || jt->second != it->second) return "refined block straddles input blocks";
                if (!seen.insert(i).second) return "refined blocks overlap";
            }
        }
        if (seen.size() != owner.size()) return "refinement does not cover the index set";
        return {};
    };
    if (auto e = refines(s1, m.refined_s1); !e.empty()) return "S1: " + e;
    if (auto e = refines(s2, m.refined_s2); !e.empty()) return "S2: " + e;
    for (std::size_t j = 0; j < m.refined_s1.size(); ++j) {
        const double q = static_cast<double>(m.refined_s2[j].size()) / static_cast<double>(m.refined_s1[j].size());
        if (q < c / 4 * (1 - 1e-12) || q > 4 / c * (1 + 1e-12)) return "ratio out of [c/4, 4/c]";
    }
    return {};
}

PartitionMatching match_partitions(const Partition& s1, const Partition& s2, double c, MatchMode mode) {
    if (!(c > 0 && c <= 1)) throw SizePreconditionFailed("c must lie in (0, 1]");
    if (s1.empty() || s2.empty()) throw SizePreconditionFailed("empty partition");
    for (auto* s : {&s1, &s2})
        for (auto& b : *s)
            if (b.empty()) throw SizePreconditionFailed("empty input block");
    const i64 n1 = total(s1), n2 = total(s2);
    const double m1 = static_cast<double>(s1.size()), m2 = static_cast<double>(s2.size());

    const bool swapped = n1 < n2;
    const Partition a = size_sorted(swapped ? s2 : s1);
    const Partition b = size_sorted(swapped ? s1 : s2);

    if (n1 == n2) {
        auto m = finish(model_case(a, b), swapped);
        m.model_case = true;
        return m;
    }

    const double ratio = static_cast<double>(n1) / static_cast<double>(n2);
    if (mode == MatchMode::strict) {
        if (ratio < c || ratio > 1 / c)
            throw SizePreconditionFailed("N1/N2 = " + std::to_string(ratio) + " outside [c, 1/c]");
        const double need = 8 * m1 * m2 / c;
        if (static_cast<double>(std::min(n1, n2)) < need)
            throw SizePreconditionFailed("min(N1, N2) = " + std::to_string(std::min(n1, n2)) + " < 8 m1 m2 / c = " +
                                         std::to_string(need));
        auto raw = general_case(a, b, 4 / c);
        if (!raw) throw SizePreconditionFailed("construction failed despite the size condition");
        auto m = finish(std::move(*raw), swapped);
        m.cutoff = static_cast<int>(std::floor(4 / c));
        if (auto e = check_matching(s1, s2, m, c); !e.empty()) throw SizePreconditionFailed(e);
        return m;
    }

    const int top = static_cast<int>(std::floor(4 / c));
    for (int tau = 0; tau <= top; ++tau) {
        auto raw = general_case(a, b, tau);
        if (!raw) continue;
        auto m = finish(std::move(*raw), swapped);
        m.cutoff = tau;
        if (check_matching(s1, s2, m, c).empty()) return m;
    }
    throw SizePreconditionFailed("no cutoff in [0, 4/c] yields a valid matching");
}

}  // namespace critedge
