#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>
#include <vector>

#include "critedge/partition.hpp"

namespace critedge::oracle {

// brute-force oracle: membership tables instead of the library checker
inline bool partition_ok(const Partition& s1, const Partition& s2, const PartitionMatching& m, double c) {
    if (m.refined_s1.size() != m.refined_s2.size()) return false;
    if (m.refined_s1.size() > s1.size() + s2.size()) return false;
    for (int side = 0; side < 2; ++side) {
        const Partition& in = side ? s2 : s1;
        const Partition& out = side ? m.refined_s2 : m.refined_s1;
        std::vector<std::int64_t> a, b;
        std::unordered_map<std::int64_t, std::size_t> owner;
        for (std::size_t k = 0; k < in.size(); ++k)
            for (auto i : in[k]) {
                a.push_back(i);
                owner[i] = k;
            }
        for (auto& blk : out) b.insert(b.end(), blk.begin(), blk.end());
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (a != b) return false;
        for (auto& blk : out) {
            if (blk.empty()) return false;
            const std::size_t home = owner.at(blk.front());
            if (!std::all_of(blk.begin(), blk.end(), [&](auto i) { return owner.at(i) == home; })) return false;
        }
    }
    for (std::size_t j = 0; j < m.refined_s1.size(); ++j) {
        const double q = double(m.refined_s2[j].size()) / double(m.refined_s1[j].size());
        if (q < c / 4 - 1e-12 || q > 4 / c + 1e-12) return false;
    }
    return true;
}

inline Partition random_partition(std::mt19937_64& rng, std::int64_t n, int m) {
    std::vector<std::int64_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::int64_t> cuts;
    std::uniform_int_distribution<std::int64_t> u(1, n - 1);
    std::set<std::int64_t> cs;
    while (static_cast<int>(cs.size()) < m - 1) cs.insert(u(rng));
    cuts.assign(cs.begin(), cs.end());
    cuts.push_back(n);
    Partition p;
    std::int64_t prev = 0;
    for (auto c : cuts) {
        p.emplace_back(idx.begin() + prev, idx.begin() + c);
        prev = c;
    }
    return p;
}

}  // namespace critedge::oracle
