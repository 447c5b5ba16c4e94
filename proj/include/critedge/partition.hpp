#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace critedge {

using IndexSet = std::vector<std::int64_t>;
using Partition = std::vector<IndexSet>;

/// Refinements of two partitions paired position by position: refined_s1[j] <-> refined_s2[j].
struct PartitionMatching {
    Partition refined_s1, refined_s2;
    double ratio_min = 0, ratio_max = 0;  // over |f(J)| / |J|
    int cutoff = 0;                       // small-block threshold used for S1 (after the swap)
    bool model_case = false;
    bool swapped = false;  // the construction ran with the roles of S1 and S2 exchanged
};

enum class MatchMode {
    strict,   // enforce c <= N1/N2 <= 1/c and N_j >= 8 m1 m2 / c
    relaxed,  // search the cutoff and keep the first output passing check_matching
};

PartitionMatching match_partitions(const Partition& s1, const Partition& s2, double c,
                                   MatchMode mode = MatchMode::strict);

/// Refinement, equal length, at most m1 + m2 blocks, ratios in [c/4, 4/c]. Empty string when valid.
std::string check_matching(const Partition& s1, const Partition& s2, const PartitionMatching& m, double c);

}  // namespace critedge
