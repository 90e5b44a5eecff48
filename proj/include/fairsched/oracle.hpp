#pragma once

#include <cstdint>

#include "fairsched/core.hpp"
#include "fairsched/owa.hpp"

namespace fairsched::oracle {

/// Enumeration cutoff for the exact solver: 9! permutations is the largest
/// instance worth brute-forcing.
inline constexpr int kExactLimit = 9;

struct ScheduleResult {
    Assignment assignment;
    double value;
};

/// Restarted 2-swap hill climbing parameters. Each restart draws its own
/// substream from (seed, restart index), so results for restart k do not
/// depend on how many restarts run in total.
struct LocalSearchConfig {
    int restarts = 20;
    int max_iters = 1000;
    std::uint64_t seed = 0;
};

/// Fair-schedule reference at n=12: the proxy configuration standing in for
/// an exact solver on pool-sized instances.
LocalSearchConfig reference_search_config(std::uint64_t seed = 0);

/// Exhaustive maximizer of OWA_w(group utilities) over all n! permutations.
/// With a singleton partition this solves the individual-fairness program.
/// Throws SizeLimitError for n > 9; use local_search_owa there.
ScheduleResult exact_owa_schedule(const PreferenceMatrix& prefs, const owa::OwaWeights& weights,
                                  const GroupPartition& partition);

/// Best-improvement 2-swap hill climbing from random starts, reduced by max.
ScheduleResult local_search_owa(const PreferenceMatrix& prefs, const owa::OwaWeights& weights,
                                const GroupPartition& partition, const LocalSearchConfig& cfg);

/// OWA_w of the group utilities induced by a permutation (shared objective).
double owa_objective(const std::vector<int>& perm, const PreferenceMatrix& prefs,
                     const owa::OwaWeights& weights, const GroupPartition& partition);

} // namespace fairsched::oracle
