#include "fairsched/oracle.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "fairsched/rng.hpp"

namespace fairsched::oracle {

namespace {

void check_inputs(const PreferenceMatrix& prefs, const owa::OwaWeights& weights,
                  const GroupPartition& partition) {
    if (partition.num_members() != prefs.size())
        throw InvalidInputError("owa schedule: partition does not cover the pool");
    if (weights.size() != partition.num_groups())
        throw InvalidInputError("owa schedule: weight count must equal group count");
}

/// Scratch-buffer objective evaluator for the hill-climbing inner loop.
/// Keeps per-group utility sums and evaluates a transposition by adjusting
/// the two affected groups, so one candidate costs O(G log G) and no
/// allocation.
class SwapEvaluator {
public:
    SwapEvaluator(const PreferenceMatrix& prefs, const owa::OwaWeights& weights,
                  const GroupPartition& partition)
        : prefs_(prefs), weights_(weights), partition_(partition),
          sums_(static_cast<std::size_t>(partition.num_groups())),
          scratch_(static_cast<std::size_t>(partition.num_groups())),
          inv_size_(static_cast<std::size_t>(partition.num_groups())) {
        for (int g = 0; g < partition.num_groups(); ++g)
            inv_size_[static_cast<std::size_t>(g)] =
                1.0 / static_cast<double>(partition.members(g).size());
    }

    double reset(const std::vector<int>& perm) {
        std::fill(sums_.begin(), sums_.end(), 0.0);
        for (int i = 0; i < prefs_.size(); ++i)
            sums_[static_cast<std::size_t>(partition_.group_of(i))] +=
                prefs_(i, perm[static_cast<std::size_t>(i)]);
        return value();
    }

    /// Objective after swapping the slots of defendants a and b; sums are restored.
    double evaluate_swap(const std::vector<int>& perm, int a, int b) {
        const int ga = partition_.group_of(a);
        const int gb = partition_.group_of(b);
        const double da = prefs_(a, perm[static_cast<std::size_t>(b)]) -
                          prefs_(a, perm[static_cast<std::size_t>(a)]);
        const double db = prefs_(b, perm[static_cast<std::size_t>(a)]) -
                          prefs_(b, perm[static_cast<std::size_t>(b)]);
        sums_[static_cast<std::size_t>(ga)] += da;
        sums_[static_cast<std::size_t>(gb)] += db;
        const double v = value();
        sums_[static_cast<std::size_t>(ga)] -= da;
        sums_[static_cast<std::size_t>(gb)] -= db;
        return v;
    }

private:
    double value() {
        for (std::size_t g = 0; g < sums_.size(); ++g) scratch_[g] = sums_[g] * inv_size_[g];
        std::sort(scratch_.begin(), scratch_.end());
        double v = 0.0;
        for (int k = 0; k < weights_.size(); ++k) v += weights_[k] * scratch_[static_cast<std::size_t>(k)];
        return v;
    }

    const PreferenceMatrix& prefs_;
    const owa::OwaWeights& weights_;
    const GroupPartition& partition_;
    std::vector<double> sums_;
    std::vector<double> scratch_;
    std::vector<double> inv_size_;
};

} // namespace

LocalSearchConfig reference_search_config(std::uint64_t seed) {
    return LocalSearchConfig{.restarts = 50, .max_iters = 5000, .seed = seed};
}

double owa_objective(const std::vector<int>& perm, const PreferenceMatrix& prefs,
                     const owa::OwaWeights& weights, const GroupPartition& partition) {
    const int num_groups = partition.num_groups();
    std::vector<double> group_util(static_cast<std::size_t>(num_groups), 0.0);
    for (int i = 0; i < prefs.size(); ++i)
        group_util[static_cast<std::size_t>(partition.group_of(i))] +=
            prefs(i, perm[static_cast<std::size_t>(i)]);
    for (int g = 0; g < num_groups; ++g)
        group_util[static_cast<std::size_t>(g)] /= static_cast<double>(partition.members(g).size());
    return owa::owa_value(weights, group_util);
}

ScheduleResult exact_owa_schedule(const PreferenceMatrix& prefs, const owa::OwaWeights& weights,
                                  const GroupPartition& partition) {
    check_inputs(prefs, weights, partition);
    const int n = prefs.size();
    if (n > kExactLimit)
        throw SizeLimitError("exact_owa_schedule: n > 9 is infeasible to enumerate; use local_search_owa");

    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_value = owa_objective(perm, prefs, weights, partition);
    while (std::next_permutation(perm.begin(), perm.end())) {
        const double value = owa_objective(perm, prefs, weights, partition);
        if (value > best_value) {
            best_value = value;
            best = perm;
        }
    }
    return {Assignment(std::move(best)), best_value};
}

ScheduleResult local_search_owa(const PreferenceMatrix& prefs, const owa::OwaWeights& weights,
                                const GroupPartition& partition, const LocalSearchConfig& cfg) {
    check_inputs(prefs, weights, partition);
    if (cfg.restarts < 1 || cfg.max_iters < 1)
        throw InvalidInputError("local_search_owa: restarts and max_iters must be at least 1");
    const int n = prefs.size();
    if (n < 2) throw InvalidInputError("local_search_owa: need n >= 2");

    SwapEvaluator eval(prefs, weights, partition);
    std::vector<int> best_overall;
    double best_overall_value = -std::numeric_limits<double>::infinity();

    for (int restart = 0; restart < cfg.restarts; ++restart) {
        Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(restart));
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);

        double current = eval.reset(perm);
        for (int iter = 0; iter < cfg.max_iters; ++iter) {
            // Best-improvement scan over all transpositions; first best wins ties.
            int best_a = -1, best_b = -1;
            double best_value = current;
            for (int a = 0; a < n - 1; ++a) {
                for (int b = a + 1; b < n; ++b) {
                    const double value = eval.evaluate_swap(perm, a, b);
                    if (value > best_value) {
                        best_value = value;
                        best_a = a;
                        best_b = b;
                    }
                }
            }
            if (best_a < 0) break; // local optimum
            std::swap(perm[static_cast<std::size_t>(best_a)], perm[static_cast<std::size_t>(best_b)]);
            current = eval.reset(perm); // resync sums to avoid incremental drift
        }

        if (current > best_overall_value) {
            best_overall_value = current;
            best_overall = perm;
        }
    }

    return {Assignment(std::move(best_overall)), best_overall_value};
}

} // namespace fairsched::oracle
