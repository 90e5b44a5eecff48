#include "fairsched/evalmetrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "fairsched/matching.hpp"
#include "fairsched/rng.hpp"
#include "fairsched/util.hpp"

namespace fairsched::evalmetrics {

std::string to_string(SolverKind kind) {
    switch (kind) {
        case SolverKind::Exact: return "exact";
        case SolverKind::LocalSearch: return "local_search";
        case SolverKind::Matching: return "matching";
    }
    throw InvalidInputError("unknown solver kind");
}

SolverKind solver_kind_from_string(const std::string& name) {
    if (name == "exact") return SolverKind::Exact;
    if (name == "local_search") return SolverKind::LocalSearch;
    if (name == "matching") return SolverKind::Matching;
    throw InvalidInputError("unknown solver kind: " + name);
}

SolverKind auto_reference(int n) {
    return n <= oracle::kExactLimit ? SolverKind::Exact : SolverKind::LocalSearch;
}

namespace {

Assignment schedule_with(SolverKind kind, const PreferenceMatrix& prefs,
                         const owa::OwaWeights& weights, const GroupPartition& partition,
                         const oracle::LocalSearchConfig& search) {
    switch (kind) {
        case SolverKind::Exact: return oracle::exact_owa_schedule(prefs, weights, partition).assignment;
        case SolverKind::LocalSearch:
            return oracle::local_search_owa(prefs, weights, partition, search).assignment;
        case SolverKind::Matching: return matching::solve_assignment(prefs.matrix());
    }
    throw InvalidInputError("unknown solver kind");
}

} // namespace

double regret(const PreferenceMatrix& pred, const PreferenceMatrix& truth,
              const owa::OwaWeights& weights, const GroupPartition& partition,
              SolverKind reference, const oracle::LocalSearchConfig& search) {
    if (pred.size() != truth.size()) throw InvalidInputError("regret: dimension mismatch");
    if (reference == SolverKind::Exact && truth.size() > oracle::kExactLimit)
        throw SizeLimitError("regret: exact reference limited to n <= 9; use local_search");

    const Assignment best_truth = schedule_with(reference, truth, weights, partition, search);
    const Assignment best_pred = schedule_with(reference, pred, weights, partition, search);
    const double ref_value = owa::owa_value(weights, group_utilities(best_truth, truth, partition));
    const double achieved = owa::owa_value(weights, group_utilities(best_pred, truth, partition));
    return ref_value - achieved;
}

double nmpd(std::span<const double> u) {
    if (u.empty()) throw InvalidInputError("nmpd: empty utility vector");
    const int n = static_cast<int>(u.size());
    double total = 0.0;
    for (double v : u) total += v;
    const double mean_util = total / n;
    if (!(mean_util > 0.0)) throw NumericError("nmpd: undefined for zero mean utility");
    double pairwise = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) pairwise += std::abs(u[static_cast<std::size_t>(i)] - u[static_cast<std::size_t>(j)]);
    return pairwise / (static_cast<double>(n) * static_cast<double>(n) * mean_util);
}

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::vector<double> reference_values(const datagen::Dataset& test, const EvalConfig& cfg) {
    const datagen::Dataset working = datagen::with_partition(test, cfg.partition_attribute);
    const int n = working.meta.pool_size;
    const SolverKind ref_kind = cfg.reference.value_or(auto_reference(n));
    if (ref_kind == SolverKind::Exact && n > oracle::kExactLimit)
        throw SizeLimitError("reference_values: exact reference limited to n <= 9");

    std::vector<double> refs(working.pools.size(), 0.0);
    util::parallel_for(0, static_cast<int>(working.pools.size()), [&](int p) {
        const auto& pool = working.pools[static_cast<std::size_t>(p)];
        const GroupPartition partition = GroupPartition::from_labels(pool.groups);
        const owa::OwaWeights weights = owa::gini_weights(partition.num_groups());
        oracle::LocalSearchConfig search = cfg.search;
        search.seed = Rng::substream(cfg.search.seed, static_cast<std::uint64_t>(p)).next_u64();
        const Assignment best = schedule_with(ref_kind, pool.prefs, weights, partition, search);
        refs[static_cast<std::size_t>(p)] =
            owa::owa_value(weights, group_utilities(best, pool.prefs, partition));
    });
    return refs;
}

EvalReport evaluate_model(const learn::MlpModel& model, const datagen::Dataset& test,
                          const EvalConfig& cfg, const std::string& model_name,
                          const std::vector<double>* precomputed_refs) {
    const datagen::Dataset working = datagen::with_partition(test, cfg.partition_attribute);
    if (working.pools.empty()) throw InvalidInputError("evaluate_model: empty test set");
    const int n = working.meta.pool_size;
    if (model.output_dim() != n)
        throw InvalidInputError("evaluate_model: model output does not match pool size");

    const SolverKind ref_kind = cfg.reference.value_or(auto_reference(n));
    const SolverKind model_kind =
        cfg.loss_kind == learn::LossKind::TwoStage ? auto_reference(n) : SolverKind::Matching;

    std::vector<double> refs;
    if (precomputed_refs) {
        if (precomputed_refs->size() != working.pools.size())
            throw InvalidInputError("evaluate_model: precomputed reference size mismatch");
        refs = *precomputed_refs;
    } else {
        refs = reference_values(working, cfg);
    }

    const int num_pools = static_cast<int>(working.pools.size());
    std::vector<double> regret_raw(static_cast<std::size_t>(num_pools));
    std::vector<double> nmpd_vals(static_cast<std::size_t>(num_pools),
                                  std::numeric_limits<double>::quiet_NaN());

    util::parallel_for(0, num_pools, [&](int p) {
        const auto& pool = working.pools[static_cast<std::size_t>(p)];
        const GroupPartition partition = GroupPartition::from_labels(pool.groups);
        const owa::OwaWeights weights = owa::gini_weights(partition.num_groups());
        const PreferenceMatrix pred = learn::predict_pool(model, pool.features);

        oracle::LocalSearchConfig search = cfg.search;
        search.seed = Rng::substream(cfg.search.seed + 1, static_cast<std::uint64_t>(p)).next_u64();
        const Assignment schedule = schedule_with(model_kind, pred, weights, partition, search);
        const std::vector<double> util = group_utilities(schedule, pool.prefs, partition);
        const double achieved = owa::owa_value(weights, util);
        regret_raw[static_cast<std::size_t>(p)] = refs[static_cast<std::size_t>(p)] - achieved;

        double total = 0.0;
        for (double v : util) total += v;
        if (total > 0.0) nmpd_vals[static_cast<std::size_t>(p)] = nmpd(util);
    });

    EvalReport report;
    report.model_name = model_name;
    report.loss_kind = learn::to_string(cfg.loss_kind);
    report.partition_attribute = working.meta.partition_attribute;
    report.inference_solver = to_string(model_kind);
    report.reference_solver = to_string(ref_kind);
    report.num_pools = num_pools;

    std::vector<double> regret_clipped(static_cast<std::size_t>(num_pools));
    std::vector<double> pct_raw(static_cast<std::size_t>(num_pools));
    std::vector<double> pct_clipped(static_cast<std::size_t>(num_pools));
    std::vector<double> nmpd_defined;
    nmpd_defined.reserve(static_cast<std::size_t>(num_pools));
    for (int p = 0; p < num_pools; ++p) {
        const double ref = refs[static_cast<std::size_t>(p)];
        if (!(ref > 0.0)) throw NumericError("evaluate_model: reference fair value not positive");
        const double raw = regret_raw[static_cast<std::size_t>(p)];
        if (raw < 0.0) ++report.negative_regret_pools;
        const double clipped = std::max(raw, 0.0);
        regret_clipped[static_cast<std::size_t>(p)] = clipped;
        pct_raw[static_cast<std::size_t>(p)] = 100.0 * raw / ref;
        pct_clipped[static_cast<std::size_t>(p)] = 100.0 * clipped / ref;
        const double nv = nmpd_vals[static_cast<std::size_t>(p)];
        if (std::isnan(nv))
            ++report.nmpd_undefined_pools;
        else
            nmpd_defined.push_back(nv);
    }

    report.regret_mean = mean(regret_clipped);
    report.regret_std = sample_std(regret_clipped);
    report.regret_pct_mean = mean(pct_clipped);
    report.regret_pct_std = sample_std(pct_clipped);
    report.regret_pct_mean_raw = mean(pct_raw);
    report.nmpd_mean = mean(nmpd_defined);
    report.nmpd_std = sample_std(nmpd_defined);
    report.per_pool_regret_pct = std::move(pct_clipped);
    report.per_pool_nmpd = std::move(nmpd_vals);
    return report;
}

namespace {

PreferenceMatrix random_preferences(int n, Rng& rng) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            m(i, j) = rng.next_double() + 1e-9;
            sum += m(i, j);
        }
        for (int j = 0; j < n; ++j) m(i, j) /= sum;
    }
    return PreferenceMatrix(std::move(m));
}

} // namespace

std::vector<BenchRecord> bench_matching(const std::vector<int>& sizes, int repeats,
                                        std::uint64_t seed) {
    if (repeats < 1) throw InvalidInputError("bench_matching: repeats must be at least 1");
    std::vector<BenchRecord> records;
    for (int n : sizes) {
        if (n < 2) throw InvalidInputError("bench_matching: sizes must be at least 2");
        for (int r = 0; r < repeats; ++r) {
            Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(n) * 1000003ULL +
                                               static_cast<std::uint64_t>(r));
            Matrix profits(n, n);
            for (double& v : profits.data) v = rng.next_double();
            const auto t0 = std::chrono::steady_clock::now();
            const Assignment a = matching::solve_assignment(profits);
            const auto t1 = std::chrono::steady_clock::now();
            (void)a;
            records.push_back(
                {n, r, std::chrono::duration<double, std::micro>(t1 - t0).count()});
        }
    }
    return records;
}

std::vector<BenchRecord> bench_exact_owa(const std::vector<int>& sizes, int repeats,
                                         std::uint64_t seed) {
    if (repeats < 1) throw InvalidInputError("bench_exact_owa: repeats must be at least 1");
    std::vector<BenchRecord> records;
    for (int n : sizes) {
        if (n < 2 || n > oracle::kExactLimit)
            throw InvalidInputError("bench_exact_owa: sizes must lie in [2, 9]");
        const owa::OwaWeights weights = owa::gini_weights(n);
        const GroupPartition partition = GroupPartition::singletons(n);
        for (int r = 0; r < repeats; ++r) {
            Rng rng = Rng::substream(seed, 0xE0000000ULL + static_cast<std::uint64_t>(n) * 1000003ULL +
                                               static_cast<std::uint64_t>(r));
            const PreferenceMatrix prefs = random_preferences(n, rng);
            const auto t0 = std::chrono::steady_clock::now();
            const auto res = oracle::exact_owa_schedule(prefs, weights, partition);
            const auto t1 = std::chrono::steady_clock::now();
            (void)res;
            records.push_back(
                {n, r, std::chrono::duration<double, std::micro>(t1 - t0).count()});
        }
    }
    return records;
}

void write_bench_csv(const std::vector<BenchRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_bench_csv: cannot open " + path.string());
    out << "n,repeat,micros\n";
    for (const auto& rec : records)
        out << rec.n << "," << rec.repeat << "," << util::format_double(rec.micros) << "\n";
    if (!out) throw DataError("write_bench_csv: write failed for " + path.string());
}

} // namespace fairsched::evalmetrics
