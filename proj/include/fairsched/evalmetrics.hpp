#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fairsched/core.hpp"
#include "fairsched/datagen.hpp"
#include "fairsched/learn.hpp"
#include "fairsched/oracle.hpp"
#include "fairsched/owa.hpp"

namespace fairsched::evalmetrics {

/// Solver used to turn a preference matrix into a schedule.
enum class SolverKind { Exact, LocalSearch, Matching };

std::string to_string(SolverKind kind);
SolverKind solver_kind_from_string(const std::string& name);

/// Reference choice for a pool size: exhaustive up to n=9, then the
/// restarted-local-search proxy.
SolverKind auto_reference(int n);

/// Fair value lost by scheduling from `pred` instead of `truth`:
/// OWA(u(Pi*(truth), truth)) - OWA(u(Pi*(pred), truth)), both schedules
/// produced by the chosen solver. Negative only when the reference solver is
/// a heuristic proxy that the prediction-side schedule happened to beat.
double regret(const PreferenceMatrix& pred, const PreferenceMatrix& truth,
              const owa::OwaWeights& weights, const GroupPartition& partition,
              SolverKind reference,
              const oracle::LocalSearchConfig& search = oracle::reference_search_config());

/// Normalized mean pairwise difference (1 / n^2 ubar) sum_ij |u_i - u_j|;
/// 0 for identical outcomes, scale- and permutation-invariant. Throws
/// NumericError when the mean utility is zero.
double nmpd(std::span<const double> u);

struct EvalConfig {
    learn::LossKind loss_kind = learn::LossKind::TwoStage;
    /// Empty: keep the dataset's own partition.
    std::string partition_attribute;
    /// Reference-side solver; defaults to auto_reference(n).
    std::optional<SolverKind> reference;
    oracle::LocalSearchConfig search = oracle::reference_search_config();
};

struct EvalReport {
    std::string model_name;
    std::string loss_kind;
    std::string partition_attribute;
    std::string inference_solver;
    std::string reference_solver;
    int num_pools = 0;

    double regret_mean = 0.0;
    double regret_std = 0.0;
    double regret_pct_mean = 0.0;
    double regret_pct_std = 0.0;
    double nmpd_mean = 0.0;
    double nmpd_std = 0.0;

    /// Pools where the proxy reference was beaten (clipped to 0 before
    /// aggregation; raw mean kept for honesty).
    int negative_regret_pools = 0;
    double regret_pct_mean_raw = 0.0;
    /// Pools whose achieved utilities were all zero (no defined NMPD).
    int nmpd_undefined_pools = 0;

    std::vector<double> per_pool_regret_pct;
    std::vector<double> per_pool_nmpd;
};

/// Reference fair values OWA(u(Pi*(Y), Y)) per pool; reusable across models
/// evaluated on the same dataset/partition.
std::vector<double> reference_values(const datagen::Dataset& test, const EvalConfig& cfg);

/// Per-pool evaluation: predict, schedule with the model's inference solver
/// (prediction-loss models solve the fair program on predictions; decision-
/// loss models use the matching layer), then regret percent and the NMPD of
/// the achieved group utilities, aggregated as mean/std over pools.
EvalReport evaluate_model(const learn::MlpModel& model, const datagen::Dataset& test,
                          const EvalConfig& cfg, const std::string& model_name = "",
                          const std::vector<double>* precomputed_refs = nullptr);

struct BenchRecord {
    int n = 0;
    int repeat = 0;
    double micros = 0.0;
};

/// Wall-clock of solve_assignment on seeded random profit matrices.
std::vector<BenchRecord> bench_matching(const std::vector<int>& sizes, int repeats,
                                        std::uint64_t seed);

/// Wall-clock of the exhaustive fair-schedule solver (n <= 9 only).
std::vector<BenchRecord> bench_exact_owa(const std::vector<int>& sizes, int repeats,
                                         std::uint64_t seed);

void write_bench_csv(const std::vector<BenchRecord>& records, const std::filesystem::path& path);

double mean(std::span<const double> xs);
double sample_std(std::span<const double> xs);

} // namespace fairsched::evalmetrics
