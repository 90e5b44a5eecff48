// fairsched: synthetic fair-scheduling pipeline driver.
// Subcommands: datagen | train | eval | bench. A JSON config file can supply
// any value (one section per subcommand); command-line flags override it.
// Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairsched/datagen.hpp"
#include "fairsched/evalmetrics.hpp"
#include "fairsched/learn.hpp"
#include "fairsched/util.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace fairsched;

namespace {

json load_config_section(const std::string& config_path, const std::string& section) {
    if (config_path.empty()) return json::object();
    std::ifstream in(config_path);
    if (!in) throw DataError("config file not found: " + config_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + config_path + ": " + e.what());
    }
    json merged = json::object();
    for (const auto& [key, value] : j.items())
        if (!value.is_object()) merged[key] = value;
    if (j.contains(section))
        for (const auto& [key, value] : j[section].items()) merged[key] = value;
    return merged;
}

/// Fill `target` from the config section when the flag was not given on the
/// command line.
template <typename T>
void merge(const CLI::App* cmd, const std::string& flag, const json& cfg, const std::string& key,
           T& target) {
    if (cmd->get_option(flag)->count() > 0) return;
    if (cfg.contains(key)) target = cfg.at(key).get<T>();
}

std::vector<std::uint64_t> parse_seed_list(const std::string& spec) {
    auto parse_one = [&](const std::string& tok) -> std::uint64_t {
        std::uint64_t v = 0;
        std::size_t used = 0;
        try {
            v = std::stoull(tok, &used);
        } catch (const std::logic_error&) {
            throw InvalidInputError("bad seed '" + tok + "' in: " + spec);
        }
        if (used != tok.size()) throw InvalidInputError("bad seed '" + tok + "' in: " + spec);
        return v;
    };
    std::vector<std::uint64_t> seeds;
    const auto range_pos = spec.find("..");
    if (range_pos != std::string::npos) {
        const std::uint64_t lo = parse_one(spec.substr(0, range_pos));
        const std::uint64_t hi = parse_one(spec.substr(range_pos + 2));
        if (hi < lo) throw InvalidInputError("seed range is empty: " + spec);
        for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
        return seeds;
    }
    std::size_t start = 0;
    while (start <= spec.size()) {
        const auto comma = spec.find(',', start);
        const std::string tok = spec.substr(start, comma == std::string::npos ? std::string::npos
                                                                              : comma - start);
        if (!tok.empty()) seeds.push_back(parse_one(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (seeds.empty()) throw InvalidInputError("no seeds in: " + spec);
    return seeds;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

std::string config_comment(const json& resolved, const std::vector<std::pair<std::string, std::string>>& inputs) {
    std::string s = "# config: " + resolved.dump() + "\n";
    for (const auto& [name, hash] : inputs) s += "# input " + name + ": " + hash + "\n";
    return s;
}

// ---------------------------------------------------------------------------

struct DatagenArgs {
    int n_pools = 250;
    int test_pools = 500;
    int pool_size = 12;
    std::uint64_t seed = 1;
    std::string partition = "individual";
    std::vector<double> choice_weights = {0.6, 0.3, 0.1};
    long chisq_samples = 100000;
    std::string out_dir = "out";
};

int cmd_datagen(const DatagenArgs& a) {
    if (a.n_pools < 1) throw InvalidInputError("--n-pools must be at least 1");
    if (a.test_pools < 0) throw InvalidInputError("--test-pools must be nonnegative");
    if (a.choice_weights.size() != 3) throw InvalidInputError("--choice-weights needs 3 values");

    const SlotGrid grid = datagen::grid_for_pool_size(a.pool_size);
    const datagen::CptSet cpts = datagen::CptSet::defaults(grid);

    datagen::GenConfig gen;
    gen.num_pools = a.n_pools;
    gen.pool_size = a.pool_size;
    gen.seed = a.seed;
    gen.partition_attribute = a.partition;
    std::copy(a.choice_weights.begin(), a.choice_weights.end(), gen.choice_weights.begin());

    const json resolved = {{"n_pools", a.n_pools},       {"test_pools", a.test_pools},
                           {"pool_size", a.pool_size},   {"seed", a.seed},
                           {"partition", a.partition},   {"choice_weights", a.choice_weights},
                           {"chisq_samples", a.chisq_samples}};

    fs::create_directories(a.out_dir);
    const fs::path train_path = fs::path(a.out_dir) / "train.jsonl";
    datagen::Dataset train_ds = datagen::generate_dataset(gen, cpts, grid);
    datagen::write_dataset(train_ds, train_path, resolved.dump());
    std::printf("wrote %s (%d pools)\n", train_path.string().c_str(), a.n_pools);

    if (a.test_pools > 0) {
        datagen::GenConfig test_gen = gen;
        test_gen.num_pools = a.test_pools;
        test_gen.seed = a.seed ^ 0x9e3779b97f4a7c15ULL; // disjoint stream, derived from one seed
        const fs::path test_path = fs::path(a.out_dir) / "test.jsonl";
        datagen::write_dataset(datagen::generate_dataset(test_gen, cpts, grid), test_path, resolved.dump());
        std::printf("wrote %s (%d pools)\n", test_path.string().c_str(), a.test_pools);
    }

    write_text(fs::path(a.out_dir) / "datagen_config.json", resolved.dump(2) + "\n");

    if (a.chisq_samples > 0) {
        const auto rows = datagen::cpt_chi_square(cpts, grid, a.chisq_samples, a.seed + 17);
        int failed = 0;
        std::printf("\nCPT goodness of fit (%ld samples, significance 0.001):\n", a.chisq_samples);
        std::printf("%-46s %-28s %9s %9s %4s %9s %s\n", "table", "context", "samples", "chi2",
                    "dof", "p", "ok");
        for (const auto& row : rows) {
            if (!row.pass) ++failed;
            std::printf("%-46s %-28s %9ld %9.3f %4d %9.5f %s\n", row.table.c_str(),
                        row.context.c_str(), row.samples, row.statistic, row.dof, row.p_value,
                        row.pass ? "yes" : "NO");
        }
        std::printf("%d/%zu contexts pass\n", static_cast<int>(rows.size()) - failed, rows.size());
        if (failed > 0)
            std::fprintf(stderr, "warning: %d context(s) failed the goodness-of-fit check\n", failed);
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string val_data;
    std::vector<std::string> losses = {"two_stage", "tu_dq", "owa_dq"};
    std::string seeds = "1..5";
    int epochs = 300;
    double lr = 0.01;
    int batch_size = 64;
    double lambda = 0.5;
    double beta = 0.0;
    std::string partition;
    int hidden = 64;
    int patience = 30;
    int pretrain_epochs = 50;
    double pretrain_lr = 0.01;
    std::string out_dir = "out";
};

int cmd_train(const TrainArgs& a) {
    if (a.data.empty()) throw InvalidInputError("--data is required for train");
    if (!fs::exists(a.data)) throw DataError("dataset file not found: " + a.data);
    const datagen::Dataset dataset = datagen::read_dataset(a.data);
    const std::string dataset_hash = util::sha256_file(a.data);

    std::optional<datagen::Dataset> val;
    std::string val_hash;
    if (!a.val_data.empty()) {
        if (!fs::exists(a.val_data)) throw DataError("validation file not found: " + a.val_data);
        val = datagen::read_dataset(a.val_data);
        val_hash = util::sha256_file(a.val_data);
    }

    const std::vector<std::uint64_t> seeds = parse_seed_list(a.seeds);
    fs::create_directories(a.out_dir);

    for (const std::string& loss_name : a.losses) {
        for (const std::uint64_t seed : seeds) {
            learn::TrainConfig cfg;
            cfg.loss_kind = learn::loss_kind_from_string(loss_name);
            cfg.learning_rate = a.lr;
            cfg.batch_size = a.batch_size;
            cfg.epochs = a.epochs;
            cfg.seed = seed;
            cfg.lambda = a.lambda;
            cfg.beta = a.beta;
            cfg.partition_attribute = a.partition.empty() ? dataset.meta.partition_attribute : a.partition;
            cfg.first_hidden = a.hidden;
            cfg.patience = a.patience;
            cfg.pretrain_epochs = a.pretrain_epochs;
            cfg.pretrain_learning_rate = a.pretrain_lr;

            const auto result = learn::train(dataset, cfg, val ? &*val : nullptr);

            const std::string stem = loss_name + "_seed" + std::to_string(seed);
            const fs::path ckpt = fs::path(a.out_dir) / ("checkpoint_" + stem + ".json");
            learn::write_checkpoint(result.model, cfg, dataset_hash, ckpt);

            const json resolved = {{"data", a.data},       {"val_data", a.val_data},
                                   {"loss", loss_name},    {"seed", seed},
                                   {"epochs", a.epochs},   {"lr", a.lr},
                                   {"batch_size", a.batch_size}, {"lambda", a.lambda},
                                   {"beta", a.beta},       {"partition", cfg.partition_attribute},
                                   {"hidden", a.hidden},   {"patience", a.patience},
                                   {"pretrain_epochs", a.pretrain_epochs},
                                   {"pretrain_lr", a.pretrain_lr}};
            std::vector<std::pair<std::string, std::string>> inputs = {{"dataset", dataset_hash}};
            if (!val_hash.empty()) inputs.emplace_back("validation", val_hash);

            std::string csv = config_comment(resolved, inputs);
            csv += "epoch,train_loss,val_proxy_regret\n";
            for (int e = 0; e < result.history.epochs_run; ++e)
                csv += std::to_string(e) + "," +
                       util::format_double(result.history.train_loss[static_cast<std::size_t>(e)]) + "," +
                       util::format_double(result.history.val_proxy_regret[static_cast<std::size_t>(e)]) + "\n";
            write_text(fs::path(a.out_dir) / ("history_" + stem + ".csv"), csv);

            // Wall-clock goes to a sibling file so semantic outputs stay
            // byte-identical across reruns.
            std::string timing = "epoch,wall_seconds\n";
            for (int e = 0; e < result.history.epochs_run; ++e)
                timing += std::to_string(e) + "," +
                          util::format_double(result.history.wall_seconds[static_cast<std::size_t>(e)]) + "\n";
            write_text(fs::path(a.out_dir) / ("history_" + stem + "_timing.csv"), timing);

            std::printf("trained %s: %d epochs, final loss %.6f -> %s\n", stem.c_str(),
                        result.history.epochs_run,
                        result.history.epochs_run > 0 ? result.history.train_loss.back() : 0.0,
                        ckpt.string().c_str());
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string data;
    std::vector<std::string> checkpoints;
    std::vector<std::string> partitions;
    int restarts = 50;
    int max_iters = 5000;
    std::uint64_t search_seed = 0;
    std::string out_dir = "out";
};

int cmd_eval(const EvalArgs& a) {
    if (a.data.empty()) throw InvalidInputError("--data is required for eval");
    if (!fs::exists(a.data)) throw DataError("test dataset not found: " + a.data);
    if (a.checkpoints.empty()) throw InvalidInputError("at least one --checkpoint is required");

    const datagen::Dataset test = datagen::read_dataset(a.data);
    const std::string data_hash = util::sha256_file(a.data);
    fs::create_directories(a.out_dir);

    const json eval_resolved = {{"data", a.data},          {"checkpoints", a.checkpoints},
                                {"partitions", a.partitions}, {"restarts", a.restarts},
                                {"max_iters", a.max_iters},   {"search_seed", a.search_seed}};
    std::vector<std::pair<std::string, std::string>> eval_inputs = {{"dataset", data_hash}};
    for (const std::string& ckpt : a.checkpoints)
        if (fs::exists(ckpt)) eval_inputs.emplace_back(fs::path(ckpt).stem().string(), util::sha256_file(ckpt));
    std::string summary = config_comment(eval_resolved, eval_inputs);
    summary += "model,setting,regret_pct_mean,regret_pct_std,nmpd_mean\n";
    json timing = json::object();

    // Reference schedules depend only on (dataset, partition); cache across models.
    std::map<std::string, std::vector<double>> ref_cache;

    for (const std::string& ckpt_path : a.checkpoints) {
        if (!fs::exists(ckpt_path)) throw DataError("checkpoint not found: " + ckpt_path);
        learn::TrainConfig tcfg;
        const learn::MlpModel model = learn::read_checkpoint(ckpt_path, &tcfg);
        const std::string model_name = fs::path(ckpt_path).stem().string();

        std::vector<std::string> settings = a.partitions;
        if (settings.empty()) settings = {tcfg.partition_attribute};

        for (const std::string& setting : settings) {
            evalmetrics::EvalConfig ecfg;
            ecfg.loss_kind = tcfg.loss_kind;
            ecfg.partition_attribute = setting;
            ecfg.search = {.restarts = a.restarts, .max_iters = a.max_iters, .seed = a.search_seed};

            const auto t0 = std::chrono::steady_clock::now();
            auto cache_it = ref_cache.find(setting);
            if (cache_it == ref_cache.end())
                cache_it = ref_cache.emplace(setting, evalmetrics::reference_values(test, ecfg)).first;
            const auto report =
                evalmetrics::evaluate_model(model, test, ecfg, model_name, &cache_it->second);
            const auto t1 = std::chrono::steady_clock::now();

            const json resolved = {{"data", a.data},
                                   {"checkpoint", ckpt_path},
                                   {"setting", setting},
                                   {"restarts", a.restarts},
                                   {"max_iters", a.max_iters},
                                   {"search_seed", a.search_seed}};
            json jr = {{"model", report.model_name},
                       {"loss_kind", report.loss_kind},
                       {"setting", report.partition_attribute},
                       {"train_seed", tcfg.seed},
                       {"inference_solver", report.inference_solver},
                       {"reference_solver", report.reference_solver},
                       {"regret_kind", report.reference_solver == "local_search" ? "proxy" : "exact"},
                       {"num_pools", report.num_pools},
                       {"regret_mean", report.regret_mean},
                       {"regret_std", report.regret_std},
                       {"regret_pct_mean", report.regret_pct_mean},
                       {"regret_pct_std", report.regret_pct_std},
                       {"regret_pct_mean_raw", report.regret_pct_mean_raw},
                       {"nmpd_mean", report.nmpd_mean},
                       {"nmpd_std", report.nmpd_std},
                       {"negative_regret_pools", report.negative_regret_pools},
                       {"nmpd_undefined_pools", report.nmpd_undefined_pools},
                       {"per_pool_regret_pct", report.per_pool_regret_pct},
                       {"config", resolved},
                       {"inputs", {{"dataset", data_hash}, {"checkpoint", util::sha256_file(ckpt_path)}}}};
            const fs::path report_path =
                fs::path(a.out_dir) / ("report_" + model_name + "_" + setting + ".json");
            write_text(report_path, jr.dump(2) + "\n");

            summary += report.model_name + "," + setting + "," +
                       util::format_double(report.regret_pct_mean) + "," +
                       util::format_double(report.regret_pct_std) + "," +
                       util::format_double(report.nmpd_mean) + "\n";
            timing[model_name + "_" + setting] = std::chrono::duration<double>(t1 - t0).count();

            std::printf("%-36s %-16s regret %6.2f%% +- %5.2f  nmpd %.4f%s\n", model_name.c_str(),
                        setting.c_str(), report.regret_pct_mean, report.regret_pct_std,
                        report.nmpd_mean,
                        report.negative_regret_pools > 0
                            ? ("  [proxy reference beaten on " +
                               std::to_string(report.negative_regret_pools) + " pools]")
                                  .c_str()
                            : "");
        }
    }

    write_text(fs::path(a.out_dir) / "eval_summary.csv", summary);
    write_text(fs::path(a.out_dir) / "eval_timing.json", timing.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
    std::vector<int> sizes = {4, 6, 8, 12, 24, 48};
    int repeats = 100;
    int exact_repeats = 10;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
};

int cmd_bench(const BenchArgs& a) {
    const auto matching = evalmetrics::bench_matching(a.sizes, a.repeats, a.seed);

    std::vector<int> exact_sizes;
    for (int n : a.sizes)
        if (n <= oracle::kExactLimit) exact_sizes.push_back(n);
    const auto exact = a.exact_repeats > 0 && !exact_sizes.empty()
                           ? evalmetrics::bench_exact_owa(exact_sizes, a.exact_repeats, a.seed)
                           : std::vector<evalmetrics::BenchRecord>{};

    const json resolved = {{"sizes", a.sizes},
                           {"repeats", a.repeats},
                           {"exact_repeats", a.exact_repeats},
                           {"seed", a.seed}};
    std::string csv = config_comment(resolved, {});
    csv += "n,repeat,matching_micros,exact_owa_micros\n";
    std::map<std::pair<int, int>, double> exact_by_key;
    for (const auto& r : exact) exact_by_key[{r.n, r.repeat}] = r.micros;
    for (const auto& r : matching) {
        csv += std::to_string(r.n) + "," + std::to_string(r.repeat) + "," +
               util::format_double(r.micros) + ",";
        const auto it = exact_by_key.find({r.n, r.repeat});
        if (it != exact_by_key.end()) csv += util::format_double(it->second);
        csv += "\n";
    }
    fs::create_directories(a.out_dir);
    const fs::path path = fs::path(a.out_dir) / "bench.csv";
    write_text(path, csv);

    for (int n : a.sizes) {
        double sum = 0.0;
        int count = 0;
        for (const auto& r : matching)
            if (r.n == n) {
                sum += r.micros;
                ++count;
            }
        std::printf("matching n=%-3d mean %10.2f us over %d repeats\n", n, sum / count, count);
    }
    std::printf("wrote %s\n", path.string().c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fair pretrial scheduling: data generation, training, evaluation, benchmarks"};
    app.require_subcommand(1);
    app.fallthrough(); // let --config appear after the subcommand name

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (one section per subcommand)")
        ->envname("FAIRSCHED_CONFIG");

    DatagenArgs dg;
    CLI::App* datagen_cmd = app.add_subcommand("datagen", "Generate train/test datasets");
    datagen_cmd->add_option("--n-pools", dg.n_pools, "training pools");
    datagen_cmd->add_option("--test-pools", dg.test_pools, "test pools (0 to skip)");
    datagen_cmd->add_option("--pool-size", dg.pool_size, "defendants per pool");
    datagen_cmd->add_option("--seed", dg.seed, "master seed");
    datagen_cmd->add_option("--partition", dg.partition,
                            "individual|employment|transportation|work_hours");
    datagen_cmd->add_option("--choice-weights", dg.choice_weights, "first/second/third choice mass")
        ->expected(3);
    datagen_cmd->add_option("--chisq-samples", dg.chisq_samples, "fidelity check samples (0 to skip)");
    datagen_cmd->add_option("--out-dir", dg.out_dir, "output directory");

    TrainArgs tr;
    CLI::App* train_cmd = app.add_subcommand("train", "Train preference predictors");
    train_cmd->add_option("--data", tr.data, "training dataset (jsonl)");
    train_cmd->add_option("--val-data", tr.val_data, "validation dataset for early stopping");
    train_cmd->add_option("--loss", tr.losses, "two_stage|tu_dq|owa_dq (repeatable)");
    train_cmd->add_option("--seeds", tr.seeds, "seed list: 1..5 or 1,2,3");
    train_cmd->add_option("--epochs", tr.epochs, "epoch count");
    train_cmd->add_option("--lr", tr.lr, "learning rate");
    train_cmd->add_option("--batch-size", tr.batch_size, "pools per update");
    train_cmd->add_option("--lambda", tr.lambda, "blackbox interpolation step");
    train_cmd->add_option("--beta", tr.beta, "Moreau smoothing (0 = subgradient rule)");
    train_cmd->add_option("--partition", tr.partition, "override the dataset's partition");
    train_cmd->add_option("--hidden", tr.hidden, "first hidden width");
    train_cmd->add_option("--patience", tr.patience, "early-stop patience (with --val-data)");
    train_cmd->add_option("--pretrain-epochs", tr.pretrain_epochs,
                          "squared-error warm-start epochs for decision losses");
    train_cmd->add_option("--pretrain-lr", tr.pretrain_lr, "warm-start learning rate");
    train_cmd->add_option("--out-dir", tr.out_dir, "output directory");

    EvalArgs ev;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate checkpoints on a test set");
    eval_cmd->add_option("--data", ev.data, "test dataset (jsonl)");
    eval_cmd->add_option("--checkpoint", ev.checkpoints, "checkpoint file (repeatable)");
    eval_cmd->add_option("--partitions", ev.partitions, "settings to evaluate (repeatable)");
    eval_cmd->add_option("--restarts", ev.restarts, "local-search restarts");
    eval_cmd->add_option("--max-iters", ev.max_iters, "local-search iterations per restart");
    eval_cmd->add_option("--search-seed", ev.search_seed, "local-search seed");
    eval_cmd->add_option("--out-dir", ev.out_dir, "output directory");

    BenchArgs bn;
    CLI::App* bench_cmd = app.add_subcommand("bench", "Time the schedulers");
    bench_cmd->add_option("--sizes", bn.sizes, "pool sizes (repeatable)");
    bench_cmd->add_option("--repeats", bn.repeats, "matching repeats per size");
    bench_cmd->add_option("--exact-repeats", bn.exact_repeats, "exhaustive-solver repeats (n <= 9)");
    bench_cmd->add_option("--seed", bn.seed, "instance seed");
    bench_cmd->add_option("--out-dir", bn.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (datagen_cmd->parsed()) {
            const json cfg = load_config_section(config_path, "datagen");
            merge(datagen_cmd, "--n-pools", cfg, "n_pools", dg.n_pools);
            merge(datagen_cmd, "--test-pools", cfg, "test_pools", dg.test_pools);
            merge(datagen_cmd, "--pool-size", cfg, "pool_size", dg.pool_size);
            merge(datagen_cmd, "--seed", cfg, "seed", dg.seed);
            merge(datagen_cmd, "--partition", cfg, "partition", dg.partition);
            merge(datagen_cmd, "--choice-weights", cfg, "choice_weights", dg.choice_weights);
            merge(datagen_cmd, "--chisq-samples", cfg, "chisq_samples", dg.chisq_samples);
            merge(datagen_cmd, "--out-dir", cfg, "out_dir", dg.out_dir);
            return cmd_datagen(dg);
        }
        if (train_cmd->parsed()) {
            const json cfg = load_config_section(config_path, "train");
            merge(train_cmd, "--data", cfg, "data", tr.data);
            merge(train_cmd, "--val-data", cfg, "val_data", tr.val_data);
            merge(train_cmd, "--loss", cfg, "losses", tr.losses);
            merge(train_cmd, "--seeds", cfg, "seeds", tr.seeds);
            merge(train_cmd, "--epochs", cfg, "epochs", tr.epochs);
            merge(train_cmd, "--lr", cfg, "lr", tr.lr);
            merge(train_cmd, "--batch-size", cfg, "batch_size", tr.batch_size);
            merge(train_cmd, "--lambda", cfg, "lambda", tr.lambda);
            merge(train_cmd, "--beta", cfg, "beta", tr.beta);
            merge(train_cmd, "--partition", cfg, "partition", tr.partition);
            merge(train_cmd, "--hidden", cfg, "hidden", tr.hidden);
            merge(train_cmd, "--patience", cfg, "patience", tr.patience);
            merge(train_cmd, "--pretrain-epochs", cfg, "pretrain_epochs", tr.pretrain_epochs);
            merge(train_cmd, "--pretrain-lr", cfg, "pretrain_lr", tr.pretrain_lr);
            merge(train_cmd, "--out-dir", cfg, "out_dir", tr.out_dir);
            return cmd_train(tr);
        }
        if (eval_cmd->parsed()) {
            const json cfg = load_config_section(config_path, "eval");
            merge(eval_cmd, "--data", cfg, "data", ev.data);
            merge(eval_cmd, "--checkpoint", cfg, "checkpoints", ev.checkpoints);
            merge(eval_cmd, "--partitions", cfg, "partitions", ev.partitions);
            merge(eval_cmd, "--restarts", cfg, "restarts", ev.restarts);
            merge(eval_cmd, "--max-iters", cfg, "max_iters", ev.max_iters);
            merge(eval_cmd, "--search-seed", cfg, "search_seed", ev.search_seed);
            merge(eval_cmd, "--out-dir", cfg, "out_dir", ev.out_dir);
            return cmd_eval(ev);
        }
        if (bench_cmd->parsed()) {
            const json cfg = load_config_section(config_path, "bench");
            merge(bench_cmd, "--sizes", cfg, "sizes", bn.sizes);
            merge(bench_cmd, "--repeats", cfg, "repeats", bn.repeats);
            merge(bench_cmd, "--exact-repeats", cfg, "exact_repeats", bn.exact_repeats);
            merge(bench_cmd, "--seed", cfg, "seed", bn.seed);
            merge(bench_cmd, "--out-dir", cfg, "out_dir", bn.out_dir);
            return cmd_bench(bn);
        }
    } catch (const InvalidInputError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const SizeLimitError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    }
    return 2;
}
