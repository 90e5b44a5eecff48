#include "fairsched/learn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "fairsched/matching.hpp"
#include "fairsched/owa.hpp"
#include "fairsched/rng.hpp"

namespace fairsched::learn {

using nlohmann::json;

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::TwoStage: return "two_stage";
        case LossKind::TuDq: return "tu_dq";
        case LossKind::OwaDq: return "owa_dq";
    }
    throw InvalidInputError("unknown loss kind");
}

LossKind loss_kind_from_string(const std::string& name) {
    if (name == "two_stage") return LossKind::TwoStage;
    if (name == "tu_dq") return LossKind::TuDq;
    if (name == "owa_dq") return LossKind::OwaDq;
    throw InvalidInputError("unknown loss kind: " + name);
}

int encoded_dim() {
    int d = 0;
    for (int c : kFeatureCardinalities) d += c;
    return d;
}

Matrix encode_features(const std::vector<DefendantFeatures>& features) {
    const int n = static_cast<int>(features.size());
    const int d = encoded_dim();
    Matrix x(n, d, 0.0);
    for (int i = 0; i < n; ++i) {
        const auto codes = feature_codes(features[static_cast<std::size_t>(i)]);
        int offset = 0;
        for (int k = 0; k < 8; ++k) {
            x(i, offset + codes[static_cast<std::size_t>(k)]) = 1.0;
            offset += kFeatureCardinalities[static_cast<std::size_t>(k)];
        }
    }
    return x;
}

MlpModel MlpModel::init(int input_dim, int first_hidden, int output_dim, std::uint64_t seed) {
    if (input_dim < 1 || output_dim < 1) throw InvalidInputError("MlpModel: bad dimensions");
    if (first_hidden < 2) throw InvalidInputError("MlpModel: first hidden layer needs width >= 2");
    MlpModel m;
    m.layer_dims = {input_dim, first_hidden, first_hidden / 2, output_dim};
    const int num_layers = static_cast<int>(m.layer_dims.size()) - 1;
    for (int l = 0; l < num_layers; ++l) {
        const int fan_in = m.layer_dims[static_cast<std::size_t>(l)];
        const int fan_out = m.layer_dims[static_cast<std::size_t>(l) + 1];
        Rng rng = Rng::substream(seed, 0x11000 + static_cast<std::uint64_t>(l));
        // He-uniform for rectifier layers, Glorot-uniform for the softmax layer.
        const double bound = (l + 1 < num_layers)
                                 ? std::sqrt(6.0 / fan_in)
                                 : std::sqrt(6.0 / (fan_in + fan_out));
        Matrix w(fan_out, fan_in);
        for (double& v : w.data) v = (2.0 * rng.next_double() - 1.0) * bound;
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(static_cast<std::size_t>(fan_out), 0.0);
    }
    return m;
}

std::size_t MlpModel::num_parameters() const {
    std::size_t total = 0;
    for (const auto& w : weights) total += w.data.size();
    for (const auto& b : biases) total += b.size();
    return total;
}

ModelGrad ModelGrad::zeros_like(const MlpModel& model) {
    ModelGrad g;
    for (const auto& w : model.weights) g.weights.emplace_back(w.rows, w.cols, 0.0);
    for (const auto& b : model.biases) g.biases.emplace_back(b.size(), 0.0);
    return g;
}

void ModelGrad::accumulate(const ModelGrad& other, double scale) {
    for (std::size_t l = 0; l < weights.size(); ++l)
        for (std::size_t k = 0; k < weights[l].data.size(); ++k)
            weights[l].data[k] += scale * other.weights[l].data[k];
    for (std::size_t l = 0; l < biases.size(); ++l)
        for (std::size_t k = 0; k < biases[l].size(); ++k)
            biases[l][k] += scale * other.biases[l][k];
}

void ModelGrad::scale(double factor) {
    for (auto& w : weights)
        for (double& v : w.data) v *= factor;
    for (auto& b : biases)
        for (double& v : b) v *= factor;
}

bool ModelGrad::all_finite() const {
    for (const auto& w : weights)
        if (!w.all_finite()) return false;
    for (const auto& b : biases)
        for (double v : b)
            if (!std::isfinite(v)) return false;
    return true;
}

Matrix forward_pool(const MlpModel& model, const Matrix& encoded, ForwardCache* cache) {
    if (encoded.cols != model.input_dim())
        throw InvalidInputError("forward_pool: feature dimension does not match model input");
    const int n = encoded.rows;
    const int num_layers = model.num_layers();
    if (cache) {
        cache->input = encoded;
        cache->pre.clear();
        cache->post.clear();
    }

    Matrix act = encoded;
    for (int l = 0; l < num_layers; ++l) {
        const Matrix& w = model.weights[static_cast<std::size_t>(l)];
        const auto& b = model.biases[static_cast<std::size_t>(l)];
        Matrix z(n, w.rows);
        for (int i = 0; i < n; ++i) {
            for (int o = 0; o < w.rows; ++o) {
                double sum = b[static_cast<std::size_t>(o)];
                for (int k = 0; k < w.cols; ++k) sum += w(o, k) * act(i, k);
                z(i, o) = sum;
            }
        }
        if (cache) cache->pre.push_back(z);
        if (l + 1 < num_layers) {
            for (double& v : z.data) v = std::max(v, 0.0);
        } else {
            // Stable row softmax.
            for (int i = 0; i < n; ++i) {
                double mx = -std::numeric_limits<double>::infinity();
                for (int o = 0; o < z.cols; ++o) mx = std::max(mx, z(i, o));
                double denom = 0.0;
                for (int o = 0; o < z.cols; ++o) denom += std::exp(z(i, o) - mx);
                for (int o = 0; o < z.cols; ++o) z(i, o) = std::exp(z(i, o) - mx) / denom;
            }
        }
        if (cache) cache->post.push_back(z);
        act = std::move(z);
    }
    return act;
}

ModelGrad backward_pool(const MlpModel& model, const ForwardCache& cache, const Matrix& dprobs) {
    const int num_layers = model.num_layers();
    const int n = cache.input.rows;
    const Matrix& probs = cache.post.back();
    if (dprobs.rows != n || dprobs.cols != model.output_dim())
        throw InvalidInputError("backward_pool: upstream gradient shape mismatch");

    ModelGrad grad = ModelGrad::zeros_like(model);

    // Softmax Jacobian: dz = p .* (dy - <dy, p>), row-wise.
    Matrix dz(n, model.output_dim());
    for (int i = 0; i < n; ++i) {
        double dot = 0.0;
        for (int o = 0; o < dprobs.cols; ++o) dot += dprobs(i, o) * probs(i, o);
        for (int o = 0; o < dprobs.cols; ++o) dz(i, o) = probs(i, o) * (dprobs(i, o) - dot);
    }

    for (int l = num_layers - 1; l >= 0; --l) {
        const Matrix& w = model.weights[static_cast<std::size_t>(l)];
        const Matrix& a_prev = (l == 0) ? cache.input : cache.post[static_cast<std::size_t>(l) - 1];
        Matrix& dw = grad.weights[static_cast<std::size_t>(l)];
        auto& db = grad.biases[static_cast<std::size_t>(l)];
        for (int i = 0; i < n; ++i) {
            for (int o = 0; o < w.rows; ++o) {
                const double d = dz(i, o);
                if (d == 0.0) continue;
                db[static_cast<std::size_t>(o)] += d;
                for (int k = 0; k < w.cols; ++k) dw(o, k) += d * a_prev(i, k);
            }
        }
        if (l == 0) break;
        const Matrix& z_prev = cache.pre[static_cast<std::size_t>(l) - 1];
        Matrix dz_prev(n, w.cols);
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < w.cols; ++k) {
                double sum = 0.0;
                for (int o = 0; o < w.rows; ++o) sum += w(o, k) * dz(i, o);
                dz_prev(i, k) = (z_prev(i, k) > 0.0) ? sum : 0.0;
            }
        }
        dz = std::move(dz_prev);
    }
    return grad;
}

PreferenceMatrix predict_pool(const MlpModel& model, const std::vector<DefendantFeatures>& features) {
    if (static_cast<int>(features.size()) != model.output_dim())
        throw InvalidInputError("predict_pool: pool size must match model output dimension");
    return PreferenceMatrix(forward_pool(model, encode_features(features), nullptr));
}

LossResult loss_two_stage(const MlpModel& model, const datagen::Pool& pool) {
    ForwardCache cache;
    const Matrix probs = forward_pool(model, encode_features(pool.features), &cache);
    const int n = probs.rows;
    double loss = 0.0;
    Matrix dprobs(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double r = probs(i, j) - pool.prefs(i, j);
            loss += r * r;
            dprobs(i, j) = 2.0 * r;
        }
    }
    return {loss, backward_pool(model, cache, dprobs)};
}

namespace {

LossResult decision_loss(const MlpModel& model, const datagen::Pool& pool, const TrainConfig& cfg,
                         bool owa_aggregated) {
    ForwardCache cache;
    const Matrix probs = forward_pool(model, encode_features(pool.features), &cache);
    const int n = probs.rows;
    const Assignment schedule = matching::solve_assignment(probs);

    double loss;
    Matrix upstream(n, n, 0.0); // d(loss)/d(Pi)
    if (owa_aggregated) {
        const GroupPartition partition = GroupPartition::from_labels(pool.groups);
        const owa::OwaWeights weights = owa::gini_weights(partition.num_groups());
        const std::vector<double> util = group_utilities(schedule, pool.prefs, partition);
        loss = -owa::owa_value(weights, util);
        const std::vector<double> g =
            (cfg.beta > 0.0) ? owa::moreau_gradient(weights, util, {cfg.beta})
                             : owa::owa_subgradient(weights, util);
        for (int i = 0; i < n; ++i) {
            const int gi = partition.group_of(i);
            const double scale = -g[static_cast<std::size_t>(gi)] /
                                 static_cast<double>(partition.members(gi).size());
            for (int j = 0; j < n; ++j) upstream(i, j) = scale * pool.prefs(i, j);
        }
    } else {
        loss = -total_utility(schedule, pool.prefs);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) upstream(i, j) = -pool.prefs(i, j);
    }

    const Matrix dprobs = matching::matching_backward(probs, schedule, upstream, {cfg.lambda});
    return {loss, backward_pool(model, cache, dprobs)};
}

} // namespace

LossResult loss_tu_dq(const MlpModel& model, const datagen::Pool& pool, const TrainConfig& cfg) {
    if (!(cfg.lambda > 0.0)) throw InvalidInputError("loss_tu_dq: lambda must be positive");
    return decision_loss(model, pool, cfg, /*owa_aggregated=*/false);
}

LossResult loss_owa_dq(const MlpModel& model, const datagen::Pool& pool, const TrainConfig& cfg) {
    if (!(cfg.lambda > 0.0)) throw InvalidInputError("loss_owa_dq: lambda must be positive");
    return decision_loss(model, pool, cfg, /*owa_aggregated=*/true);
}

AdamState AdamState::zeros_like(const MlpModel& model) {
    return {ModelGrad::zeros_like(model), ModelGrad::zeros_like(model), 0};
}

namespace {

void adam_update_span(std::span<double> param, std::span<const double> grad, std::span<double> m,
                      std::span<double> v, double lr, double beta1, double beta2, double eps,
                      double bias1, double bias2) {
    for (std::size_t k = 0; k < param.size(); ++k) {
        m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
        v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
        const double m_hat = m[k] / bias1;
        const double v_hat = v[k] / bias2;
        param[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

} // namespace

void adam_step(MlpModel& model, const ModelGrad& grad, AdamState& state, double learning_rate,
               double beta1, double beta2, double epsilon) {
    if (grad.weights.size() != model.weights.size() || grad.biases.size() != model.biases.size())
        throw InvalidInputError("adam_step: gradient shape mismatch");
    state.step += 1;
    const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        if (grad.weights[l].rows != model.weights[l].rows ||
            grad.weights[l].cols != model.weights[l].cols)
            throw InvalidInputError("adam_step: gradient shape mismatch");
        adam_update_span(model.weights[l].data, grad.weights[l].data,
                         state.first_moment.weights[l].data, state.second_moment.weights[l].data,
                         learning_rate, beta1, beta2, epsilon, bias1, bias2);
        adam_update_span(model.biases[l], grad.biases[l], state.first_moment.biases[l],
                         state.second_moment.biases[l], learning_rate, beta1, beta2, epsilon, bias1,
                         bias2);
    }
}

namespace {

LossResult pool_loss(const MlpModel& model, const datagen::Pool& pool, const TrainConfig& cfg) {
    switch (cfg.loss_kind) {
        case LossKind::TwoStage: return loss_two_stage(model, pool);
        case LossKind::TuDq: return loss_tu_dq(model, pool, cfg);
        case LossKind::OwaDq: return loss_owa_dq(model, pool, cfg);
    }
    throw InvalidInputError("unknown loss kind");
}

/// Negated mean achieved fair value on a validation set, through the
/// matching layer; differs from true regret by a constant reference term.
double validation_proxy_regret(const MlpModel& model, const datagen::Dataset& val) {
    double sum = 0.0;
    for (const auto& pool : val.pools) {
        const PreferenceMatrix pred = predict_pool(model, pool.features);
        const Assignment schedule = matching::solve_assignment(pred.matrix());
        const GroupPartition partition = GroupPartition::from_labels(pool.groups);
        const owa::OwaWeights weights = owa::gini_weights(partition.num_groups());
        sum += owa::owa_value(weights, group_utilities(schedule, pool.prefs, partition));
    }
    return -sum / static_cast<double>(val.pools.size());
}

} // namespace

namespace {

/// One pass over all pools in seeded shuffled order, updating the model per
/// batch; returns the mean pool loss seen during the pass.
double run_epoch(MlpModel& model, AdamState& adam, const datagen::Dataset& data,
                 const TrainConfig& cfg, std::vector<int>& order, std::uint64_t shuffle_stream,
                 double learning_rate, int epoch_for_diagnostics) {
    Rng shuffle_rng = Rng::substream(cfg.seed, shuffle_stream);
    shuffle_rng.shuffle(order);

    const int num_pools = static_cast<int>(order.size());
    double epoch_loss = 0.0;
    for (int start = 0; start < num_pools; start += cfg.batch_size) {
        const int end = std::min(start + cfg.batch_size, num_pools);
        ModelGrad batch_grad = ModelGrad::zeros_like(model);
        for (int k = start; k < end; ++k) {
            const auto& pool = data.pools[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
            LossResult res = pool_loss(model, pool, cfg);
            if (!std::isfinite(res.loss) || !res.grad.all_finite())
                throw NumericError("train: non-finite loss at epoch " +
                                   std::to_string(epoch_for_diagnostics) + ", pool " +
                                   std::to_string(order[static_cast<std::size_t>(k)]));
            epoch_loss += res.loss;
            batch_grad.accumulate(res.grad);
        }
        batch_grad.scale(1.0 / static_cast<double>(end - start));
        adam_step(model, batch_grad, adam, learning_rate);
    }
    return epoch_loss / static_cast<double>(num_pools);
}

} // namespace

TrainResult train(const datagen::Dataset& dataset, const TrainConfig& cfg,
                  const datagen::Dataset* validation) {
    if (dataset.pools.empty()) throw InvalidInputError("train: dataset is empty");
    if (cfg.batch_size < 1 || cfg.epochs < 0 || cfg.pretrain_epochs < 0 ||
        !(cfg.learning_rate > 0.0) || !(cfg.pretrain_learning_rate > 0.0))
        throw InvalidInputError("train: bad batch size, epoch count, or learning rate");

    const datagen::Dataset working = datagen::with_partition(dataset, cfg.partition_attribute);
    const datagen::Dataset* val = nullptr;
    datagen::Dataset val_working;
    if (validation) {
        val_working = datagen::with_partition(*validation, cfg.partition_attribute);
        val = &val_working;
    }

    const int n = working.meta.pool_size;
    MlpModel model = MlpModel::init(encoded_dim(), cfg.first_hidden, n, cfg.seed);
    TrainHistory history;

    const int num_pools = static_cast<int>(working.pools.size());
    std::vector<int> order(static_cast<std::size_t>(num_pools));
    std::iota(order.begin(), order.end(), 0);

    // Squared-error warm start for the decision losses. Their gradients are
    // support differences between matched schedules, which from a random
    // initialization settle well below the policy optimum; starting from the
    // prediction solution and fine-tuning is what makes them competitive.
    if (cfg.epochs > 0 && cfg.loss_kind != LossKind::TwoStage && cfg.pretrain_epochs > 0) {
        TrainConfig warm = cfg;
        warm.loss_kind = LossKind::TwoStage;
        AdamState warm_adam = AdamState::zeros_like(model);
        for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch)
            run_epoch(model, warm_adam, working, warm, order,
                      0x60000 + static_cast<std::uint64_t>(epoch), cfg.pretrain_learning_rate,
                      epoch);
    }

    AdamState adam = AdamState::zeros_like(model);
    MlpModel best_model = model;
    double best_val = std::numeric_limits<double>::infinity();
    int epochs_since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        history.train_loss.push_back(run_epoch(model, adam, working, cfg, order,
                                               0x50000 + static_cast<std::uint64_t>(epoch),
                                               cfg.learning_rate, epoch));

        double val_metric = std::numeric_limits<double>::quiet_NaN();
        if (val) val_metric = validation_proxy_regret(model, *val);
        history.val_proxy_regret.push_back(val_metric);

        const auto t1 = std::chrono::steady_clock::now();
        history.wall_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
        history.epochs_run = epoch + 1;

        if (val) {
            if (val_metric < best_val - 1e-12) {
                best_val = val_metric;
                best_model = model;
                epochs_since_best = 0;
            } else if (++epochs_since_best >= cfg.patience) {
                break;
            }
        }
    }

    if (val && cfg.epochs > 0) return {std::move(best_model), std::move(history)};
    return {std::move(model), std::move(history)};
}

void write_checkpoint(const MlpModel& model, const TrainConfig& cfg,
                      const std::string& dataset_hash, const std::filesystem::path& path) {
    json j;
    j["kind"] = "fairsched.checkpoint";
    j["version"] = 1;
    j["layer_dims"] = model.layer_dims;
    auto& weights = j["weights"] = json::array();
    for (const auto& w : model.weights) weights.push_back(w.data);
    j["biases"] = model.biases;
    auto& enc = j["encoding"] = json::array();
    for (int k = 0; k < 8; ++k)
        enc.push_back({{"name", kFeatureNames[static_cast<std::size_t>(k)]},
                       {"cardinality", kFeatureCardinalities[static_cast<std::size_t>(k)]}});
    j["config"] = {{"loss", to_string(cfg.loss_kind)},
                   {"learning_rate", cfg.learning_rate},
                   {"batch_size", cfg.batch_size},
                   {"epochs", cfg.epochs},
                   {"seed", cfg.seed},
                   {"lambda", cfg.lambda},
                   {"beta", cfg.beta},
                   {"partition_attribute", cfg.partition_attribute},
                   {"first_hidden", cfg.first_hidden},
                   {"pretrain_epochs", cfg.pretrain_epochs},
                   {"pretrain_learning_rate", cfg.pretrain_learning_rate}};
    j["inputs"] = {{"dataset_sha256", dataset_hash}};

    std::ofstream out(path);
    if (!out) throw DataError("write_checkpoint: cannot open " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw DataError("write_checkpoint: write failed for " + path.string());
}

MlpModel read_checkpoint(const std::filesystem::path& path, TrainConfig* cfg_out) {
    std::ifstream in(path);
    if (!in) throw DataError("read_checkpoint: cannot open " + path.string());
    json j;
    try {
        in >> j;
        if (j.value("kind", "") != "fairsched.checkpoint")
            throw DataError("read_checkpoint: not a checkpoint file: " + path.string());
        MlpModel model;
        model.layer_dims = j.at("layer_dims").get<std::vector<int>>();
        const auto& weights = j.at("weights");
        for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
            Matrix w(model.layer_dims[l + 1], model.layer_dims[l]);
            w.data = weights.at(l).get<std::vector<double>>();
            if (w.data.size() != static_cast<std::size_t>(w.rows) * static_cast<std::size_t>(w.cols))
                throw DataError("read_checkpoint: weight size mismatch in " + path.string());
            model.weights.push_back(std::move(w));
        }
        model.biases = j.at("biases").get<std::vector<std::vector<double>>>();
        if (model.biases.size() != model.weights.size())
            throw DataError("read_checkpoint: bias count mismatch in " + path.string());
        if (cfg_out) {
            const auto& c = j.at("config");
            cfg_out->loss_kind = loss_kind_from_string(c.at("loss").get<std::string>());
            cfg_out->learning_rate = c.at("learning_rate").get<double>();
            cfg_out->batch_size = c.at("batch_size").get<int>();
            cfg_out->epochs = c.at("epochs").get<int>();
            cfg_out->seed = c.at("seed").get<std::uint64_t>();
            cfg_out->lambda = c.at("lambda").get<double>();
            cfg_out->beta = c.at("beta").get<double>();
            cfg_out->partition_attribute = c.at("partition_attribute").get<std::string>();
            cfg_out->first_hidden = c.at("first_hidden").get<int>();
            cfg_out->pretrain_epochs = c.value("pretrain_epochs", 0);
            cfg_out->pretrain_learning_rate = c.value("pretrain_learning_rate", 0.01);
        }
        return model;
    } catch (const json::exception& e) {
        throw DataError("read_checkpoint: " + path.string() + ": " + e.what());
    }
}

} // namespace fairsched::learn
