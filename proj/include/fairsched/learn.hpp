#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fairsched/core.hpp"
#include "fairsched/datagen.hpp"

namespace fairsched::learn {

enum class LossKind { TwoStage, TuDq, OwaDq };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

/// Feedforward preference predictor applied row-wise per defendant:
/// input_dim -> h -> h/2 -> n with rectifier hidden units and a softmax
/// output row, so predictions are row-stochastic by construction.
struct MlpModel {
    std::vector<int> layer_dims;               // {d, h, h/2, n}
    std::vector<Matrix> weights;               // per layer, out x in
    std::vector<std::vector<double>> biases;   // per layer

    static MlpModel init(int input_dim, int first_hidden, int output_dim, std::uint64_t seed);

    int num_layers() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
    std::size_t num_parameters() const;
};

/// Gradient (or moment) container shaped like a model's parameters.
struct ModelGrad {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    static ModelGrad zeros_like(const MlpModel& model);
    void accumulate(const ModelGrad& other, double scale = 1.0);
    void scale(double factor);
    bool all_finite() const;
};

/// One-hot encoding of the eight categorical features, concatenated (d = 19).
Matrix encode_features(const std::vector<DefendantFeatures>& features);
int encoded_dim();

/// Activations retained by the forward pass for backpropagation.
struct ForwardCache {
    Matrix input;
    std::vector<Matrix> pre;   // pre-activations per layer
    std::vector<Matrix> post;  // post-activations; back() is the softmax output
};

/// Row-wise forward pass on encoded features; returns softmax probabilities.
Matrix forward_pool(const MlpModel& model, const Matrix& encoded, ForwardCache* cache = nullptr);

/// Backpropagate d(loss)/d(probs) through softmax and the hidden layers.
ModelGrad backward_pool(const MlpModel& model, const ForwardCache& cache, const Matrix& dprobs);

PreferenceMatrix predict_pool(const MlpModel& model, const std::vector<DefendantFeatures>& features);

struct TrainConfig {
    LossKind loss_kind = LossKind::TwoStage;
    double learning_rate = 0.01;
    int batch_size = 64;           // pools per update
    int epochs = 300;
    std::uint64_t seed = 0;
    /// Blackbox interpolation step. The fair objective is only piecewise
    /// linear, so the perturbation must stay on the scale of the
    /// (row-stochastic) profit margins; large values chase targets outside
    /// the validity region of the aggregation subgradient.
    double lambda = 0.5;
    double beta = 0.0;             // > 0 switches the OWA loss to the Moreau gradient rule
    std::string partition_attribute = "individual";
    int first_hidden = 64;
    int patience = 30;             // early-stop patience (validation runs only)
    /// Squared-error warm-start epochs before decision-loss training.
    /// Decision gradients are support differences of matched schedules;
    /// from a random initialization they equilibrate far below the policy
    /// optimum, while fine-tuning from the prediction solution works.
    int pretrain_epochs = 50;
    double pretrain_learning_rate = 0.01;
};

struct LossResult {
    double loss = 0.0;
    ModelGrad grad;
};

/// Squared-residual prediction loss ||Yhat - Y||_F^2 on the softmax outputs.
LossResult loss_two_stage(const MlpModel& model, const datagen::Pool& pool);

/// Decision loss -Tr(Y^T Pi(Yhat)): total utility of the matched schedule
/// under true preferences, differentiated through the matching layer.
LossResult loss_tu_dq(const MlpModel& model, const datagen::Pool& pool, const TrainConfig& cfg);

/// Decision loss -OWA_w(group utilities of Pi(Yhat) under Y) with Gini
/// weights over the pool's groups; the fair-aggregation (sub)gradient feeds
/// the matching layer's blackbox backward pass.
LossResult loss_owa_dq(const MlpModel& model, const datagen::Pool& pool, const TrainConfig& cfg);

struct AdamState {
    ModelGrad first_moment;
    ModelGrad second_moment;
    long step = 0;

    static AdamState zeros_like(const MlpModel& model);
};

/// Bias-corrected Adam update, in place.
void adam_step(MlpModel& model, const ModelGrad& grad, AdamState& state, double learning_rate,
               double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_proxy_regret;  // nan entries when no validation set
    std::vector<double> wall_seconds;
    int epochs_run = 0;
};

struct TrainResult {
    MlpModel model;
    TrainHistory history;
};

/// Mini-batch training: per-epoch seeded shuffle, per-pool gradients averaged
/// over each batch, Adam updates at batch boundaries. Decision losses first
/// run cfg.pretrain_epochs of squared-error warm-up (fresh optimizer state
/// after). When a validation set is supplied, the per-epoch proxy regret
/// (negated mean achieved fair value through the matching layer; the
/// reference term is a constant) drives a plateau early stop with
/// cfg.patience, and the best-validation parameters are returned. Aborts
/// with NumericError on NaN loss.
TrainResult train(const datagen::Dataset& dataset, const TrainConfig& cfg,
                  const datagen::Dataset* validation = nullptr);

/// Checkpoint round trip (JSON: dims, row-major weights, encoding, config).
void write_checkpoint(const MlpModel& model, const TrainConfig& cfg,
                      const std::string& dataset_hash, const std::filesystem::path& path);
MlpModel read_checkpoint(const std::filesystem::path& path, TrainConfig* cfg_out = nullptr);

} // namespace fairsched::learn
