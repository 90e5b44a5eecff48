#include <cmath>
#include <map>

#include <doctest.h>

#include "fairsched/learn.hpp"
#include "fairsched/matching.hpp"
#include "fairsched/owa.hpp"
#include "test_util.hpp"

using namespace fairsched;
using namespace fairsched::learn;

namespace {

/// A pool over the n-slot synthetic grid with sampled features and prefs.
datagen::Pool random_pool(int n, std::uint64_t seed, const std::string& attribute = "individual") {
    const SlotGrid grid = datagen::grid_for_pool_size(n);
    const datagen::CptSet cpts = datagen::CptSet::defaults(grid);
    datagen::GenConfig cfg;
    cfg.num_pools = 1;
    cfg.pool_size = n;
    cfg.seed = seed;
    cfg.partition_attribute = attribute;
    return datagen::generate_dataset(cfg, cpts, grid).pools.front();
}

datagen::Dataset random_dataset(int n, int pools, std::uint64_t seed,
                                const std::string& attribute = "individual") {
    const SlotGrid grid = datagen::grid_for_pool_size(n);
    const datagen::CptSet cpts = datagen::CptSet::defaults(grid);
    datagen::GenConfig cfg;
    cfg.num_pools = pools;
    cfg.pool_size = n;
    cfg.seed = seed;
    cfg.partition_attribute = attribute;
    return datagen::generate_dataset(cfg, cpts, grid);
}

/// Flat views over parameters for finite-difference sweeps.
std::vector<double*> parameter_slots(MlpModel& model) {
    std::vector<double*> slots;
    for (auto& w : model.weights)
        for (double& v : w.data) slots.push_back(&v);
    for (auto& b : model.biases)
        for (double& v : b) slots.push_back(&v);
    return slots;
}

std::vector<double> flatten(const ModelGrad& grad) {
    std::vector<double> out;
    for (const auto& w : grad.weights) out.insert(out.end(), w.data.begin(), w.data.end());
    for (const auto& b : grad.biases) out.insert(out.end(), b.begin(), b.end());
    return out;
}

} // namespace

TEST_CASE("prediction rows are row-stochastic and feature-determined") {
    const auto pool = random_pool(12, 3);
    MlpModel model = MlpModel::init(encoded_dim(), 64, 12, 5);
    const PreferenceMatrix pred = predict_pool(model, pool.features);
    for (int i = 0; i < 12; ++i) {
        double sum = 0.0;
        for (int j = 0; j < 12; ++j) sum += pred(i, j);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
    for (int i = 0; i < 12; ++i)
        for (int k = 0; k < 12; ++k)
            if (pool.features[static_cast<std::size_t>(i)] == pool.features[static_cast<std::size_t>(k)])
                for (int j = 0; j < 12; ++j) CHECK(pred(i, j) == pred(k, j));

    // Zeroing the output layer gives uniform rows.
    auto& last_w = model.weights.back();
    for (double& v : last_w.data) v = 0.0;
    for (double& v : model.biases.back()) v = 0.0;
    const PreferenceMatrix uniform = predict_pool(model, pool.features);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j) CHECK(uniform(i, j) == doctest::Approx(1.0 / 12.0));
}

TEST_CASE("two-stage loss vanishes at its own prediction") {
    auto pool = random_pool(6, 7);
    const MlpModel model = MlpModel::init(encoded_dim(), 8, 6, 11);
    pool.prefs = predict_pool(model, pool.features);
    const auto res = loss_two_stage(model, pool);
    CHECK(res.loss == doctest::Approx(0.0));
    for (double g : flatten(res.grad)) CHECK(g == 0.0);
}

TEST_CASE("halving residuals quarters the two-stage loss") {
    auto pool = random_pool(6, 13);
    const MlpModel model = MlpModel::init(encoded_dim(), 8, 6, 17);
    const double full = loss_two_stage(model, pool).loss;

    const PreferenceMatrix pred = predict_pool(model, pool.features);
    Matrix mid(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) mid(i, j) = 0.5 * (pred(i, j) + pool.prefs(i, j));
    auto half_pool = pool;
    half_pool.prefs = PreferenceMatrix(std::move(mid));
    CHECK(loss_two_stage(model, half_pool).loss == doctest::Approx(0.25 * full).epsilon(1e-9));
}

TEST_CASE("two-stage backprop matches finite differences") {
    // Raw network path on a tiny synthetic model (8 -> 4 -> 2 -> 3).
    MlpModel tiny = MlpModel::init(8, 4, 3, 23);
    Rng rng(29);
    Matrix x(3, 8);
    for (double& v : x.data) v = rng.next_double() * 2.0 - 1.0;
    Matrix target(3, 3);
    for (int i = 0; i < 3; ++i) {
        double sum = 0.0;
        for (int j = 0; j < 3; ++j) {
            target(i, j) = rng.next_double() + 0.1;
            sum += target(i, j);
        }
        for (int j = 0; j < 3; ++j) target(i, j) /= sum;
    }
    auto loss_of = [&](const MlpModel& m) {
        const Matrix p = forward_pool(m, x, nullptr);
        double loss = 0.0;
        for (std::size_t k = 0; k < p.data.size(); ++k) {
            const double r = p.data[k] - target.data[k];
            loss += r * r;
        }
        return loss;
    };
    ForwardCache cache;
    const Matrix probs = forward_pool(tiny, x, &cache);
    Matrix dprobs(3, 3);
    for (std::size_t k = 0; k < probs.data.size(); ++k)
        dprobs.data[k] = 2.0 * (probs.data[k] - target.data[k]);
    const auto analytic = flatten(backward_pool(tiny, cache, dprobs));

    const auto slots = parameter_slots(tiny);
    REQUIRE(slots.size() == analytic.size());
    const double step = 1e-5;
    for (std::size_t k = 0; k < slots.size(); ++k) {
        const double saved = *slots[k];
        *slots[k] = saved + step;
        const double hi = loss_of(tiny);
        *slots[k] = saved - step;
        const double lo = loss_of(tiny);
        *slots[k] = saved;
        const double fd = (hi - lo) / (2.0 * step);
        CHECK(analytic[k] == doctest::Approx(fd).epsilon(1e-3));
    }

    // Full loss path including the one-hot encoder, on a 3-defendant pool.
    // Central differences are only valid away from rectifier kinks, so pick
    // an initialization whose pre-activations all clear the step size.
    auto pool = random_pool(3, 31);
    MlpModel model = MlpModel::init(encoded_dim(), 4, 3, 37);
    for (std::uint64_t seed = 37;; ++seed) {
        model = MlpModel::init(encoded_dim(), 4, 3, seed);
        ForwardCache probe;
        forward_pool(model, encode_features(pool.features), &probe);
        double margin = 1e9;
        for (std::size_t l = 0; l + 1 < probe.pre.size(); ++l)
            for (double z : probe.pre[l].data) margin = std::min(margin, std::abs(z));
        if (margin > 2e-3) break;
    }
    const auto res = loss_two_stage(model, pool);
    const auto full_grad = flatten(res.grad);
    const auto full_slots = parameter_slots(model);
    for (std::size_t k = 0; k < full_slots.size(); ++k) {
        const double saved = *full_slots[k];
        *full_slots[k] = saved + step;
        const double hi = loss_two_stage(model, pool).loss;
        *full_slots[k] = saved - step;
        const double lo = loss_two_stage(model, pool).loss;
        *full_slots[k] = saved;
        const double fd = (hi - lo) / (2.0 * step);
        if (std::abs(fd) < 1e-10 && std::abs(full_grad[k]) < 1e-10) continue;
        CHECK(full_grad[k] == doctest::Approx(fd).epsilon(1e-3));
    }
}

TEST_CASE("total-utility decision loss values and zero chain") {
    auto pool = random_pool(4, 41);
    const MlpModel model = MlpModel::init(encoded_dim(), 8, 4, 43);
    TrainConfig cfg;
    cfg.lambda = 10.0;

    const PreferenceMatrix pred = predict_pool(model, pool.features);
    const Assignment schedule = matching::solve_assignment(pred.matrix());
    const auto res = loss_tu_dq(model, pool, cfg);
    CHECK(res.loss == doctest::Approx(-total_utility(schedule, pool.prefs)));

    // When the plug-in schedule is already optimal, the loss hits the optimum.
    Matrix aligned(4, 4, 0.1 / 3.0);
    for (int i = 0; i < 4; ++i) aligned(i, schedule.slot_of(i)) = 0.9;
    pool.prefs = PreferenceMatrix(std::move(aligned));
    const auto best = loss_tu_dq(model, pool, cfg);
    CHECK(best.loss == doctest::Approx(-testutil::brute_force_assignment_value(pool.prefs.matrix())));

    // Zero upstream collapses the whole chain.
    ForwardCache cache;
    forward_pool(model, encode_features(pool.features), &cache);
    const auto zero = flatten(backward_pool(model, cache, Matrix(4, 4, 0.0)));
    for (double g : zero) CHECK(g == 0.0);
}

TEST_CASE("blackbox gradient sign agrees with the interpolated loss") {
    // Finite differences of the lambda-interpolated loss on single parameters.
    const double lambda = 3.0;
    TrainConfig cfg;
    cfg.lambda = lambda;

    auto interpolated = [&](const MlpModel& m, const datagen::Pool& pool) {
        const Matrix pred = forward_pool(m, encode_features(pool.features), nullptr);
        const int n = pred.rows;
        Matrix upstream(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) upstream(i, j) = -pool.prefs(i, j);
        const Assignment plain = matching::solve_assignment(pred);
        Matrix shifted_profits = pred;
        for (std::size_t k = 0; k < pred.data.size(); ++k)
            shifted_profits.data[k] -= lambda * upstream.data[k];
        const Assignment shifted = matching::solve_assignment(shifted_profits);
        // L(Pi_lambda) + (1/lambda) * [<pred, Pi> - <pred, Pi_lambda>]
        double value = -total_utility(shifted, pool.prefs);
        for (int i = 0; i < n; ++i) {
            value += pred(i, plain.slot_of(i)) / lambda;
            value -= pred(i, shifted.slot_of(i)) / lambda;
        }
        return value;
    };

    int agree = 0, informative = 0;
    Rng prefs_rng(999);
    for (int trial = 0; trial < 100; ++trial) {
        auto pool = random_pool(2, 100 + static_cast<std::uint64_t>(trial));
        // Generator rows on two slots are often structurally tied (both
        // defendants prefer the same slot), which zeroes the gradient; draw
        // the truth uniformly instead so most trials carry signal.
        pool.prefs = testutil::random_row_stochastic(2, prefs_rng);
        MlpModel model = MlpModel::init(encoded_dim(), 4, 2, 200 + static_cast<std::uint64_t>(trial));
        const auto res = loss_tu_dq(model, pool, cfg);
        const auto grad = flatten(res.grad);
        auto slots = parameter_slots(model);

        // Probe the strongest coordinate; most are structurally zero (inactive
        // one-hot inputs, dead rectifier units, or an unflipped solve).
        std::size_t k = 0;
        for (std::size_t i = 1; i < grad.size(); ++i)
            if (std::abs(grad[i]) > std::abs(grad[k])) k = i;
        const bool has_signal = std::abs(grad[k]) >= 1e-9;
        if (has_signal) ++informative;
        const double step = 1e-5;
        const double saved = *slots[k];
        *slots[k] = saved + step;
        const double hi = interpolated(model, pool);
        *slots[k] = saved - step;
        const double lo = interpolated(model, pool);
        *slots[k] = saved;
        const double fd = (hi - lo) / (2.0 * step);
        if (fd * grad[k] > 0.0 || (std::abs(fd) < 1e-9 && !has_signal)) ++agree;
    }
    REQUIRE(informative >= 30);
    CHECK(agree >= 90);
}

TEST_CASE("fair decision loss reduces cleanly under singleton groups") {
    auto pool = random_pool(5, 47);
    const MlpModel model = MlpModel::init(encoded_dim(), 8, 5, 53);
    TrainConfig cfg;
    cfg.lambda = 7.0;

    const PreferenceMatrix pred = predict_pool(model, pool.features);
    const Assignment schedule = matching::solve_assignment(pred.matrix());
    const auto weights = owa::gini_weights(5);
    const auto res = loss_owa_dq(model, pool, cfg);
    CHECK(res.loss == doctest::Approx(-owa::owa_value(weights, utility_vector(schedule, pool.prefs))));

    // Reproduce the chain by hand: upstream (i,j) = -g[i] * Y[i][j].
    const auto g = owa::owa_subgradient(weights, utility_vector(schedule, pool.prefs));
    Matrix upstream(5, 5);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) upstream(i, j) = -g[static_cast<std::size_t>(i)] * pool.prefs(i, j);
    ForwardCache cache;
    const Matrix probs = forward_pool(model, encode_features(pool.features), &cache);
    const Matrix dprobs = matching::matching_backward(probs, schedule, upstream, {cfg.lambda});
    const auto manual = flatten(backward_pool(model, cache, dprobs));
    const auto from_loss = flatten(res.grad);
    REQUIRE(manual.size() == from_loss.size());
    for (std::size_t k = 0; k < manual.size(); ++k)
        CHECK(from_loss[k] == doctest::Approx(manual[k]).epsilon(1e-12));

    // Near-uniform aggregation of individual utilities equals total/n.
    CHECK(owa::owa_value(testutil::near_uniform_weights(5), utility_vector(schedule, pool.prefs)) ==
          doctest::Approx(total_utility(schedule, pool.prefs) / 5.0).epsilon(1e-6));
}

TEST_CASE("moreau-smoothed fair loss stays finite and differs only in the chain") {
    auto pool = random_pool(5, 59, "employment");
    const MlpModel model = MlpModel::init(encoded_dim(), 8, 5, 61);
    TrainConfig cfg;
    cfg.lambda = 7.0;
    cfg.beta = 0.01;
    const auto smooth = loss_owa_dq(model, pool, cfg);
    cfg.beta = 0.0;
    const auto exact = loss_owa_dq(model, pool, cfg);
    CHECK(smooth.loss == doctest::Approx(exact.loss)); // value identical, only gradients differ
    CHECK(smooth.grad.all_finite());
}

TEST_CASE("adam updates") {
    MlpModel model = MlpModel::init(4, 4, 2, 67);
    const MlpModel before = model;
    AdamState state = AdamState::zeros_like(model);

    adam_step(model, ModelGrad::zeros_like(model), state, 0.01);
    for (std::size_t l = 0; l < model.weights.size(); ++l)
        for (std::size_t k = 0; k < model.weights[l].data.size(); ++k)
            CHECK(model.weights[l].data[k] == before.weights[l].data[k]);

    // Constant gradient: bias corrections cancel and steps approach lr * sign(g).
    ModelGrad constant = ModelGrad::zeros_like(model);
    for (auto& w : constant.weights)
        for (double& v : w.data) v = 2.5;
    MlpModel walker = before;
    AdamState wstate = AdamState::zeros_like(walker);
    for (int t = 0; t < 5; ++t) {
        const double prev = walker.weights[0].data[0];
        adam_step(walker, constant, wstate, 0.01);
        CHECK(std::abs(walker.weights[0].data[0] - prev) == doctest::Approx(0.01).epsilon(1e-6));
    }
}

TEST_CASE("training is deterministic and a no-op at zero epochs") {
    const auto ds = random_dataset(4, 8, 71);
    TrainConfig cfg;
    cfg.loss_kind = LossKind::TwoStage;
    cfg.epochs = 0;
    cfg.seed = 9;
    cfg.first_hidden = 8;
    const auto res = train(ds, cfg);
    const MlpModel fresh = MlpModel::init(encoded_dim(), 8, 4, 9);
    for (std::size_t l = 0; l < fresh.weights.size(); ++l)
        CHECK(res.model.weights[l].data == fresh.weights[l].data);
    CHECK(res.history.epochs_run == 0);

    cfg.epochs = 6;
    cfg.batch_size = 3;
    const auto a = train(ds, cfg);
    const auto b = train(ds, cfg);
    CHECK(a.history.train_loss == b.history.train_loss);
    for (std::size_t l = 0; l < a.model.weights.size(); ++l)
        CHECK(a.model.weights[l].data == b.model.weights[l].data);
}

TEST_CASE("two-stage training converges to the conditional-mean floor") {
    const auto ds = random_dataset(12, 250, 73);

    // Independent oracle: the squared-residual optimum predicts the mean true
    // row per feature profile; its loss is the irreducible preference noise.
    std::map<std::array<int, 8>, std::pair<std::vector<double>, long>> per_profile;
    for (const auto& pool : ds.pools)
        for (std::size_t i = 0; i < pool.features.size(); ++i) {
            auto& [sum, count] = per_profile[feature_codes(pool.features[i])];
            if (sum.empty()) sum.assign(12, 0.0);
            for (int j = 0; j < 12; ++j) sum[j] += pool.prefs(static_cast<int>(i), j);
            ++count;
        }
    double floor = 0.0;
    for (const auto& pool : ds.pools)
        for (std::size_t i = 0; i < pool.features.size(); ++i) {
            const auto& [sum, count] = per_profile.at(feature_codes(pool.features[i]));
            for (int j = 0; j < 12; ++j) {
                const double r = pool.prefs(static_cast<int>(i), j) - sum[j] / static_cast<double>(count);
                floor += r * r;
            }
        }
    floor /= static_cast<double>(ds.pools.size());

    TrainConfig cfg;
    cfg.loss_kind = LossKind::TwoStage;
    cfg.epochs = 300;
    cfg.batch_size = 64;
    cfg.seed = 4;
    const auto res = train(ds, cfg);
    // The preference noise is irreducible, so a fixed 50% drop is not
    // attainable here; converging onto the oracle floor is the real check.
    CHECK(res.history.train_loss.back() <= 1.05 * floor);
    CHECK(res.history.train_loss.back() <= 0.75 * res.history.train_loss.front());
    CHECK(res.history.train_loss.back() >= 0.95 * floor); // no leakage below the floor
}

TEST_CASE("fair decision training improves its proxy loss on most seeds") {
    const auto ds = random_dataset(4, 20, 79);
    int improved = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        TrainConfig cfg;
        cfg.loss_kind = LossKind::OwaDq;
        cfg.epochs = 50;
        cfg.batch_size = 64;
        cfg.seed = seed;
        cfg.first_hidden = 16;
        const auto res = train(ds, cfg);
        if (res.history.train_loss.back() < res.history.train_loss.front()) ++improved;
    }
    CHECK(improved >= 4);
}

TEST_CASE("early stopping on a validation plateau") {
    const auto ds = random_dataset(4, 16, 83);
    const auto val = random_dataset(4, 8, 89);
    TrainConfig cfg;
    cfg.loss_kind = LossKind::TwoStage;
    cfg.epochs = 300;
    cfg.batch_size = 8;
    cfg.seed = 2;
    cfg.first_hidden = 8;
    cfg.patience = 10;
    const auto res = train(ds, cfg, &val);
    CHECK(res.history.epochs_run < 300);
    CHECK(res.history.val_proxy_regret.size() == static_cast<std::size_t>(res.history.epochs_run));
}

TEST_CASE("checkpoint round trip") {
    const MlpModel model = MlpModel::init(encoded_dim(), 16, 6, 97);
    TrainConfig cfg;
    cfg.loss_kind = LossKind::OwaDq;
    cfg.lambda = 12.5;
    cfg.partition_attribute = "employment";
    const auto path = std::filesystem::temp_directory_path() / "fairsched_ckpt.json";
    write_checkpoint(model, cfg, "sha256:dummy", path);

    TrainConfig loaded_cfg;
    const MlpModel loaded = read_checkpoint(path, &loaded_cfg);
    CHECK(loaded.layer_dims == model.layer_dims);
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        CHECK(loaded.weights[l].data == model.weights[l].data);
        CHECK(loaded.biases[l] == model.biases[l]);
    }
    CHECK(loaded_cfg.loss_kind == LossKind::OwaDq);
    CHECK(loaded_cfg.lambda == 12.5);
    CHECK(loaded_cfg.partition_attribute == "employment");
}
