#include "fairsched/owa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fairsched::owa {

OwaWeights::OwaWeights(std::vector<double> w) : w_(std::move(w)) {
    if (w_.empty()) throw InvalidInputError("OwaWeights: empty weight vector");
    double sum = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) {
        if (!(w_[i] > 0.0)) throw InvalidInputError("OwaWeights: weights must be positive");
        if (i > 0 && !(w_[i - 1] > w_[i]))
            throw InvalidInputError("OwaWeights: weights must be strictly decreasing");
        sum += w_[i];
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw InvalidInputError("OwaWeights: weights must sum to 1");
}

OwaWeights gini_weights(int m) {
    if (m < 1) throw InvalidInputError("gini_weights: m must be at least 1");
    // Raw weights (m-i+1)/m sum to (m+1)/2; normalize onto the simplex.
    std::vector<double> w(static_cast<std::size_t>(m));
    const double norm = static_cast<double>(m) * (static_cast<double>(m) + 1.0) / 2.0;
    for (int i = 0; i < m; ++i) w[static_cast<std::size_t>(i)] = static_cast<double>(m - i) / norm;
    return OwaWeights(std::move(w));
}

namespace {

/// Stable increasing argsort.
std::vector<int> sort_ranks(std::span<const double> y) {
    std::vector<int> order(y.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return y[static_cast<std::size_t>(a)] < y[static_cast<std::size_t>(b)];
    });
    return order;
}

} // namespace

double owa_value(const OwaWeights& weights, std::span<const double> y) {
    if (static_cast<int>(y.size()) != weights.size())
        throw InvalidInputError("owa_value: weight/criteria length mismatch");
    std::vector<double> sorted(y.begin(), y.end());
    std::sort(sorted.begin(), sorted.end());
    double value = 0.0;
    for (int k = 0; k < weights.size(); ++k) value += weights[k] * sorted[static_cast<std::size_t>(k)];
    return value;
}

std::vector<double> owa_subgradient(const OwaWeights& weights, std::span<const double> y) {
    if (static_cast<int>(y.size()) != weights.size())
        throw InvalidInputError("owa_subgradient: weight/criteria length mismatch");
    const std::vector<int> order = sort_ranks(y);
    std::vector<double> g(y.size());
    for (int k = 0; k < weights.size(); ++k)
        g[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = weights[k];
    return g;
}

namespace detail {

std::vector<double> isotonic_decreasing(std::span<const double> y) {
    const std::size_t n = y.size();
    std::vector<double> level(n);   // block mean
    std::vector<double> sums(n);    // block sum
    std::vector<std::size_t> count(n, 1);
    std::vector<std::size_t> start(n);
    std::size_t blocks = 0;
    for (std::size_t i = 0; i < n; ++i) {
        // Push a singleton block, then merge while ordering is violated.
        level[blocks] = y[i];
        sums[blocks] = y[i];
        count[blocks] = 1;
        start[blocks] = i;
        ++blocks;
        while (blocks > 1 && level[blocks - 2] < level[blocks - 1]) {
            sums[blocks - 2] += sums[blocks - 1];
            count[blocks - 2] += count[blocks - 1];
            level[blocks - 2] = sums[blocks - 2] / static_cast<double>(count[blocks - 2]);
            --blocks;
        }
    }
    std::vector<double> out(n);
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t end = (b + 1 < blocks) ? start[b + 1] : n;
        for (std::size_t i = start[b]; i < end; ++i) out[i] = level[b];
    }
    return out;
}

} // namespace detail

std::vector<double> permutahedron_project(std::span<const double> z, const OwaWeights& weights) {
    const int m = weights.size();
    if (static_cast<int>(z.size()) != m)
        throw InvalidInputError("permutahedron_project: length mismatch");

    // Stable descending argsort of z; weights are already descending.
    std::vector<int> order(z.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return z[static_cast<std::size_t>(a)] > z[static_cast<std::size_t>(b)];
    });

    std::vector<double> diff(z.size());
    for (int k = 0; k < m; ++k)
        diff[static_cast<std::size_t>(k)] = z[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] - weights[k];

    const std::vector<double> fit = detail::isotonic_decreasing(diff);

    std::vector<double> out(z.size());
    for (int k = 0; k < m; ++k) {
        const double projected = z[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] -
                                 fit[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = projected;
    }
    return out;
}

std::vector<double> moreau_gradient(const OwaWeights& weights, std::span<const double> y,
                                    const MoreauConfig& cfg) {
    if (!(cfg.beta > 0.0)) throw InvalidInputError("moreau_gradient: beta must be positive");
    if (static_cast<int>(y.size()) != weights.size())
        throw InvalidInputError("moreau_gradient: length mismatch");
    // Fair OWA is the support minimum min_{v in C(w)} <v, y>; smoothing its
    // negation (the convex training loss) gives the ascent gradient
    // proj_{C(w)}(-y / beta). The sign matters: projecting +y/beta would put
    // the largest weight on the best-off coordinate as beta -> 0 instead of
    // recovering the subgradient.
    std::vector<double> scaled(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) scaled[i] = -y[i] / cfg.beta;
    return permutahedron_project(scaled, weights);
}

} // namespace fairsched::owa
