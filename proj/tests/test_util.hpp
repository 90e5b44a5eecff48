#pragma once

// Shared test oracles. Everything here is independent of the library's
// solver paths: brute-force enumeration, dense projection, simplex descent.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fairsched/core.hpp"
#include "fairsched/owa.hpp"
#include "fairsched/rng.hpp"

namespace testutil {

using fairsched::Matrix;
using fairsched::PreferenceMatrix;
using fairsched::Rng;

inline Matrix random_matrix(int n, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Matrix m(n, n);
    for (double& v : m.data) v = lo + (hi - lo) * rng.next_double();
    return m;
}

inline PreferenceMatrix random_row_stochastic(int n, Rng& rng) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            m(i, j) = rng.next_double() + 1e-6;
            sum += m(i, j);
        }
        for (int j = 0; j < n; ++j) m(i, j) /= sum;
    }
    return PreferenceMatrix(std::move(m));
}

/// All permutations of 0..n-1 in lexicographic order.
inline std::vector<std::vector<int>> all_permutations(int n) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::vector<int>> out;
    do {
        out.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

inline double perm_profit(const Matrix& profits, const std::vector<int>& perm) {
    double total = 0.0;
    for (int i = 0; i < profits.rows; ++i) total += profits(i, perm[static_cast<std::size_t>(i)]);
    return total;
}

/// Brute-force assignment optimum by full enumeration.
inline double brute_force_assignment_value(const Matrix& profits) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& perm : all_permutations(profits.rows))
        best = std::max(best, perm_profit(profits, perm));
    return best;
}

/// Strictly decreasing weights within ~1e-9 of uniform; stands in for the
/// "uniform weights" thought experiments while honoring the Fair OWA
/// invariant.
inline fairsched::owa::OwaWeights near_uniform_weights(int m) {
    std::vector<double> w(static_cast<std::size_t>(m));
    double sum = 0.0;
    for (int i = 0; i < m; ++i) {
        w[static_cast<std::size_t>(i)] = 1.0 + 1e-9 * static_cast<double>(m - i);
        sum += w[static_cast<std::size_t>(i)];
    }
    for (double& v : w) v /= sum;
    return fairsched::owa::OwaWeights(std::move(w));
}

/// Euclidean projection of a point onto the probability simplex.
inline std::vector<double> project_simplex(std::vector<double> v) {
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double running = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        running += sorted[k];
        const double candidate = (running - 1.0) / static_cast<double>(k + 1);
        if (sorted[k] - candidate > 0.0) theta = candidate;
    }
    for (double& x : v) x = std::max(x - theta, 0.0);
    return v;
}

/// Dense projection onto the permutahedron of w, parameterized as a convex
/// combination of all m! vertices and solved by projected gradient descent.
inline std::vector<double> brute_force_permutahedron_projection(const std::vector<double>& z,
                                                                const std::vector<double>& w,
                                                                int iters = 200000) {
    const int m = static_cast<int>(w.size());
    std::vector<std::vector<int>> perms = all_permutations(m);
    const std::size_t k = perms.size();
    // Vertex matrix V: row per permutation of w.
    std::vector<std::vector<double>> vertices(k, std::vector<double>(static_cast<std::size_t>(m)));
    for (std::size_t p = 0; p < k; ++p)
        for (int i = 0; i < m; ++i)
            vertices[p][static_cast<std::size_t>(i)] =
                w[static_cast<std::size_t>(perms[p][static_cast<std::size_t>(i)])];

    std::vector<double> lambda(k, 1.0 / static_cast<double>(k));
    double lipschitz = 0.0;
    for (const auto& vert : vertices)
        for (double x : vert) lipschitz += x * x;
    const double step = 1.0 / lipschitz;

    std::vector<double> point(static_cast<std::size_t>(m));
    std::vector<double> grad(k);
    for (int t = 0; t < iters; ++t) {
        std::fill(point.begin(), point.end(), 0.0);
        for (std::size_t p = 0; p < k; ++p)
            for (int i = 0; i < m; ++i)
                point[static_cast<std::size_t>(i)] += lambda[p] * vertices[p][static_cast<std::size_t>(i)];
        for (std::size_t p = 0; p < k; ++p) {
            grad[p] = 0.0;
            for (int i = 0; i < m; ++i)
                grad[p] += vertices[p][static_cast<std::size_t>(i)] *
                           (point[static_cast<std::size_t>(i)] - z[static_cast<std::size_t>(i)]);
        }
        for (std::size_t p = 0; p < k; ++p) lambda[p] -= step * grad[p];
        lambda = project_simplex(std::move(lambda));
    }
    std::fill(point.begin(), point.end(), 0.0);
    for (std::size_t p = 0; p < k; ++p)
        for (int i = 0; i < m; ++i)
            point[static_cast<std::size_t>(i)] += lambda[p] * vertices[p][static_cast<std::size_t>(i)];
    return point;
}

/// Max over vertices of <z - v, u - v>; <= 0 certifies v as the projection.
inline double variational_slack(const std::vector<double>& z, const std::vector<double>& v,
                                const std::vector<double>& w) {
    const int m = static_cast<int>(w.size());
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& perm : all_permutations(m)) {
        double dot = 0.0;
        for (int i = 0; i < m; ++i) {
            const double vert = w[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
            dot += (z[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(i)]) *
                   (vert - v[static_cast<std::size_t>(i)]);
        }
        worst = std::max(worst, dot);
    }
    return worst;
}

} // namespace testutil
