#pragma once

#include <span>
#include <vector>

#include "fairsched/errors.hpp"

namespace fairsched::owa {

/// Fair ordered-weighted-average weights: strictly decreasing, positive,
/// summing to 1 within 1e-9. The largest weight multiplies the smallest
/// (worst-off) criterion.
class OwaWeights {
public:
    explicit OwaWeights(std::vector<double> w);

    int size() const { return static_cast<int>(w_.size()); }
    double operator[](int i) const { return w_[static_cast<std::size_t>(i)]; }
    const std::vector<double>& values() const { return w_; }

private:
    std::vector<double> w_;
};

/// Smoothing parameter for the Moreau-envelope gradient rule.
struct MoreauConfig {
    double beta = 0.005;
};

/// Gini-index weight family (m, m-1, ..., 1)/m, normalized onto the simplex.
OwaWeights gini_weights(int m);

/// w^T tau(y) with tau the stable increasing sort of y.
double owa_value(const OwaWeights& weights, std::span<const double> y);

/// Exact subgradient: weight w_k lands on the position holding the k-th
/// smallest entry of y (stable sort at ties).
std::vector<double> owa_subgradient(const OwaWeights& weights, std::span<const double> y);

/// Euclidean projection of z onto the permutahedron C(w), the convex hull of
/// all permutations of the weight vector. Sort z descending, run decreasing
/// pool-adjacent-violators isotonic regression on (sorted z - w), subtract,
/// and unsort.
std::vector<double> permutahedron_project(std::span<const double> z, const OwaWeights& weights);

/// Smoothed-OWA ascent gradient via the Moreau envelope of the negated
/// (convex) objective: the projection of -y / beta onto C(w). Always lies in
/// C(w) and approaches owa_subgradient as beta -> 0.
std::vector<double> moreau_gradient(const OwaWeights& weights, std::span<const double> y,
                                    const MoreauConfig& cfg);

namespace detail {
/// argmin_{v nonincreasing} ||v - y||^2 by pool-adjacent-violators, O(m).
std::vector<double> isotonic_decreasing(std::span<const double> y);
} // namespace detail

} // namespace fairsched::owa
