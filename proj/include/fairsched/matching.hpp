#pragma once

#include "fairsched/core.hpp"

namespace fairsched::matching {

/// Interpolation step for the finite-difference backward pass. Kept on the
/// scale of the profit margins; callers sweep it per objective.
struct BlackboxConfig {
    double lambda = 0.5;
};

/// Maximum-total-profit assignment: argmax over permutations of Tr(Y^T Pi).
/// Shortest-augmenting-path Hungarian method on negated profits, O(n^3),
/// deterministic tie-breaking by scan order. Input need not be row-stochastic.
Assignment solve_assignment(const Matrix& profits);

/// Blackbox gradient of a loss L through the solver. Given the forward
/// solution Pi for `profits` and upstream dL/dPi, re-solves at the perturbed
/// profits (Y - lambda * dL/dPi) and returns
///
///     dL/dY = (Pi - Pi_lambda) / lambda,
///
/// a scaled difference of two permutation matrices. A descent step
/// Y <- Y - eta * dL/dY moves the profits toward the perturbed solution's
/// support, decreasing the interpolated loss to first order.
Matrix matching_backward(const Matrix& profits, const Assignment& solution,
                         const Matrix& upstream_grad, const BlackboxConfig& cfg);

} // namespace fairsched::matching
