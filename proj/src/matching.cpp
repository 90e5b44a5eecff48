#include "fairsched/matching.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace fairsched::matching {

namespace {

/// Minimum-cost perfect matching via shortest augmenting paths with dual
/// potentials (Kuhn-Munkres in the O(n^3) formulation). Rows and columns are
/// 1-indexed internally; column 0 is the virtual root.
std::vector<int> min_cost_assignment(const Matrix& cost) {
    const int n = cost.rows;
    constexpr double kInf = std::numeric_limits<double>::infinity();

    std::vector<double> row_pot(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> col_pot(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> col_match(static_cast<std::size_t>(n) + 1, 0); // row matched to column j
    std::vector<int> prev_col(static_cast<std::size_t>(n) + 1, 0);  // augmenting-path predecessor

    for (int i = 1; i <= n; ++i) {
        col_match[0] = i;
        int j0 = 0;
        std::vector<double> min_reduced(static_cast<std::size_t>(n) + 1, kInf);
        std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
        do {
            used[static_cast<std::size_t>(j0)] = true;
            const int i0 = col_match[static_cast<std::size_t>(j0)];
            int j_next = 0;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double reduced = cost(i0 - 1, j - 1) - row_pot[static_cast<std::size_t>(i0)] -
                                       col_pot[static_cast<std::size_t>(j)];
                if (reduced < min_reduced[static_cast<std::size_t>(j)]) {
                    min_reduced[static_cast<std::size_t>(j)] = reduced;
                    prev_col[static_cast<std::size_t>(j)] = j0;
                }
                if (min_reduced[static_cast<std::size_t>(j)] < delta) {
                    delta = min_reduced[static_cast<std::size_t>(j)];
                    j_next = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    row_pot[static_cast<std::size_t>(col_match[static_cast<std::size_t>(j)])] += delta;
                    col_pot[static_cast<std::size_t>(j)] -= delta;
                } else {
                    min_reduced[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j_next;
        } while (col_match[static_cast<std::size_t>(j0)] != 0);
        // Flip matched edges along the augmenting path.
        do {
            const int j1 = prev_col[static_cast<std::size_t>(j0)];
            col_match[static_cast<std::size_t>(j0)] = col_match[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        row_to_col[static_cast<std::size_t>(col_match[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

} // namespace

Assignment solve_assignment(const Matrix& profits) {
    if (profits.rows != profits.cols || profits.rows < 1)
        throw InvalidInputError("solve_assignment: profits must be a nonempty square matrix");
    if (!profits.all_finite())
        throw InvalidInputError("solve_assignment: profits must be finite");

    Matrix cost(profits.rows, profits.cols);
    for (std::size_t k = 0; k < profits.data.size(); ++k) cost.data[k] = -profits.data[k];
    return Assignment(min_cost_assignment(cost));
}

Matrix matching_backward(const Matrix& profits, const Assignment& solution,
                         const Matrix& upstream_grad, const BlackboxConfig& cfg) {
    const int n = profits.rows;
    if (profits.cols != n || upstream_grad.rows != n || upstream_grad.cols != n ||
        solution.size() != n)
        throw InvalidInputError("matching_backward: shape mismatch");
    if (!(cfg.lambda > 0.0)) throw InvalidInputError("matching_backward: lambda must be positive");

    Matrix perturbed(n, n);
    for (std::size_t k = 0; k < perturbed.data.size(); ++k)
        perturbed.data[k] = profits.data[k] - cfg.lambda * upstream_grad.data[k];

    const Assignment shifted = solve_assignment(perturbed);

    Matrix grad(n, n, 0.0);
    for (int i = 0; i < n; ++i) {
        grad(i, solution.slot_of(i)) += 1.0 / cfg.lambda;
        grad(i, shifted.slot_of(i)) -= 1.0 / cfg.lambda;
    }
    return grad;
}

} // namespace fairsched::matching
