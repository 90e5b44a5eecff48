#include <cmath>
#include <limits>

#include <doctest.h>

#include "fairsched/matching.hpp"
#include "fairsched/rng.hpp"
#include "test_util.hpp"

using namespace fairsched;
using namespace fairsched::matching;

TEST_CASE("dominant diagonal wins") {
    CHECK(solve_assignment(Matrix::identity(4)) == Assignment::identity(4));

    Rng rng(3);
    Matrix m = testutil::random_matrix(5, rng, 0.0, 0.4);
    for (int i = 0; i < 5; ++i) m(i, i) = 2.0 + rng.next_double();
    CHECK(solve_assignment(m) == Assignment::identity(5));
}

TEST_CASE("small instance beats the diagonal") {
    Matrix m(2, 2);
    m(0, 0) = 1.0; m(0, 1) = 2.0;
    m(1, 0) = 3.0; m(1, 1) = 1.0;
    const Assignment a = solve_assignment(m);
    CHECK(a.perm() == std::vector<int>{1, 0});
    CHECK(m(0, a.slot_of(0)) + m(1, a.slot_of(1)) == doctest::Approx(5.0));
}

TEST_CASE("matches brute force on random 6x6 instances") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const Matrix m = testutil::random_matrix(6, rng, -1.0, 1.0);
        const Assignment a = solve_assignment(m);
        double value = 0.0;
        for (int i = 0; i < 6; ++i) value += m(i, a.slot_of(i));
        CHECK(value == doctest::Approx(testutil::brute_force_assignment_value(m)).epsilon(1e-12));
    }
}

TEST_CASE("scale and shift invariance of the optimal value") {
    Rng rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix m = testutil::random_matrix(5, rng);
        const double c = 0.1 + 3.0 * rng.next_double();

        Matrix scaled = m;
        for (double& v : scaled.data) v *= c;
        const Assignment a = solve_assignment(scaled);
        double value = 0.0;
        for (int i = 0; i < 5; ++i) value += scaled(i, a.slot_of(i));
        CHECK(value == doctest::Approx(testutil::brute_force_assignment_value(scaled)).epsilon(1e-12));
        CHECK(value == doctest::Approx(c * testutil::brute_force_assignment_value(m)).epsilon(1e-9));

        Matrix shifted = m;
        const int row = rng.next_below(5), col = rng.next_below(5);
        const double delta = 2.0 * rng.next_double() - 1.0;
        for (int j = 0; j < 5; ++j) shifted(row, j) += delta;
        for (int i = 0; i < 5; ++i) shifted(i, col) += delta;
        const Assignment b = solve_assignment(shifted);
        double shifted_value = 0.0;
        for (int i = 0; i < 5; ++i) shifted_value += shifted(i, b.slot_of(i));
        CHECK(shifted_value ==
              doctest::Approx(testutil::brute_force_assignment_value(m) + 2 * delta).epsilon(1e-9));
    }
}

TEST_CASE("input validation") {
    Matrix rect(2, 3);
    CHECK_THROWS_AS(solve_assignment(rect), InvalidInputError);
    Matrix nan(2, 2);
    nan(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(solve_assignment(nan), InvalidInputError);
}

TEST_CASE("backward pass: zero upstream gives zero gradient") {
    Rng rng(17);
    const Matrix m = testutil::random_matrix(4, rng);
    const Assignment a = solve_assignment(m);
    const Matrix g = matching_backward(m, a, Matrix(4, 4, 0.0), {5.0});
    for (double v : g.data) CHECK(v == 0.0);
}

TEST_CASE("backward pass entries are a scaled permutation difference") {
    Matrix m(2, 2);
    m(0, 0) = 1.0; m(0, 1) = 0.0;
    m(1, 0) = 0.0; m(1, 1) = 1.0;
    const Assignment a = solve_assignment(m);
    CHECK(a == Assignment::identity(2));

    // Upstream pushing utility away from the diagonal flips the perturbed solve.
    Matrix upstream(2, 2, 0.0);
    upstream(0, 0) = 1.0;
    upstream(1, 1) = 1.0;
    const double lambda = 4.0;
    const Matrix g = matching_backward(m, a, upstream, {lambda});
    int flipped = 0;
    for (double v : g.data) {
        const bool valid = std::abs(v) < 1e-12 || std::abs(std::abs(v) - 1.0 / lambda) < 1e-12;
        CHECK(valid);
        if (std::abs(v) > 1e-12) ++flipped;
    }
    CHECK(flipped == 4);
    CHECK(g(0, 0) == doctest::Approx(1.0 / lambda));  // was chosen, lost to perturbation
    CHECK(g(0, 1) == doctest::Approx(-1.0 / lambda)); // gained
}

TEST_CASE("descent smoke test through the solver") {
    // L(Pi) = -Tr(Y^T Pi) for a fixed true Y; a gradient step on the profits
    // must not increase L, and a full-lambda step usually decreases it.
    Rng rng(19);
    const double lambda = 10.0;
    int strict_decreases = 0;
    int improvable = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix profits = testutil::random_matrix(3, rng);
        const auto truth = testutil::random_row_stochastic(3, rng);

        const Assignment before = solve_assignment(profits);
        const double loss_before = -total_utility(before, truth);
        const double best_loss = -testutil::brute_force_assignment_value(truth.matrix());
        if (loss_before > best_loss + 1e-12) ++improvable;

        Matrix upstream(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) upstream(i, j) = -truth(i, j);
        const Matrix grad = matching_backward(profits, before, upstream, {lambda});

        // Small step: the solver's decision does not move, so the loss
        // through the solver cannot increase.
        Matrix nudged = profits;
        for (std::size_t k = 0; k < nudged.data.size(); ++k)
            nudged.data[k] -= 0.01 * grad.data[k];
        CHECK(-total_utility(solve_assignment(nudged), truth) <= loss_before + 1e-12);

        // Full interpolation step: profits move onto the perturbed solution's
        // support; with the right sign this usually flips to a better schedule.
        Matrix moved = profits;
        for (std::size_t k = 0; k < moved.data.size(); ++k)
            moved.data[k] -= lambda * grad.data[k];
        if (-total_utility(solve_assignment(moved), truth) < loss_before - 1e-12) ++strict_decreases;
    }
    // Most suboptimal starts must actually improve, otherwise the sign is wrong.
    CHECK(improvable >= 30);
    CHECK(strict_decreases >= improvable / 2);
}
