#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fairsched/errors.hpp"

namespace fairsched {

/// Tolerance for "rows sum to one" checks on serialized preference data.
inline constexpr double kRowSumTolerance = 1e-9;

/// Dense row-major matrix of doubles. Small and value-semantic; the pools
/// handled here are n=12-ish, so no linear-algebra library is warranted.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {
        if (r < 0 || c < 0) throw InvalidInputError("Matrix: negative dimension");
    }

    double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

    std::span<const double> row(int i) const {
        return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static Matrix identity(int n) {
        Matrix m(n, n, 0.0);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

/// One scheduling day's time slots, ordered; block_boundary is the index
/// where the morning block ends (first afternoon slot).
struct SlotGrid {
    std::vector<std::string> labels;
    int block_boundary = 0;

    int size() const { return static_cast<int>(labels.size()); }

    void validate() const;

    /// The 12 half-hour slots used throughout: 8:00-10:30 AM and 1:00-3:30 PM.
    static SlotGrid default_grid();
};

enum class Race : std::uint8_t { White = 0, NonWhite = 1 };
enum class AgeGroup : std::uint8_t { Under18 = 0, Age18To54 = 1, Above55 = 2 };
enum class Gender : std::uint8_t { Male = 0, Female = 1 };
enum class Transportation : std::uint8_t { Public = 0, Private = 1 };
enum class Employment : std::uint8_t { Employed = 0, Unemployed = 1 };
enum class WorkHour : std::uint8_t { DayShift = 0, NightShift = 1, IrregularShift = 2, NoShift = 3 };
enum class Children : std::uint8_t { None = 0, OnePlus = 1 };
enum class Childcare : std::uint8_t { NoObligation = 0, HasObligation = 1 };

/// Categorical profile of one defendant; the eight factors driving slot preference.
struct DefendantFeatures {
    Race race = Race::White;
    AgeGroup age_group = AgeGroup::Age18To54;
    Gender gender = Gender::Male;
    Transportation transportation = Transportation::Public;
    Employment employment = Employment::Employed;
    WorkHour work_hour = WorkHour::DayShift;
    Children num_children = Children::None;
    Childcare childcare = Childcare::NoObligation;

    /// Unemployed defendants always carry NoShift.
    void validate() const {
        if (employment == Employment::Unemployed && work_hour != WorkHour::NoShift)
            throw InvalidInputError("DefendantFeatures: unemployed defendant must have NoShift work hours");
    }

    bool operator==(const DefendantFeatures&) const = default;
};

/// Number of categories per feature, in serialization order.
inline constexpr std::array<int, 8> kFeatureCardinalities = {2, 3, 2, 2, 2, 4, 2, 2};
inline constexpr std::array<const char*, 8> kFeatureNames = {
    "race", "age_group", "gender", "transportation", "employment", "work_hour",
    "num_children", "childcare"};

std::array<int, 8> feature_codes(const DefendantFeatures& f);
DefendantFeatures features_from_codes(const std::array<int, 8>& codes);

/// Row-stochastic n-by-n preference matrix: row i is defendant i's preference
/// weight over the n slots. Entries in [0,1], rows summing to 1 within 1e-9.
class PreferenceMatrix {
public:
    explicit PreferenceMatrix(Matrix values);

    int size() const { return values_.rows; }
    double operator()(int i, int j) const { return values_(i, j); }
    const Matrix& matrix() const { return values_; }
    std::span<const double> row(int i) const { return values_.row(i); }

private:
    Matrix values_;
};

/// Permutation sigma with sigma(i) = slot assigned to defendant i.
class Assignment {
public:
    explicit Assignment(std::vector<int> perm);

    int size() const { return static_cast<int>(perm_.size()); }
    int slot_of(int defendant) const { return perm_[static_cast<std::size_t>(defendant)]; }
    const std::vector<int>& perm() const { return perm_; }

    /// 0/1 matrix view with a single 1 per row and column.
    Matrix to_matrix() const;

    static Assignment identity(int n);

    bool operator==(const Assignment&) const = default;

private:
    std::vector<int> perm_;
};

/// Partition of defendants {0..n-1} into nonempty groups 0..G-1.
class GroupPartition {
public:
    /// group_of must use exactly the ids 0..G-1 for some G >= 1.
    explicit GroupPartition(std::vector<int> group_of);

    /// Compacts arbitrary integer labels to 0..G-1 (ascending label order).
    static GroupPartition from_labels(const std::vector<int>& labels);
    static GroupPartition singletons(int n);

    int num_members() const { return static_cast<int>(group_of_.size()); }
    int num_groups() const { return static_cast<int>(groups_.size()); }
    int group_of(int defendant) const { return group_of_[static_cast<std::size_t>(defendant)]; }
    const std::vector<int>& members(int g) const { return groups_[static_cast<std::size_t>(g)]; }
    const std::vector<int>& group_ids() const { return group_of_; }

private:
    std::vector<int> group_of_;
    std::vector<std::vector<int>> groups_;
};

/// Per-defendant utilities u_i = Y[i][sigma(i)], the diagonal of Y^T Pi.
std::vector<double> utility_vector(const Assignment& assignment, const PreferenceMatrix& prefs);

/// Sum of individual utilities, Tr(Y^T Pi).
double total_utility(const Assignment& assignment, const PreferenceMatrix& prefs);

/// Mean member utility per group.
std::vector<double> group_utilities(const Assignment& assignment, const PreferenceMatrix& prefs,
                                    const GroupPartition& partition);

} // namespace fairsched
