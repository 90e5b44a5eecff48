#include "fairsched/core.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace fairsched {

void SlotGrid::validate() const {
    const int n = size();
    if (n < 2) throw InvalidInputError("SlotGrid: need at least 2 slots");
    std::set<std::string> distinct(labels.begin(), labels.end());
    if (static_cast<int>(distinct.size()) != n) throw InvalidInputError("SlotGrid: labels must be distinct");
    if (block_boundary < 1 || block_boundary > n - 1)
        throw InvalidInputError("SlotGrid: block_boundary must split the grid into nonempty blocks");
}

SlotGrid SlotGrid::default_grid() {
    SlotGrid g;
    g.labels = {"8:00AM", "8:30AM", "9:00AM",  "9:30AM", "10:00AM", "10:30AM",
                "1:00PM", "1:30PM", "2:00PM", "2:30PM", "3:00PM",  "3:30PM"};
    g.block_boundary = 6;
    return g;
}

std::array<int, 8> feature_codes(const DefendantFeatures& f) {
    return {static_cast<int>(f.race),          static_cast<int>(f.age_group),
            static_cast<int>(f.gender),        static_cast<int>(f.transportation),
            static_cast<int>(f.employment),    static_cast<int>(f.work_hour),
            static_cast<int>(f.num_children),  static_cast<int>(f.childcare)};
}

DefendantFeatures features_from_codes(const std::array<int, 8>& codes) {
    for (int k = 0; k < 8; ++k) {
        if (codes[static_cast<std::size_t>(k)] < 0 ||
            codes[static_cast<std::size_t>(k)] >= kFeatureCardinalities[static_cast<std::size_t>(k)])
            throw InvalidInputError(std::string("feature code out of range for ") +
                                    kFeatureNames[static_cast<std::size_t>(k)]);
    }
    DefendantFeatures f;
    f.race = static_cast<Race>(codes[0]);
    f.age_group = static_cast<AgeGroup>(codes[1]);
    f.gender = static_cast<Gender>(codes[2]);
    f.transportation = static_cast<Transportation>(codes[3]);
    f.employment = static_cast<Employment>(codes[4]);
    f.work_hour = static_cast<WorkHour>(codes[5]);
    f.num_children = static_cast<Children>(codes[6]);
    f.childcare = static_cast<Childcare>(codes[7]);
    f.validate();
    return f;
}

PreferenceMatrix::PreferenceMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows != values_.cols) throw InvalidInputError("PreferenceMatrix: matrix must be square");
    if (values_.rows < 1) throw InvalidInputError("PreferenceMatrix: empty matrix");
    for (int i = 0; i < values_.rows; ++i) {
        double sum = 0.0;
        for (int j = 0; j < values_.cols; ++j) {
            const double v = values_(i, j);
            if (!(v >= 0.0 && v <= 1.0))
                throw InvalidInputError("PreferenceMatrix: entries must lie in [0,1]");
            sum += v;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance)
            throw InvalidInputError("PreferenceMatrix: row " + std::to_string(i) +
                                    " sums to " + std::to_string(sum) + ", expected 1");
    }
}

Assignment::Assignment(std::vector<int> perm) : perm_(std::move(perm)) {
    const int n = static_cast<int>(perm_.size());
    if (n == 0) throw InvalidInputError("Assignment: empty permutation");
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (int v : perm_) {
        if (v < 0 || v >= n || seen[static_cast<std::size_t>(v)])
            throw InvalidInputError("Assignment: not a permutation of 0..n-1");
        seen[static_cast<std::size_t>(v)] = true;
    }
}

Matrix Assignment::to_matrix() const {
    const int n = size();
    Matrix m(n, n, 0.0);
    for (int i = 0; i < n; ++i) m(i, perm_[static_cast<std::size_t>(i)]) = 1.0;
    return m;
}

Assignment Assignment::identity(int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    return Assignment(std::move(p));
}

GroupPartition::GroupPartition(std::vector<int> group_of) : group_of_(std::move(group_of)) {
    const int n = static_cast<int>(group_of_.size());
    if (n == 0) throw InvalidInputError("GroupPartition: empty partition");
    int num_groups = 0;
    for (int g : group_of_) {
        if (g < 0) throw InvalidInputError("GroupPartition: negative group id");
        num_groups = std::max(num_groups, g + 1);
    }
    groups_.assign(static_cast<std::size_t>(num_groups), {});
    for (int i = 0; i < n; ++i) groups_[static_cast<std::size_t>(group_of_[static_cast<std::size_t>(i)])].push_back(i);
    for (const auto& members : groups_)
        if (members.empty()) throw InvalidInputError("GroupPartition: group ids must be contiguous (empty group)");
}

GroupPartition GroupPartition::from_labels(const std::vector<int>& labels) {
    std::map<int, int> compact;
    for (int v : labels) compact.emplace(v, 0);
    int next = 0;
    for (auto& [label, id] : compact) id = next++;
    std::vector<int> group_of;
    group_of.reserve(labels.size());
    for (int v : labels) group_of.push_back(compact.at(v));
    return GroupPartition(std::move(group_of));
}

GroupPartition GroupPartition::singletons(int n) {
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    return GroupPartition(std::move(ids));
}

std::vector<double> utility_vector(const Assignment& assignment, const PreferenceMatrix& prefs) {
    const int n = prefs.size();
    if (assignment.size() != n)
        throw InvalidInputError("utility_vector: assignment and preference dimensions differ");
    std::vector<double> u(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) u[static_cast<std::size_t>(i)] = prefs(i, assignment.slot_of(i));
    return u;
}

double total_utility(const Assignment& assignment, const PreferenceMatrix& prefs) {
    const int n = prefs.size();
    if (assignment.size() != n)
        throw InvalidInputError("total_utility: assignment and preference dimensions differ");
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += prefs(i, assignment.slot_of(i));
    return total;
}

std::vector<double> group_utilities(const Assignment& assignment, const PreferenceMatrix& prefs,
                                    const GroupPartition& partition) {
    const int n = prefs.size();
    if (assignment.size() != n || partition.num_members() != n)
        throw InvalidInputError("group_utilities: dimension mismatch");
    std::vector<double> out(static_cast<std::size_t>(partition.num_groups()), 0.0);
    for (int g = 0; g < partition.num_groups(); ++g) {
        const auto& members = partition.members(g);
        double sum = 0.0;
        for (int i : members) sum += prefs(i, assignment.slot_of(i));
        out[static_cast<std::size_t>(g)] = sum / static_cast<double>(members.size());
    }
    return out;
}

} // namespace fairsched
