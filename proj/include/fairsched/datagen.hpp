#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fairsched/core.hpp"
#include "fairsched/rng.hpp"

namespace fairsched::datagen {

/// Conditional probability tables of the generative causal graph:
/// race, age, gender are roots; transportation and employment depend on race;
/// work hours on employment; children on age; childcare on gender+children;
/// and the primary-slot preference on (transportation, work hours, childcare).
/// Tables are indexed by the enum codes in core.hpp.
struct CptSet {
    std::array<double, 2> race;
    std::array<double, 3> age_group;
    std::array<double, 2> gender;
    std::array<std::array<double, 2>, 2> transportation_by_race;
    std::array<std::array<double, 2>, 2> employment_by_race;
    std::array<std::array<double, 4>, 2> work_hour_by_employment;
    std::array<std::array<double, 2>, 3> children_by_age;
    std::array<std::array<std::array<double, 2>, 2>, 2> childcare_by_gender_children;
    /// slot_preference[transportation][work_hour][childcare] -> distribution over grid slots.
    std::array<std::array<std::array<std::vector<double>, 2>, 4>, 2> slot_preference;

    /// Default tables. The primary-slot blocks are laid out structurally on
    /// the grid (uniform-morning, late-morning, late-afternoon, early-morning)
    /// so any grid size works; on the default 12-slot grid they equal the
    /// standard table exactly.
    static CptSet defaults(const SlotGrid& grid);

    /// Every context must be a probability distribution (sum 1 within 1e-9).
    void validate(const SlotGrid& grid) const;
};

struct GenConfig {
    int num_pools = 25;
    int pool_size = 12;
    std::uint64_t seed = 0;
    /// Mass placed on the (first, second, third) ranked slot choice.
    std::array<double, 3> choice_weights = {0.6, 0.3, 0.1};
    /// One of: individual, employment, transportation, work_hours.
    std::string partition_attribute = "individual";
};

/// One scheduling day: features, protected-group labels, true preferences.
struct Pool {
    std::vector<DefendantFeatures> features;
    std::vector<int> groups;
    PreferenceMatrix prefs;
};

struct DatasetMeta {
    int version = 1;
    std::uint64_t seed = 0;
    int pool_size = 0;
    int num_pools = 0;
    std::string partition_attribute;
    std::array<double, 3> choice_weights = {0.6, 0.3, 0.1};
    SlotGrid grid;
};

struct Dataset {
    DatasetMeta meta;
    std::vector<Pool> pools;
};

/// Ancestral sample through the causal graph in topological order.
DefendantFeatures sample_defendant(const CptSet& cpts, Rng& rng);

/// Primary slot draw for a feature profile (exposed for fidelity checks).
int sample_primary_slot(const DefendantFeatures& features, const CptSet& cpts, Rng& rng);

/// Build one preference row: sample the primary slot, place the second choice
/// two slots earlier and the third two slots later (one hour each way on a
/// half-hour grid), clamp to the grid, resolve collisions to the nearest free
/// slot, and spread the (renormalized) choice weights over the survivors.
std::vector<double> preference_row(const DefendantFeatures& features, const SlotGrid& grid,
                                   const CptSet& cpts, const std::array<double, 3>& choice_weights,
                                   Rng& rng);

/// Group label for one defendant under a partition attribute. `individual`
/// is handled by derive_groups (labels are indices there).
int attribute_label(const DefendantFeatures& features, const std::string& attribute);

/// Raw group labels for a pool under the attribute.
std::vector<int> derive_groups(const std::vector<DefendantFeatures>& features,
                               const std::string& attribute);

/// Grid used for a given pool size: the standard 12-slot day, or the hourly
/// 6-slot day, or a synthetic grid split at midday.
SlotGrid grid_for_pool_size(int n);

/// Sample cfg.num_pools pools of cfg.pool_size defendants; pool p draws from
/// substream (seed, p), so generation is order-independent and reproducible.
Dataset generate_dataset(const GenConfig& cfg, const CptSet& cpts, const SlotGrid& grid);

/// Copy of the dataset with group labels re-derived for another attribute.
Dataset with_partition(const Dataset& ds, const std::string& attribute);

/// JSON-lines round trip: line 0 is the metadata header, one pool per line
/// after. A nonempty config_json string is embedded verbatim under the
/// header's "config" key (readers ignore it).
void write_dataset(const Dataset& ds, const std::filesystem::path& path,
                   const std::string& config_json = "");
Dataset read_dataset(const std::filesystem::path& path);

struct ChiSquareRow {
    std::string table;
    std::string context;
    long samples = 0;
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
    bool pass = true;
};

/// Goodness-of-fit of empirical conditionals against every CPT context,
/// at the given significance level.
std::vector<ChiSquareRow> cpt_chi_square(const CptSet& cpts, const SlotGrid& grid,
                                         long num_samples, std::uint64_t seed,
                                         double significance = 0.001);

} // namespace fairsched::datagen
