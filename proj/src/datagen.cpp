#include "fairsched/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <json.hpp>

namespace fairsched::datagen {

using nlohmann::json;

namespace {

void check_distribution(std::span<const double> p, const std::string& what) {
    double sum = 0.0;
    for (double v : p) {
        if (v < 0.0 || !std::isfinite(v)) throw ConfigError("CPT " + what + ": negative or non-finite probability");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("CPT " + what + ": probabilities sum to " + std::to_string(sum));
}

std::vector<double> uniform_over(int n, int first, int count) {
    std::vector<double> p(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < count; ++k) p[static_cast<std::size_t>(first + k)] = 1.0 / static_cast<double>(count);
    return p;
}

} // namespace

CptSet CptSet::defaults(const SlotGrid& grid) {
    grid.validate();
    CptSet c;
    c.race = {0.5, 0.5};
    c.age_group = {0.05, 0.8, 0.15};
    c.gender = {0.45, 0.55};
    c.transportation_by_race = {{{0.8, 0.2}, {0.6, 0.4}}};                  // [race][public, private]
    c.employment_by_race = {{{0.8, 0.2}, {0.7, 0.3}}};                     // [race][employed, unemployed]
    c.work_hour_by_employment = {{{0.5, 0.3, 0.18, 0.02}, {0.0, 0.0, 0.0, 1.0}}};
    c.children_by_age = {{{0.95, 0.05}, {0.55, 0.45}, {0.2, 0.8}}};        // [age][none, one_plus]
    c.childcare_by_gender_children = {{
        {{{1.0, 0.0}, {0.85, 0.15}}},   // male: no child, 1+ child
        {{{1.0, 0.0}, {0.3, 0.7}}},     // female
    }};

    // Primary-slot blocks, scaled structurally to the grid. On the default
    // 12-slot grid: morning = 6 slots, so uniform-morning is 1/6 over
    // 8:00-10:30AM, late-morning is 1/3 over 9:30-10:30AM, late-afternoon is
    // 1/3 over 2:30-3:30PM, early-morning is 1/4 over 8:00-9:30AM.
    const int n = grid.size();
    const int morning = grid.block_boundary;
    const int afternoon = n - morning;
    const auto uniform_morning = uniform_over(n, 0, morning);
    const int late_morning_count = std::max(1, morning / 2);
    const auto late_morning = uniform_over(n, morning - late_morning_count, late_morning_count);
    const int late_afternoon_count = std::max(1, afternoon / 2);
    const auto late_afternoon = uniform_over(n, n - late_afternoon_count, late_afternoon_count);
    const int early_morning_count = std::max(1, 2 * morning / 3);
    const auto early_morning = uniform_over(n, 0, early_morning_count);

    auto set_block = [&](Transportation t, WorkHour w, Childcare cc, const std::vector<double>& p) {
        c.slot_preference[static_cast<std::size_t>(t)][static_cast<std::size_t>(w)]
                         [static_cast<std::size_t>(cc)] = p;
    };
    for (Childcare cc : {Childcare::NoObligation, Childcare::HasObligation}) {
        // Public transit dominates the preference: mornings regardless of shift.
        set_block(Transportation::Public, WorkHour::DayShift, cc, uniform_morning);
        set_block(Transportation::Public, WorkHour::IrregularShift, cc, uniform_morning);
        set_block(Transportation::Public, WorkHour::NoShift, cc, uniform_morning);
        set_block(Transportation::Public, WorkHour::NightShift, cc, late_morning);
        set_block(Transportation::Private, WorkHour::NightShift, cc, early_morning);
        set_block(Transportation::Private, WorkHour::IrregularShift, cc, early_morning);
    }
    // Private transport + daytime availability splits on childcare obligation.
    set_block(Transportation::Private, WorkHour::DayShift, Childcare::HasObligation, uniform_morning);
    set_block(Transportation::Private, WorkHour::DayShift, Childcare::NoObligation, late_afternoon);
    set_block(Transportation::Private, WorkHour::NoShift, Childcare::HasObligation, uniform_morning);
    set_block(Transportation::Private, WorkHour::NoShift, Childcare::NoObligation, late_afternoon);

    c.validate(grid);
    return c;
}

void CptSet::validate(const SlotGrid& grid) const {
    check_distribution(race, "race");
    check_distribution(age_group, "age_group");
    check_distribution(gender, "gender");
    for (int r = 0; r < 2; ++r) {
        check_distribution(transportation_by_race[static_cast<std::size_t>(r)], "transportation|race");
        check_distribution(employment_by_race[static_cast<std::size_t>(r)], "employment|race");
    }
    for (int e = 0; e < 2; ++e)
        check_distribution(work_hour_by_employment[static_cast<std::size_t>(e)], "work_hour|employment");
    for (int a = 0; a < 3; ++a)
        check_distribution(children_by_age[static_cast<std::size_t>(a)], "children|age");
    for (int g = 0; g < 2; ++g)
        for (int ch = 0; ch < 2; ++ch)
            check_distribution(childcare_by_gender_children[static_cast<std::size_t>(g)][static_cast<std::size_t>(ch)],
                               "childcare|gender,children");
    for (int t = 0; t < 2; ++t)
        for (int w = 0; w < 4; ++w)
            for (int cc = 0; cc < 2; ++cc) {
                const auto& p = slot_preference[static_cast<std::size_t>(t)][static_cast<std::size_t>(w)]
                                               [static_cast<std::size_t>(cc)];
                if (static_cast<int>(p.size()) != grid.size())
                    throw ConfigError("CPT slot_preference: size does not match grid");
                check_distribution(p, "slot_preference");
            }
}

DefendantFeatures sample_defendant(const CptSet& cpts, Rng& rng) {
    DefendantFeatures f;
    f.race = static_cast<Race>(rng.categorical(cpts.race));
    f.age_group = static_cast<AgeGroup>(rng.categorical(cpts.age_group));
    f.gender = static_cast<Gender>(rng.categorical(cpts.gender));
    f.transportation = static_cast<Transportation>(
        rng.categorical(cpts.transportation_by_race[static_cast<std::size_t>(f.race)]));
    f.employment = static_cast<Employment>(
        rng.categorical(cpts.employment_by_race[static_cast<std::size_t>(f.race)]));
    f.work_hour = static_cast<WorkHour>(
        rng.categorical(cpts.work_hour_by_employment[static_cast<std::size_t>(f.employment)]));
    f.num_children = static_cast<Children>(
        rng.categorical(cpts.children_by_age[static_cast<std::size_t>(f.age_group)]));
    f.childcare = static_cast<Childcare>(rng.categorical(
        cpts.childcare_by_gender_children[static_cast<std::size_t>(f.gender)]
                                         [static_cast<std::size_t>(f.num_children)]));
    f.validate();
    return f;
}

int sample_primary_slot(const DefendantFeatures& features, const CptSet& cpts, Rng& rng) {
    const auto& dist = cpts.slot_preference[static_cast<std::size_t>(features.transportation)]
                                           [static_cast<std::size_t>(features.work_hour)]
                                           [static_cast<std::size_t>(features.childcare)];
    double mass = std::accumulate(dist.begin(), dist.end(), 0.0);
    if (mass <= 0.0) throw ConfigError("slot_preference context has zero support");
    return rng.categorical(dist);
}

std::vector<double> preference_row(const DefendantFeatures& features, const SlotGrid& grid,
                                   const CptSet& cpts, const std::array<double, 3>& choice_weights,
                                   Rng& rng) {
    for (double w : choice_weights)
        if (!(w > 0.0)) throw InvalidInputError("preference_row: choice weights must be positive");
    const int n = grid.size();
    const int primary = sample_primary_slot(features, cpts, rng);

    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    // Clamp into the grid, then fall back to the nearest free slot on
    // collision (lower index wins at equal distance). Drops the choice only
    // when the grid is exhausted (n = 2).
    auto place = [&](int pos) -> int {
        pos = std::clamp(pos, 0, n - 1);
        if (!taken[static_cast<std::size_t>(pos)]) return pos;
        for (int d = 1; d < n; ++d) {
            const int lo = pos - d;
            const int hi = pos + d;
            if (lo >= 0 && !taken[static_cast<std::size_t>(lo)]) return lo;
            if (hi < n && !taken[static_cast<std::size_t>(hi)]) return hi;
        }
        return -1;
    };

    // Second choice one hour earlier, third one hour later: +-2 slots.
    const std::array<int, 3> wanted = {primary, primary - 2, primary + 2};
    std::array<int, 3> slot{};
    double mass = 0.0;
    for (int k = 0; k < 3; ++k) {
        slot[static_cast<std::size_t>(k)] = place(wanted[static_cast<std::size_t>(k)]);
        if (slot[static_cast<std::size_t>(k)] >= 0) {
            taken[static_cast<std::size_t>(slot[static_cast<std::size_t>(k)])] = true;
            mass += choice_weights[static_cast<std::size_t>(k)];
        }
    }

    std::vector<double> row(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k < 3; ++k)
        if (slot[static_cast<std::size_t>(k)] >= 0)
            row[static_cast<std::size_t>(slot[static_cast<std::size_t>(k)])] =
                choice_weights[static_cast<std::size_t>(k)] / mass;
    return row;
}

int attribute_label(const DefendantFeatures& features, const std::string& attribute) {
    if (attribute == "employment") return static_cast<int>(features.employment);
    if (attribute == "transportation") return static_cast<int>(features.transportation);
    if (attribute == "work_hours") return static_cast<int>(features.work_hour);
    throw InvalidInputError("unknown partition attribute: " + attribute);
}

std::vector<int> derive_groups(const std::vector<DefendantFeatures>& features,
                               const std::string& attribute) {
    std::vector<int> labels(features.size());
    if (attribute == "individual") {
        std::iota(labels.begin(), labels.end(), 0);
        return labels;
    }
    for (std::size_t i = 0; i < features.size(); ++i)
        labels[i] = attribute_label(features[i], attribute);
    return labels;
}

SlotGrid grid_for_pool_size(int n) {
    if (n == 12) return SlotGrid::default_grid();
    if (n == 6) return SlotGrid{{"8:00AM", "9:00AM", "10:00AM", "1:00PM", "2:00PM", "3:00PM"}, 3};
    SlotGrid g;
    for (int k = 0; k < n; ++k) g.labels.push_back("slot" + std::to_string(k));
    g.block_boundary = std::max(1, n / 2);
    g.validate();
    return g;
}

Dataset generate_dataset(const GenConfig& cfg, const CptSet& cpts, const SlotGrid& grid) {
    grid.validate();
    cpts.validate(grid);
    if (cfg.num_pools < 1) throw InvalidInputError("generate_dataset: num_pools must be at least 1");
    if (cfg.pool_size != grid.size())
        throw InvalidInputError("generate_dataset: pool_size must match the slot grid");
    if (cfg.partition_attribute != "individual") (void)attribute_label(DefendantFeatures{}, cfg.partition_attribute);

    Dataset ds;
    ds.meta.seed = cfg.seed;
    ds.meta.pool_size = cfg.pool_size;
    ds.meta.num_pools = cfg.num_pools;
    ds.meta.partition_attribute = cfg.partition_attribute;
    ds.meta.choice_weights = cfg.choice_weights;
    ds.meta.grid = grid;

    const int n = cfg.pool_size;
    ds.pools.reserve(static_cast<std::size_t>(cfg.num_pools));
    for (int p = 0; p < cfg.num_pools; ++p) {
        Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(p));
        std::vector<DefendantFeatures> features;
        features.reserve(static_cast<std::size_t>(n));
        Matrix prefs(n, n);
        for (int i = 0; i < n; ++i) {
            features.push_back(sample_defendant(cpts, rng));
            const auto row = preference_row(features.back(), grid, cpts, cfg.choice_weights, rng);
            for (int j = 0; j < n; ++j) prefs(i, j) = row[static_cast<std::size_t>(j)];
        }
        std::vector<int> groups = derive_groups(features, cfg.partition_attribute);
        ds.pools.push_back(Pool{std::move(features), std::move(groups), PreferenceMatrix(std::move(prefs))});
    }
    return ds;
}

Dataset with_partition(const Dataset& ds, const std::string& attribute) {
    if (attribute.empty() || attribute == ds.meta.partition_attribute) return ds;
    Dataset out = ds;
    out.meta.partition_attribute = attribute;
    for (auto& pool : out.pools) pool.groups = derive_groups(pool.features, attribute);
    return out;
}

namespace {

json meta_to_json(const DatasetMeta& m) {
    return json{{"kind", "fairsched.dataset"},
                {"version", m.version},
                {"seed", m.seed},
                {"n", m.pool_size},
                {"num_pools", m.num_pools},
                {"partition_attribute", m.partition_attribute},
                {"choice_weights", m.choice_weights},
                {"grid_labels", m.grid.labels},
                {"block_boundary", m.grid.block_boundary}};
}

} // namespace

void write_dataset(const Dataset& ds, const std::filesystem::path& path,
                   const std::string& config_json) {
    std::ofstream out(path);
    if (!out) throw DataError("write_dataset: cannot open " + path.string());
    json meta = meta_to_json(ds.meta);
    if (!config_json.empty()) {
        try {
            meta["config"] = json::parse(config_json);
        } catch (const json::exception& e) {
            throw InvalidInputError(std::string("write_dataset: config_json is not valid JSON: ") + e.what());
        }
    }
    out << meta.dump() << "\n";
    for (const auto& pool : ds.pools) {
        json line;
        auto& feats = line["features"] = json::array();
        for (const auto& f : pool.features) feats.push_back(feature_codes(f));
        line["groups"] = pool.groups;
        auto& prefs = line["prefs"] = json::array();
        for (int i = 0; i < pool.prefs.size(); ++i) {
            auto row = pool.prefs.row(i);
            prefs.push_back(std::vector<double>(row.begin(), row.end()));
        }
        out << line.dump() << "\n";
    }
    if (!out) throw DataError("write_dataset: write failed for " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("read_dataset: cannot open " + path.string());

    auto fail = [&](int line_no, const std::string& msg) -> void {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
    };

    std::string line;
    if (!std::getline(in, line)) fail(1, "missing metadata header");

    Dataset ds;
    try {
        const json meta = json::parse(line);
        if (meta.value("kind", "") != "fairsched.dataset") fail(1, "not a dataset file");
        ds.meta.version = meta.at("version").get<int>();
        ds.meta.seed = meta.at("seed").get<std::uint64_t>();
        ds.meta.pool_size = meta.at("n").get<int>();
        ds.meta.num_pools = meta.at("num_pools").get<int>();
        ds.meta.partition_attribute = meta.at("partition_attribute").get<std::string>();
        const auto cw = meta.at("choice_weights").get<std::vector<double>>();
        if (cw.size() != 3) fail(1, "choice_weights must have 3 entries");
        std::copy(cw.begin(), cw.end(), ds.meta.choice_weights.begin());
        ds.meta.grid.labels = meta.at("grid_labels").get<std::vector<std::string>>();
        ds.meta.grid.block_boundary = meta.at("block_boundary").get<int>();
        ds.meta.grid.validate();
    } catch (const json::exception& e) {
        fail(1, std::string("metadata parse error: ") + e.what());
    }

    const int n = ds.meta.pool_size;
    if (n != ds.meta.grid.size()) fail(1, "pool size does not match grid");

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            const auto& jf = j.at("features");
            const auto& jg = j.at("groups");
            const auto& jp = j.at("prefs");
            if (static_cast<int>(jf.size()) != n || static_cast<int>(jg.size()) != n ||
                static_cast<int>(jp.size()) != n)
                fail(line_no, "pool arrays must have n entries");
            std::vector<DefendantFeatures> features;
            features.reserve(static_cast<std::size_t>(n));
            for (const auto& codes : jf) features.push_back(features_from_codes(codes.get<std::array<int, 8>>()));
            std::vector<int> groups = jg.get<std::vector<int>>();
            Matrix prefs(n, n);
            for (int i = 0; i < n; ++i) {
                const auto row = jp[static_cast<std::size_t>(i)].get<std::vector<double>>();
                if (static_cast<int>(row.size()) != n) fail(line_no, "preference row length mismatch");
                for (int jcol = 0; jcol < n; ++jcol) prefs(i, jcol) = row[static_cast<std::size_t>(jcol)];
            }
            const std::vector<int> expected = derive_groups(features, ds.meta.partition_attribute);
            if (groups != expected) fail(line_no, "groups inconsistent with partition_attribute");
            ds.pools.push_back(Pool{std::move(features), std::move(groups), PreferenceMatrix(std::move(prefs))});
        } catch (const json::exception& e) {
            fail(line_no, std::string("parse error: ") + e.what());
        } catch (const InvalidInputError& e) {
            fail(line_no, std::string("invalid pool: ") + e.what());
        }
    }
    if (static_cast<int>(ds.pools.size()) != ds.meta.num_pools)
        throw DataError(path.string() + ": expected " + std::to_string(ds.meta.num_pools) +
                        " pools, found " + std::to_string(ds.pools.size()));
    return ds;
}

namespace {

struct Tally {
    std::vector<long> counts;
    long total = 0;
    void hit(int k) {
        counts[static_cast<std::size_t>(k)] += 1;
        total += 1;
    }
};

ChiSquareRow score_context(const std::string& table, const std::string& context, const Tally& tally,
                           std::span<const double> expected_probs, double significance) {
    ChiSquareRow row;
    row.table = table;
    row.context = context;
    row.samples = tally.total;
    int dof = -1;
    bool impossible = false;
    for (std::size_t k = 0; k < expected_probs.size(); ++k) {
        const double p = expected_probs[k];
        if (p <= 0.0) {
            if (tally.counts[k] > 0) impossible = true;
            continue;
        }
        ++dof;
        const double expected = p * static_cast<double>(tally.total);
        const double diff = static_cast<double>(tally.counts[k]) - expected;
        if (expected > 0.0) row.statistic += diff * diff / expected;
    }
    row.dof = std::max(dof, 0);
    if (impossible) {
        row.p_value = 0.0;
        row.pass = false;
        return row;
    }
    if (row.dof == 0 || tally.total == 0) {
        row.p_value = 1.0;
        row.pass = true;
        return row;
    }
    const boost::math::chi_squared dist(static_cast<double>(row.dof));
    row.p_value = boost::math::cdf(boost::math::complement(dist, row.statistic));
    row.pass = row.p_value >= significance;
    return row;
}

} // namespace

std::vector<ChiSquareRow> cpt_chi_square(const CptSet& cpts, const SlotGrid& grid,
                                         long num_samples, std::uint64_t seed,
                                         double significance) {
    if (num_samples < 1) throw InvalidInputError("cpt_chi_square: need at least one sample");
    cpts.validate(grid);

    const int n = grid.size();
    Tally race{std::vector<long>(2, 0)};
    Tally age{std::vector<long>(3, 0)};
    Tally gender{std::vector<long>(2, 0)};
    std::array<Tally, 2> transport{Tally{std::vector<long>(2, 0)}, Tally{std::vector<long>(2, 0)}};
    std::array<Tally, 2> employment{Tally{std::vector<long>(2, 0)}, Tally{std::vector<long>(2, 0)}};
    std::array<Tally, 2> work{Tally{std::vector<long>(4, 0)}, Tally{std::vector<long>(4, 0)}};
    std::array<Tally, 3> children;
    for (auto& t : children) t.counts.assign(2, 0);
    std::array<std::array<Tally, 2>, 2> childcare;
    for (auto& a : childcare)
        for (auto& t : a) t.counts.assign(2, 0);
    std::array<std::array<std::array<Tally, 2>, 4>, 2> slots;
    for (auto& a : slots)
        for (auto& b : a)
            for (auto& t : b) t.counts.assign(static_cast<std::size_t>(n), 0);

    Rng rng(seed);
    for (long s = 0; s < num_samples; ++s) {
        const DefendantFeatures f = sample_defendant(cpts, rng);
        race.hit(static_cast<int>(f.race));
        age.hit(static_cast<int>(f.age_group));
        gender.hit(static_cast<int>(f.gender));
        transport[static_cast<std::size_t>(f.race)].hit(static_cast<int>(f.transportation));
        employment[static_cast<std::size_t>(f.race)].hit(static_cast<int>(f.employment));
        work[static_cast<std::size_t>(f.employment)].hit(static_cast<int>(f.work_hour));
        children[static_cast<std::size_t>(f.age_group)].hit(static_cast<int>(f.num_children));
        childcare[static_cast<std::size_t>(f.gender)][static_cast<std::size_t>(f.num_children)].hit(
            static_cast<int>(f.childcare));
        slots[static_cast<std::size_t>(f.transportation)][static_cast<std::size_t>(f.work_hour)]
             [static_cast<std::size_t>(f.childcare)]
                 .hit(sample_primary_slot(f, cpts, rng));
    }

    static constexpr std::array<const char*, 2> kRace = {"White", "NonWhite"};
    static constexpr std::array<const char*, 3> kAge = {"Under18", "18-54", "Above55"};
    static constexpr std::array<const char*, 2> kGender = {"Male", "Female"};
    static constexpr std::array<const char*, 2> kEmployment = {"Employed", "Unemployed"};
    static constexpr std::array<const char*, 4> kWork = {"Day", "Night", "Irregular", "NoShift"};
    static constexpr std::array<const char*, 2> kChildren = {"NoChild", "OnePlusChild"};
    static constexpr std::array<const char*, 2> kTransport = {"Public", "Private"};

    std::vector<ChiSquareRow> rows;
    rows.push_back(score_context("race", "-", race, cpts.race, significance));
    rows.push_back(score_context("age_group", "-", age, cpts.age_group, significance));
    rows.push_back(score_context("gender", "-", gender, cpts.gender, significance));
    for (int r = 0; r < 2; ++r) {
        rows.push_back(score_context("transportation|race", kRace[static_cast<std::size_t>(r)],
                                     transport[static_cast<std::size_t>(r)],
                                     cpts.transportation_by_race[static_cast<std::size_t>(r)], significance));
        rows.push_back(score_context("employment|race", kRace[static_cast<std::size_t>(r)],
                                     employment[static_cast<std::size_t>(r)],
                                     cpts.employment_by_race[static_cast<std::size_t>(r)], significance));
    }
    for (int e = 0; e < 2; ++e)
        rows.push_back(score_context("work_hour|employment", kEmployment[static_cast<std::size_t>(e)],
                                     work[static_cast<std::size_t>(e)],
                                     cpts.work_hour_by_employment[static_cast<std::size_t>(e)], significance));
    for (int a = 0; a < 3; ++a)
        rows.push_back(score_context("children|age", kAge[static_cast<std::size_t>(a)],
                                     children[static_cast<std::size_t>(a)],
                                     cpts.children_by_age[static_cast<std::size_t>(a)], significance));
    for (int g = 0; g < 2; ++g)
        for (int ch = 0; ch < 2; ++ch)
            rows.push_back(score_context(
                "childcare|gender,children",
                std::string(kGender[static_cast<std::size_t>(g)]) + "," + kChildren[static_cast<std::size_t>(ch)],
                childcare[static_cast<std::size_t>(g)][static_cast<std::size_t>(ch)],
                cpts.childcare_by_gender_children[static_cast<std::size_t>(g)][static_cast<std::size_t>(ch)],
                significance));
    for (int t = 0; t < 2; ++t)
        for (int w = 0; w < 4; ++w)
            for (int cc = 0; cc < 2; ++cc)
                rows.push_back(score_context(
                    "primary_slot|transportation,work_hour,childcare",
                    std::string(kTransport[static_cast<std::size_t>(t)]) + "," + kWork[static_cast<std::size_t>(w)] +
                        "," + (cc == 0 ? "NoObligation" : "HasObligation"),
                    slots[static_cast<std::size_t>(t)][static_cast<std::size_t>(w)][static_cast<std::size_t>(cc)],
                    cpts.slot_preference[static_cast<std::size_t>(t)][static_cast<std::size_t>(w)]
                                        [static_cast<std::size_t>(cc)],
                    significance));
    return rows;
}

} // namespace fairsched::datagen
