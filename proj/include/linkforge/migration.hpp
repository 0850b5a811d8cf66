// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "linkforge/errors.hpp"

namespace linkforge::migration {

using json = nlohmann::json;

// Twenty-year observation window in years relative to graduation.
inline constexpr int kRelYearLo = -5;
inline constexpr int kRelYearHi = 15;
inline constexpr std::size_t kWindowLen = static_cast<std::size_t>(kRelYearHi - kRelYearLo + 1);

enum class YearClass { domestic, foreign, unknown };

/// One linked publication as the series builder sees it.
struct PubObservation {
    int relative_year = 0;               // pub_year - grad_year
    double probability = 1.0;            // final match probability
    std::vector<std::string> countries;  // resolved countries, may be empty
};

/// Per-year country counts for one graduate over the relative-year window.
struct LocationSeries {
    std::string graduate_id;
    double prob_threshold = 0.5;
    std::array<std::map<std::string, int>, kWindowLen> counts;

    static std::size_t index_of(int rel_year) {
        return static_cast<std::size_t>(rel_year - kRelYearLo);
    }

    int us_count(int rel_year) const {
        const auto& m = counts[index_of(rel_year)];
        auto it = m.find("US");
        return it == m.end() ? 0 : it->second;
    }

    int foreign_count(int rel_year) const {
        int n = 0;
        for (const auto& [code, c] : counts[index_of(rel_year)]) {
            if (code != "US") n += c;
        }
        return n;
    }

    /// Majority rule: foreign when foreign-affiliated publications outnumber
    /// US-affiliated ones; a year without resolved publications is unknown.
    YearClass classify(int rel_year) const {
        const int us = us_count(rel_year);
        const int fr = foreign_count(rel_year);
        if (us + fr == 0) return YearClass::unknown;
        return fr > us ? YearClass::foreign : YearClass::domestic;
    }

    /// Modal non-US country for a year; alphabetically first on count ties.
    std::optional<std::string> dominant_foreign(int rel_year) const {
        const std::map<std::string, int>& m = counts[index_of(rel_year)];
        std::optional<std::string> best;
        int best_count = 0;
        for (const auto& [code, c] : m) {
            if (code == "US") continue;
            if (c > best_count) {
                best = code;
                best_count = c;
            }
        }
        return best;
    }
};

/// Builds the per-year country counts from linked publications at or above
/// the probability threshold. A publication contributes one count for each
/// distinct country it carries; observations outside the window are ignored.
inline LocationSeries build_series(const std::string& graduate_id,
                                   const std::vector<PubObservation>& pubs, double prob_threshold) {
    LocationSeries s;
    s.graduate_id = graduate_id;
    s.prob_threshold = prob_threshold;
    for (const auto& p : pubs) {
        if (p.probability < prob_threshold) continue;
        if (p.relative_year < kRelYearLo || p.relative_year > kRelYearHi) continue;
        std::set<std::string> distinct(p.countries.begin(), p.countries.end());
        for (const auto& c : distinct) {
            ++s.counts[LocationSeries::index_of(p.relative_year)][c];
        }
    }
    return s;
}

struct MigrationParams {
    double prob_threshold = 0.5;
    int persistence = 1;  // k consecutive foreign years required

    auto key() const { return std::make_pair(prob_threshold, persistence); }
    bool operator==(const MigrationParams&) const = default;
};

struct MigrationEvent {
    std::string graduate_id;
    bool migrated = false;
    std::optional<int> onset_relative_year;
    std::optional<std::string> destination;
    MigrationParams params;

    json to_json() const {
        json j{{"graduate_id", graduate_id},
               {"migrated", migrated},
               {"prob_threshold", params.prob_threshold},
               {"persistence", params.persistence}};
        if (onset_relative_year) j["onset_relative_year"] = *onset_relative_year;
        if (destination) j["destination"] = *destination;
        return j;
    }

    static MigrationEvent from_json(const json& j) {
        MigrationEvent ev;
        ev.graduate_id = j.at("graduate_id").get<std::string>();
        ev.migrated = j.at("migrated").get<bool>();
        ev.params.prob_threshold = j.at("prob_threshold").get<double>();
        ev.params.persistence = j.at("persistence").get<int>();
        if (j.contains("onset_relative_year")) ev.onset_relative_year = j["onset_relative_year"].get<int>();
        if (j.contains("destination")) ev.destination = j["destination"].get<std::string>();
        return ev;
    }
};

/// Detects a migration event: a run of at least k consecutive foreign years
/// anywhere in relative years 0..15. Unknown years break runs. The onset is
/// the start of the longest qualifying run (earliest on ties) and the
/// destination is the modal foreign country of the onset year.
inline MigrationEvent detect_migration(const LocationSeries& series, int k) {
    MigrationEvent ev;
    ev.graduate_id = series.graduate_id;
    ev.params = {series.prob_threshold, k};

    int best_start = -1, best_len = 0;
    int run_start = -1, run_len = 0;
    for (int year = 0; year <= kRelYearHi; ++year) {
        if (series.classify(year) == YearClass::foreign) {
            if (run_len == 0) run_start = year;
            ++run_len;
            if (run_len > best_len) {
                best_len = run_len;
                best_start = run_start;
            }
        } else {
            run_len = 0;
        }
    }

    if (best_len >= k && best_start >= 0) {
        ev.migrated = true;
        ev.onset_relative_year = best_start;
        ev.destination = series.dominant_foreign(best_start);
    }
    return ev;
}

// ---------------------------------------------------------------------------
// Parameter-grid validation against labeled histories
// ---------------------------------------------------------------------------

struct GridSpec {
    std::vector<double> thresholds{0.5, 0.6, 0.7, 0.8};
    std::vector<int> persistence{1, 2, 3, 4};
    std::vector<std::size_t> strata{5, 10, 15};  // minimum linked publications
};

struct GridCell {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    bool defined = false;  // false when the stratum is empty

    double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
    double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
    double f1() const {
        const double p = precision(), r = recall();
        return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    }
};

/// One graduate in the validation sample: the series at every threshold, the
/// linked-publication count for stratification, and the labeled truth.
struct LabeledSeries {
    std::string graduate_id;
    std::size_t linked_pub_count = 0;
    bool truth_migrated = false;
    std::map<double, LocationSeries> series_by_threshold;
};

struct GridResult {
    GridSpec spec;
    // grids[stratum][threshold_index][persistence_index]
    std::vector<std::vector<std::vector<GridCell>>> grids;
    MigrationParams base;            // grid-maximal F1 on the first stratum
    MigrationParams high_precision;  // grid-maximal precision
    MigrationParams high_recall;     // grid-maximal recall
    std::vector<std::string> notes;  // EmptyStratum and similar conditions

    const GridCell& cell(std::size_t stratum_idx, std::size_t t_idx, std::size_t k_idx) const {
        return grids[stratum_idx][t_idx][k_idx];
    }
};

/// Evaluates every (threshold, persistence) pair against labeled histories,
/// per publication-count stratum, and selects base / high-precision /
/// high-recall parametrizations on the first stratum. Scan order breaks ties
/// (lower threshold first, then lower persistence).
inline GridResult grid_validate(const std::vector<LabeledSeries>& sample, const GridSpec& spec = {}) {
    GridResult out;
    out.spec = spec;
    out.grids.assign(spec.strata.size(),
                     std::vector<std::vector<GridCell>>(
                         spec.thresholds.size(), std::vector<GridCell>(spec.persistence.size())));

    for (std::size_t s = 0; s < spec.strata.size(); ++s) {
        const std::size_t min_pubs = spec.strata[s];
        bool any = false;
        for (const auto& g : sample) {
            if (g.linked_pub_count < min_pubs) continue;
            any = true;
            for (std::size_t t = 0; t < spec.thresholds.size(); ++t) {
                auto it = g.series_by_threshold.find(spec.thresholds[t]);
                if (it == g.series_by_threshold.end()) {
                    throw SchemaError("labeled series for " + g.graduate_id +
                                      " lacks threshold " + std::to_string(spec.thresholds[t]));
                }
                for (std::size_t k = 0; k < spec.persistence.size(); ++k) {
                    const auto ev = detect_migration(it->second, spec.persistence[k]);
                    auto& cell = out.grids[s][t][k];
                    if (ev.migrated && g.truth_migrated) ++cell.tp;
                    else if (ev.migrated && !g.truth_migrated) ++cell.fp;
                    else if (!ev.migrated && g.truth_migrated) ++cell.fn;
                    else ++cell.tn;
                }
            }
        }
        for (auto& row : out.grids[s]) {
            for (auto& cell : row) cell.defined = any;
        }
        if (!any) {
            out.notes.push_back("empty stratum: no graduates with at least " +
                                std::to_string(min_pubs) + " linked publications");
        }
    }

    double best_f1 = -1.0, best_p = -1.0, best_r = -1.0;
    for (std::size_t t = 0; t < spec.thresholds.size(); ++t) {
        for (std::size_t k = 0; k < spec.persistence.size(); ++k) {
            const auto& cell = out.grids[0][t][k];
            if (!cell.defined) continue;
            const MigrationParams params{spec.thresholds[t], spec.persistence[k]};
            if (cell.f1() > best_f1) {
                best_f1 = cell.f1();
                out.base = params;
            }
            if (cell.precision() > best_p) {
                best_p = cell.precision();
                out.high_precision = params;
            }
            if (cell.recall() > best_r) {
                best_r = cell.recall();
                out.high_recall = params;
            }
        }
    }
    return out;
}

}  // namespace linkforge::migration
