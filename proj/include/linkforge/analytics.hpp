// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "linkforge/errors.hpp"
#include "linkforge/migration.hpp"

namespace linkforge::analytics {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Classification metrics
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
    std::size_t predicted_positive() const { return tp + fp; }
    std::size_t actual_positive() const { return tp + fn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

struct MetricReport {
    double precision = 0.0;
    double recall = 0.0;
    double accuracy = 0.0;
    double f1 = 0.0;
    std::optional<double> log_loss;  // needs probabilities
    std::optional<double> roc_auc;   // absent for degenerate labels

    json to_json() const {
        json j{{"precision", precision}, {"recall", recall}, {"accuracy", accuracy}, {"f1", f1}};
        if (log_loss) j["log_loss"] = *log_loss;
        if (roc_auc) j["roc_auc"] = *roc_auc;
        return j;
    }
};

inline MetricReport metrics_from_confusion(const ConfusionMatrix& c) {
    MetricReport r;
    r.precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    r.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    r.accuracy = c.total() == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    r.f1 = r.precision + r.recall == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

/// Rank-based AUC, equivalent to trapezoidal integration of the ROC curve
/// with tied scores averaged. Returns nothing when only one class is present.
inline std::optional<double> roc_auc(const std::vector<double>& probabilities,
                                     const std::vector<bool>& labels) {
    std::size_t n_pos = 0;
    for (bool b : labels) n_pos += b ? 1 : 0;
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<std::size_t> idx(labels.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return probabilities[a] < probabilities[b]; });

    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && probabilities[idx[j]] == probabilities[idx[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[idx[k]]) pos_rank_sum += avg_rank;
        }
        i = j;
    }
    return (pos_rank_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// Thresholded confusion counts plus the full metric report. Probabilities
/// are clipped to [1e-15, 1-1e-15] inside the log loss.
inline std::pair<ConfusionMatrix, MetricReport> classification_metrics(
    const std::vector<double>& probabilities, const std::vector<bool>& labels, double threshold) {
    if (probabilities.size() != labels.size()) {
        throw SchemaError("probabilities and labels must have equal length");
    }
    if (probabilities.empty()) throw SchemaError("cannot score an empty sample");
    ConfusionMatrix c;
    double ll = 0.0;
    constexpr double kEps = 1e-15;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        const double p = probabilities[i];
        const bool pred = p >= threshold;
        if (pred && labels[i]) ++c.tp;
        else if (pred && !labels[i]) ++c.fp;
        else if (!pred && labels[i]) ++c.fn;
        else ++c.tn;
        const double pc = std::min(std::max(p, kEps), 1.0 - kEps);
        ll -= labels[i] ? std::log(pc) : std::log(1.0 - pc);
    }
    MetricReport r = metrics_from_confusion(c);
    r.log_loss = ll / static_cast<double>(probabilities.size());
    r.roc_auc = roc_auc(probabilities, labels);
    return {c, r};
}

// ---------------------------------------------------------------------------
// Stratified error analysis
// ---------------------------------------------------------------------------

/// One labeled link as seen by the stratified analysis. Pass whichever link
/// set is under study (candidates, accepted links, high-confidence links).
struct LabeledLink {
    std::string graduate_id;
    std::string group;  // e.g. ethnicity label; empty groups under "unknown"
    bool label = false;
};

struct FpHistogram {
    std::array<std::size_t, 10> bins{};  // [0,0.1) ... [0.9,1.0], last bin closed
    std::size_t graduates = 0;

    void add(double rate) {
        std::size_t b = static_cast<std::size_t>(rate * 10.0);
        if (b >= 10) b = 9;
        ++bins[b];
        ++graduates;
    }
};

struct StratifiedReport {
    std::map<std::string, double> true_match_rate;        // per group
    std::map<std::string, std::size_t> group_link_count;  // per group
    FpHistogram overall;
    std::map<std::string, FpHistogram> by_group;
    std::map<std::string, double> fp_rate_by_graduate;
};

/// Per-group true-match rates over the passed links and per-graduate false
/// positive rates (share of that graduate's links that are wrong), overall
/// and per group.
inline StratifiedReport stratified_error_rates(const std::vector<LabeledLink>& links) {
    StratifiedReport out;
    std::map<std::string, std::pair<std::size_t, std::size_t>> group_counts;  // true, total
    struct PerGrad {
        std::string group;
        std::size_t wrong = 0, total = 0;
    };
    std::map<std::string, PerGrad> per_grad;
    for (const auto& l : links) {
        const std::string group = l.group.empty() ? "unknown" : l.group;
        auto& gc = group_counts[group];
        if (l.label) ++gc.first;
        ++gc.second;
        auto& pg = per_grad[l.graduate_id];
        pg.group = group;
        if (!l.label) ++pg.wrong;
        ++pg.total;
    }
    for (const auto& [group, counts] : group_counts) {
        out.true_match_rate[group] =
            counts.second == 0 ? 0.0 : static_cast<double>(counts.first) / static_cast<double>(counts.second);
        out.group_link_count[group] = counts.second;
    }
    for (const auto& [gid, pg] : per_grad) {
        const double rate = static_cast<double>(pg.wrong) / static_cast<double>(pg.total);
        out.fp_rate_by_graduate[gid] = rate;
        out.overall.add(rate);
        out.by_group[pg.group].add(rate);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cohort emigration series
// ---------------------------------------------------------------------------

/// Inputs per eligible graduate (already filtered to min linked publications
/// upstream, or filtered here through linked_pub_count).
struct GraduateOutcome {
    std::string graduate_id;
    int grad_year = 0;
    std::string field;
    std::size_t linked_pub_count = 0;
    // Events under the three selected parametrizations.
    migration::MigrationEvent base;
    migration::MigrationEvent high_precision;
    migration::MigrationEvent high_recall;
};

struct CohortCell {
    double share = 0.0;       // base parametrization
    double lo = 0.0, hi = 0.0;  // envelope over the three parametrizations
    std::size_t eligible = 0;
};

struct CohortSeries {
    std::vector<int> horizons{5, 10, 15};
    // cohort year -> horizon -> cell; a missing horizon was not observable
    std::map<int, std::map<int, CohortCell>> cells;
    // cohort -> horizon -> region -> share of eligible graduates (base events)
    std::map<int, std::map<int, std::map<std::string, double>>> destination_regions;
    // field -> horizon -> share over all cohorts where the horizon is observable
    std::map<std::string, std::map<int, CohortCell>> by_field;
};

namespace detail {

inline bool migrated_by(const migration::MigrationEvent& ev, int horizon) {
    return ev.migrated && ev.onset_relative_year && *ev.onset_relative_year <= horizon;
}

}  // namespace detail

/// Emigration share per cohort and horizon with sensitivity bounds from the
/// high-precision and high-recall parametrizations. A cohort/horizon cell is
/// emitted only when the horizon fits inside the observed data
/// (cohort + horizon <= data_end_year).
inline CohortSeries cohort_emigration(const std::vector<GraduateOutcome>& graduates,
                                      std::size_t min_pubs, int data_end_year,
                                      const std::map<std::string, std::string>& region_of,
                                      const std::vector<int>& horizons = {5, 10, 15}) {
    CohortSeries out;
    out.horizons = horizons;

    std::map<int, std::vector<const GraduateOutcome*>> cohorts;
    for (const auto& g : graduates) {
        if (g.linked_pub_count >= min_pubs) cohorts[g.grad_year].push_back(&g);
    }

    struct FieldAgg {
        std::size_t eligible = 0, base = 0, hp = 0, hr = 0;
    };
    std::map<std::string, std::map<int, FieldAgg>> field_agg;

    for (const auto& [year, members] : cohorts) {
        for (int h : horizons) {
            if (year + h > data_end_year) continue;  // cohort too recent for this horizon
            CohortCell cell;
            cell.eligible = members.size();
            std::size_t base = 0, hp = 0, hr = 0;
            std::map<std::string, std::size_t> region_counts;
            for (const auto* g : members) {
                if (detail::migrated_by(g->base, h)) {
                    ++base;
                    std::string region = "other";
                    if (g->base.destination) {
                        auto it = region_of.find(*g->base.destination);
                        if (it != region_of.end()) region = it->second;
                    }
                    ++region_counts[region];
                }
                if (detail::migrated_by(g->high_precision, h)) ++hp;
                if (detail::migrated_by(g->high_recall, h)) ++hr;
                auto& fa = field_agg[g->field.empty() ? "unknown" : g->field][h];
                ++fa.eligible;
                if (detail::migrated_by(g->base, h)) ++fa.base;
                if (detail::migrated_by(g->high_precision, h)) ++fa.hp;
                if (detail::migrated_by(g->high_recall, h)) ++fa.hr;
            }
            const double n = static_cast<double>(members.size());
            cell.share = static_cast<double>(base) / n;
            const double a = static_cast<double>(hp) / n, b = static_cast<double>(hr) / n;
            cell.lo = std::min({cell.share, a, b});
            cell.hi = std::max({cell.share, a, b});
            out.cells[year][h] = cell;
            auto& regions = out.destination_regions[year][h];
            for (const auto& [region, count] : region_counts) {
                regions[region] = static_cast<double>(count) / n;
            }
        }
    }

    for (const auto& [field, by_h] : field_agg) {
        for (const auto& [h, agg] : by_h) {
            CohortCell cell;
            cell.eligible = agg.eligible;
            const double n = static_cast<double>(agg.eligible);
            cell.share = static_cast<double>(agg.base) / n;
            cell.lo = std::min({cell.share, static_cast<double>(agg.hp) / n, static_cast<double>(agg.hr) / n});
            cell.hi = std::max({cell.share, static_cast<double>(agg.hp) / n, static_cast<double>(agg.hr) / n});
            out.by_field[field][h] = cell;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Series correlation
// ---------------------------------------------------------------------------

/// Pearson correlation over the overlapping years of two annual series.
inline double series_correlation(const std::map<int, double>& a, const std::map<int, double>& b) {
    std::vector<std::pair<double, double>> xy;
    for (const auto& [year, va] : a) {
        auto it = b.find(year);
        if (it != b.end()) xy.emplace_back(va, it->second);
    }
    if (xy.size() < 3) {
        throw InsufficientOverlap("series overlap on " + std::to_string(xy.size()) +
                                  " years; need at least 3");
    }
    const double n = static_cast<double>(xy.size());
    double mx = 0, my = 0;
    for (const auto& [x, y] : xy) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (const auto& [x, y] : xy) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw ZeroVariance("a series is constant over the overlap");
    return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// Stayer / leaver comparison
// ---------------------------------------------------------------------------

/// Early-career outputs for one graduate: publications in the first five
/// post-PhD years and the impact totals accruing to them.
struct EarlyCareer {
    std::string graduate_id;
    bool leaver = false;  // migrated with onset within five years
    std::size_t publications = 0;
    std::size_t scientific_citations = 0;
    std::size_t patent_citations = 0;
    std::size_t patent_paper_pairs = 0;
};

struct GroupStats {
    std::size_t n = 0;
    double mean_publications = 0.0;
    // Per-publication rates, conditional on having any of the numerator.
    double citation_rate = 0.0;
    double patent_citation_rate = 0.0;
    double pair_rate = 0.0;
    // Share of graduates with any of the numerator at all.
    double any_citations = 0.0;
    double any_patent_citations = 0.0;
    double any_pairs = 0.0;

    json to_json() const {
        return json{{"n", n},
                    {"mean_publications", mean_publications},
                    {"citation_rate", citation_rate},
                    {"patent_citation_rate", patent_citation_rate},
                    {"pair_rate", pair_rate},
                    {"any_citations", any_citations},
                    {"any_patent_citations", any_patent_citations},
                    {"any_pairs", any_pairs}};
    }
};

struct GroupComparison {
    GroupStats stayers;
    GroupStats leavers;
};

namespace detail {

inline GroupStats summarize(const std::vector<const EarlyCareer*>& members) {
    GroupStats s;
    s.n = members.size();
    double mean_rate_c = 0, mean_rate_pc = 0, mean_rate_pp = 0;
    std::size_t n_c = 0, n_pc = 0, n_pp = 0, any_c = 0, any_pc = 0, any_pp = 0, with_pubs = 0;
    for (const auto* m : members) {
        s.mean_publications += static_cast<double>(m->publications);
        if (m->publications == 0) continue;  // no denominator
        ++with_pubs;
        const double pubs = static_cast<double>(m->publications);
        if (m->scientific_citations > 0) {
            ++any_c;
            mean_rate_c += static_cast<double>(m->scientific_citations) / pubs;
            ++n_c;
        }
        if (m->patent_citations > 0) {
            ++any_pc;
            mean_rate_pc += static_cast<double>(m->patent_citations) / pubs;
            ++n_pc;
        }
        if (m->patent_paper_pairs > 0) {
            ++any_pp;
            mean_rate_pp += static_cast<double>(m->patent_paper_pairs) / pubs;
            ++n_pp;
        }
    }
    s.mean_publications /= static_cast<double>(s.n);
    s.citation_rate = n_c == 0 ? 0.0 : mean_rate_c / static_cast<double>(n_c);
    s.patent_citation_rate = n_pc == 0 ? 0.0 : mean_rate_pc / static_cast<double>(n_pc);
    s.pair_rate = n_pp == 0 ? 0.0 : mean_rate_pp / static_cast<double>(n_pp);
    if (with_pubs > 0) {
        s.any_citations = static_cast<double>(any_c) / static_cast<double>(with_pubs);
        s.any_patent_citations = static_cast<double>(any_pc) / static_cast<double>(with_pubs);
        s.any_pairs = static_cast<double>(any_pp) / static_cast<double>(with_pubs);
    }
    return s;
}

}  // namespace detail

/// Descriptive means by stayer/leaver status. Rates are per publication and
/// conditional on any; shares count graduates with any at all.
inline GroupComparison group_compare(const std::vector<EarlyCareer>& graduates) {
    std::vector<const EarlyCareer*> stayers, leavers;
    for (const auto& g : graduates) {
        (g.leaver ? leavers : stayers).push_back(&g);
    }
    if (stayers.empty()) throw EmptyGroup("no stayers in comparison sample");
    if (leavers.empty()) throw EmptyGroup("no leavers in comparison sample");
    return {detail::summarize(stayers), detail::summarize(leavers)};
}

// ---------------------------------------------------------------------------
// Patent citation shares
// ---------------------------------------------------------------------------

enum class ScienceCategory { pre_emigration, post_emigration, never_leaver, non_us };

inline const char* to_string(ScienceCategory c) {
    switch (c) {
        case ScienceCategory::pre_emigration: return "pre_emigration";
        case ScienceCategory::post_emigration: return "post_emigration";
        case ScienceCategory::never_leaver: return "never_leaver";
        case ScienceCategory::non_us: return "non_us";
    }
    return "non_us";
}

/// One patent citation joined to its cited publication's classification.
struct ClassifiedCitation {
    int filing_year = 0;
    std::string assignee_country;
    ScienceCategory category = ScienceCategory::non_us;
    // Destination of the cited publication's graduate, for pre/post science.
    std::optional<std::string> destination;
};

struct ShareCell {
    std::size_t count = 0;
    std::size_t total = 0;
    double share = 0.0;
};

struct CitationShareSeries {
    // (year, category, group) -> cell; groups come from the grouping map,
    // ungrouped countries fall back to their own code.
    std::map<std::tuple<int, std::string, std::string>, ShareCell> shares;
    // (year, category in {pre, post}) -> destination-country share
    std::map<std::pair<int, std::string>, ShareCell> destination_shares;
};

/// Shares of annual patent citations by assignee-country group within each
/// cited-science category, plus the destination-country share for emigrant
/// science. With the identity grouping the shares over countries partition
/// each (year, category) and sum to one.
inline CitationShareSeries citation_shares(const std::vector<ClassifiedCitation>& citations,
                                           const std::map<std::string, std::string>& grouping = {}) {
    CitationShareSeries out;
    std::map<std::pair<int, std::string>, std::size_t> totals;
    for (const auto& c : citations) {
        const std::string cat = to_string(c.category);
        ++totals[{c.filing_year, cat}];
        std::string group = c.assignee_country;
        auto it = grouping.find(c.assignee_country);
        if (it != grouping.end()) group = it->second;
        ++out.shares[{c.filing_year, cat, group}].count;
        if (c.category == ScienceCategory::pre_emigration ||
            c.category == ScienceCategory::post_emigration) {
            auto& cell = out.destination_shares[{c.filing_year, cat}];
            ++cell.total;
            if (c.destination && *c.destination == c.assignee_country) ++cell.count;
        }
    }
    for (auto& [key, cell] : out.shares) {
        cell.total = totals[{std::get<0>(key), std::get<1>(key)}];
        cell.share = cell.total == 0 ? 0.0 : static_cast<double>(cell.count) / static_cast<double>(cell.total);
    }
    for (auto& [key, cell] : out.destination_shares) {
        cell.share = cell.total == 0 ? 0.0 : static_cast<double>(cell.count) / static_cast<double>(cell.total);
    }
    return out;
}

}  // namespace linkforge::analytics
