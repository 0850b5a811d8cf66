// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "linkforge/analytics.hpp"
#include "linkforge/blocking.hpp"
#include "linkforge/features.hpp"
#include "linkforge/mlp.hpp"

namespace linkforge::model {

/// Only the feed-forward network is implemented; the other families exist so
/// configs naming them fail with a clear message instead of a typo surprise.
enum class ModelFamily { dnn, boosted_tree, random_forest, wide_and_deep };

inline ModelFamily model_family_from_string(std::string_view s) {
    if (s == "dnn") return ModelFamily::dnn;
    if (s == "boosted_tree") return ModelFamily::boosted_tree;
    if (s == "random_forest") return ModelFamily::random_forest;
    if (s == "wide_and_deep") return ModelFamily::wide_and_deep;
    throw SchemaError("unknown model family: " + std::string(s));
}

struct CascadeConfig {
    ModelFamily family = ModelFamily::dnn;
    TrainConfig stage1_train{};                    // hidden {256, 64} by default
    TrainConfig stage2_train{.hidden_sizes = {32, 16}};
    std::size_t stage1_pos = 25000, stage1_neg = 25000;
    std::size_t stage2_pos = 10000, stage2_neg = 10000;
    double stage1_threshold = 0.5;
    double stage2_threshold = 0.5;
    double high_confidence_threshold = 0.7;
};

struct CascadeModel {
    MlpModel stage1;  // full feature layout
    MlpModel stage2;  // simplified layout plus stage-1 probability
    double stage1_threshold = 0.5;
    double stage2_threshold = 0.5;
    double high_confidence_threshold = 0.7;
};

// ---------------------------------------------------------------------------
// Balanced sampling without replacement
// ---------------------------------------------------------------------------

/// Picks pos_n positive and neg_n negative row indices, seed-determined.
/// Throws InsufficientData naming the shortfall.
inline std::vector<std::size_t> balanced_sample(const std::vector<bool>& labels,
                                                const std::vector<std::size_t>& pool,
                                                std::size_t pos_n, std::size_t neg_n,
                                                std::uint64_t seed) {
    std::vector<std::size_t> pos, neg;
    for (auto i : pool) {
        (labels[i] ? pos : neg).push_back(i);
    }
    if (pos.size() < pos_n || neg.size() < neg_n) {
        throw InsufficientData("balanced sample needs " + std::to_string(pos_n) + " positives and " +
                               std::to_string(neg_n) + " negatives, pool has " +
                               std::to_string(pos.size()) + " and " + std::to_string(neg.size()));
    }
    std::mt19937_64 rng(seed ^ 0xb5297a4d382e5a71ull);
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    std::vector<std::size_t> out(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(pos_n));
    out.insert(out.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(neg_n));
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Cascade training
// ---------------------------------------------------------------------------

/// Trains stage 1 on a balanced sample of all labeled candidates, applies it
/// to the whole set, then trains stage 2 on a balanced sample of the
/// stage-1-positive candidates using the simplified features plus p1.
inline CascadeModel train_cascade(const std::vector<std::vector<double>>& X,
                                  const std::vector<bool>& labels,
                                  const features::FeatureLayout& layout, const CascadeConfig& cfg,
                                  std::uint64_t seed) {
    if (cfg.family != ModelFamily::dnn) {
        throw Error("model family is interface-stubbed but not implemented; configure 'dnn'");
    }
    if (X.size() != labels.size() || X.empty()) {
        throw InsufficientData("cascade training needs aligned, nonempty features and labels");
    }

    std::vector<std::size_t> all(X.size());
    std::iota(all.begin(), all.end(), 0);
    const auto s1_idx = balanced_sample(labels, all, cfg.stage1_pos, cfg.stage1_neg, seed);

    std::vector<std::vector<double>> s1_x;
    std::vector<double> s1_y;
    s1_x.reserve(s1_idx.size());
    for (auto i : s1_idx) {
        s1_x.push_back(X[i]);
        s1_y.push_back(labels[i] ? 1.0 : 0.0);
    }

    CascadeModel cascade;
    cascade.stage1_threshold = cfg.stage1_threshold;
    cascade.stage2_threshold = cfg.stage2_threshold;
    cascade.high_confidence_threshold = cfg.high_confidence_threshold;
    cascade.stage1 = train_mlp(s1_x, s1_y, cfg.stage1_train, seed, layout);

    // Stage-1 predictions over the complete labeled set form the stage-2 pool.
    std::vector<std::size_t> positives;
    std::vector<double> p1(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) {
        p1[i] = cascade.stage1.predict(X[i]);
        if (p1[i] >= cfg.stage1_threshold) positives.push_back(i);
    }

    const auto s2_idx = balanced_sample(labels, positives, cfg.stage2_pos, cfg.stage2_neg, seed + 1);
    const auto s2_layout = features::simplified_layout(layout);
    std::vector<std::vector<double>> s2_x;
    std::vector<double> s2_y;
    s2_x.reserve(s2_idx.size());
    for (auto i : s2_idx) {
        s2_x.push_back(features::simplify_row(layout, X[i], p1[i]));
        s2_y.push_back(labels[i] ? 1.0 : 0.0);
    }
    cascade.stage2 = train_mlp(s2_x, s2_y, cfg.stage2_train, seed + 1, s2_layout);
    return cascade;
}

// ---------------------------------------------------------------------------
// Cascade application
// ---------------------------------------------------------------------------

struct AcceptedLink {
    std::string graduate_id;
    std::string pub_id;
    int author_position = 0;
    names::MatchClass match_class = names::MatchClass::exact;
    double stage1_prob = 0.0;
    double stage2_prob = 0.0;

    auto key() const { return std::tie(graduate_id, pub_id, author_position); }
};

struct StageConfusions {
    analytics::ConfusionMatrix stage1;  // over all candidates
    analytics::ConfusionMatrix stage2;  // over stage-1 positives
    analytics::ConfusionMatrix final;   // accepted links over all candidates
};

struct LinkedSample {
    std::vector<AcceptedLink> accepted;  // disambiguated, sorted by key
    std::vector<double> stage1_probs;    // aligned with the input candidates
    std::vector<std::optional<double>> stage2_probs;  // absent below stage-1 cut
    std::optional<StageConfusions> confusion;         // present when labels were

    std::map<std::string, std::vector<const AcceptedLink*>> by_graduate() const {
        std::map<std::string, std::vector<const AcceptedLink*>> out;
        for (const auto& l : accepted) out[l.graduate_id].push_back(&l);
        return out;
    }
};

/// Applies the cascade: p1 gate, stage-2 scoring with p1 as a feature, p2
/// gate, then one-graduate-per-author-slot disambiguation keeping the larger
/// p2 (ties break toward the lexicographically smaller graduate id).
inline LinkedSample run_cascade(const CascadeModel& cascade,
                                const std::vector<blocking::CandidateLink>& candidates,
                                const std::vector<std::vector<double>>& X) {
    if (candidates.size() != X.size()) {
        throw LayoutMismatch("candidates and feature rows must align");
    }
    LinkedSample out;
    out.stage1_probs.resize(candidates.size());
    out.stage2_probs.resize(candidates.size());

    std::vector<AcceptedLink> provisional;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double p1 = cascade.stage1.predict(X[i]);
        out.stage1_probs[i] = p1;
        if (p1 < cascade.stage1_threshold) continue;
        const auto row2 = features::simplify_row(cascade.stage1.layout, X[i], p1);
        const double p2 = cascade.stage2.predict(row2);
        out.stage2_probs[i] = p2;
        if (p2 < cascade.stage2_threshold) continue;
        provisional.push_back({candidates[i].graduate_id, candidates[i].pub_id,
                               candidates[i].author_position, candidates[i].match_class, p1, p2});
    }

    // Disambiguate author slots.
    std::map<std::pair<std::string, int>, const AcceptedLink*> winners;
    for (const auto& l : provisional) {
        auto [it, inserted] = winners.try_emplace({l.pub_id, l.author_position}, &l);
        if (inserted) continue;
        const AcceptedLink* cur = it->second;
        if (l.stage2_prob > cur->stage2_prob ||
            (l.stage2_prob == cur->stage2_prob && l.graduate_id < cur->graduate_id)) {
            it->second = &l;
        }
    }
    for (const auto& [slot, link] : winners) out.accepted.push_back(*link);
    std::sort(out.accepted.begin(), out.accepted.end(),
              [](const auto& a, const auto& b) { return a.key() < b.key(); });
    return out;
}

/// run_cascade plus per-stage confusion counts from candidate labels.
/// Unlabeled candidates are skipped in the confusion tallies.
inline LinkedSample run_cascade_labeled(const CascadeModel& cascade,
                                        const std::vector<blocking::CandidateLink>& candidates,
                                        const std::vector<std::vector<double>>& X) {
    LinkedSample out = run_cascade(cascade, candidates, X);
    StageConfusions conf;
    std::set<std::tuple<std::string, std::string, int>> accepted_keys;
    for (const auto& l : out.accepted) {
        accepted_keys.insert({l.graduate_id, l.pub_id, l.author_position});
    }
    bool any_label = false;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!candidates[i].label) continue;
        any_label = true;
        const bool truth = *candidates[i].label;
        const bool s1_pred = out.stage1_probs[i] >= cascade.stage1_threshold;
        if (s1_pred && truth) ++conf.stage1.tp;
        else if (s1_pred && !truth) ++conf.stage1.fp;
        else if (!s1_pred && truth) ++conf.stage1.fn;
        else ++conf.stage1.tn;
        if (s1_pred) {
            const bool s2_pred = out.stage2_probs[i] && *out.stage2_probs[i] >= cascade.stage2_threshold;
            if (s2_pred && truth) ++conf.stage2.tp;
            else if (s2_pred && !truth) ++conf.stage2.fp;
            else if (!s2_pred && truth) ++conf.stage2.fn;
            else ++conf.stage2.tn;
        }
        const bool final_pred = accepted_keys.count(
            {candidates[i].graduate_id, candidates[i].pub_id, candidates[i].author_position}) > 0;
        if (final_pred && truth) ++conf.final.tp;
        else if (final_pred && !truth) ++conf.final.fp;
        else if (!final_pred && truth) ++conf.final.fn;
        else ++conf.final.tn;
    }
    if (any_label) out.confusion = conf;
    return out;
}

// ---------------------------------------------------------------------------
// Cascade serialization
// ---------------------------------------------------------------------------

inline std::string serialize_cascade(const CascadeModel& c) {
    std::string out = "LFCM";
    detail::put_u32(out, 1);
    detail::put_f64(out, c.stage1_threshold);
    detail::put_f64(out, c.stage2_threshold);
    detail::put_f64(out, c.high_confidence_threshold);
    const std::string s1 = serialize_mlp(c.stage1);
    const std::string s2 = serialize_mlp(c.stage2);
    detail::put_u64(out, s1.size());
    out += s1;
    detail::put_u64(out, s2.size());
    out += s2;
    return out;
}

inline CascadeModel deserialize_cascade(const std::string& buf) {
    detail::Cursor cur{buf};
    if (cur.bytes(4) != "LFCM") throw SchemaError("bad cascade magic");
    if (cur.u32() != 1) throw SchemaError("unsupported cascade version");
    CascadeModel c;
    c.stage1_threshold = cur.f64();
    c.stage2_threshold = cur.f64();
    c.high_confidence_threshold = cur.f64();
    const auto s1_len = cur.u64();
    const std::string s1 = cur.bytes(s1_len);
    const auto s2_len = cur.u64();
    const std::string s2 = cur.bytes(s2_len);
    c.stage1 = deserialize_mlp(s1);
    c.stage2 = deserialize_mlp(s2);
    return c;
}

}  // namespace linkforge::model
