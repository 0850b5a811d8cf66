// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "linkforge/name_kit.hpp"
#include "linkforge/records.hpp"

namespace linkforge::blocking {

using json = nlohmann::json;

struct TemporalWindow {
    int lo = -5;  // pub_year - grad_year lower bound, inclusive
    int hi = 15;  // upper bound, inclusive

    bool contains(int gap) const { return gap >= lo && gap <= hi; }
};

struct CandidateLink {
    std::string graduate_id;
    std::string pub_id;
    int author_position = 0;
    names::MatchClass match_class = names::MatchClass::incompatible;
    std::optional<bool> label;  // ground truth, present only in validation corpora

    auto key() const { return std::tie(graduate_id, pub_id, author_position); }
    bool operator==(const CandidateLink&) const = default;
};

namespace detail {

inline const std::string& author_name(const records::Authorship& a) {
    return a.raw_name.empty() ? a.display_name : a.raw_name;
}

}  // namespace detail

/// Generates every candidate graduate/publication-author pair whose names are
/// compatible and whose publication year falls inside the window relative to
/// graduation. Blocking on the normalized last name is lossless here because
/// compatibility requires exact last-name agreement. Output is sorted by
/// (graduate_id, pub_id, author_position).
inline std::vector<CandidateLink> generate_candidates(const records::Corpus& corpus,
                                                      const names::NicknameTable& nicknames,
                                                      TemporalWindow window = {},
                                                      double jw_threshold = 0.90) {
    struct GradEntry {
        std::size_t index;
        names::NameParts parts;
    };
    struct AuthorEntry {
        std::size_t pub_index;
        int position;
        names::NameParts parts;
    };

    // std::map keeps block iteration order deterministic.
    std::map<std::string, std::vector<GradEntry>> grad_blocks;
    for (std::size_t i = 0; i < corpus.graduates().size(); ++i) {
        try {
            auto parts = names::parse_name(corpus.graduates()[i].raw_name);
            grad_blocks[parts.last].push_back({i, std::move(parts)});
        } catch (const UnparseableName&) {
        }
    }

    std::map<std::string, std::vector<AuthorEntry>> author_blocks;
    for (std::size_t i = 0; i < corpus.publications().size(); ++i) {
        for (const auto& a : corpus.publications()[i].authorships) {
            const auto& name = detail::author_name(a);
            if (name.empty()) continue;
            try {
                auto parts = names::parse_name(name);
                author_blocks[parts.last].push_back({i, a.position, std::move(parts)});
            } catch (const UnparseableName&) {
            }
        }
    }

    std::vector<CandidateLink> out;
    for (const auto& [last, grads] : grad_blocks) {
        auto it = author_blocks.find(last);
        if (it == author_blocks.end()) continue;
        for (const auto& g : grads) {
            const auto& grad = corpus.graduates()[g.index];
            for (const auto& a : it->second) {
                const auto& pub = corpus.publications()[a.pub_index];
                if (!window.contains(pub.pub_year - grad.grad_year)) continue;
                const auto cls = names::names_compatible(g.parts, a.parts, nicknames, jw_threshold);
                if (cls == names::MatchClass::incompatible) continue;
                out.push_back({grad.graduate_id, pub.pub_id, a.position, cls, std::nullopt});
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.key() < y.key(); });
    return out;
}

/// Attaches ground-truth labels from authenticated registry ids: true when
/// both sides carry the same id, false when both carry different ids, absent
/// when either side has none.
inline void label_candidates(std::vector<CandidateLink>& candidates, const records::Corpus& corpus) {
    for (auto& c : candidates) {
        c.label.reset();
        const auto* grad = corpus.find_graduate(c.graduate_id);
        const auto* pub = corpus.find_publication(c.pub_id);
        if (!grad || !pub || !grad->registry_id) continue;
        for (const auto& a : pub->authorships) {
            if (a.position != c.author_position) continue;
            if (a.registry_id) c.label = (*grad->registry_id == *a.registry_id);
            break;
        }
    }
}

inline json candidate_to_json(const CandidateLink& c) {
    json j{{"graduate_id", c.graduate_id},
           {"pub_id", c.pub_id},
           {"author_position", c.author_position},
           {"match_class", names::to_string(c.match_class)}};
    if (c.label) j["label"] = *c.label;
    return j;
}

inline CandidateLink candidate_from_json(const json& j) {
    CandidateLink c;
    c.graduate_id = j.at("graduate_id").get<std::string>();
    c.pub_id = j.at("pub_id").get<std::string>();
    c.author_position = j.at("author_position").get<int>();
    c.match_class = names::match_class_from_string(j.at("match_class").get<std::string>());
    if (j.contains("label") && !j["label"].is_null()) c.label = j["label"].get<bool>();
    return c;
}

}  // namespace linkforge::blocking
