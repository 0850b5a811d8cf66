// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "linkforge/blocking.hpp"
#include "linkforge/name_kit.hpp"
#include "linkforge/records.hpp"

namespace linkforge::features {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Embedding distance primitives
// ---------------------------------------------------------------------------

inline void check_dims(std::span<const double> d, std::span<const double> p) {
    if (d.size() != p.size()) {
        throw DimensionError("vector dimensions differ: " + std::to_string(d.size()) + " vs " +
                             std::to_string(p.size()));
    }
}

inline double euclidean(std::span<const double> d, std::span<const double> p) {
    check_dims(d, p);
    double sum = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double x = d[i] - p[i];
        sum += x * x;
    }
    return std::sqrt(sum);
}

inline double manhattan(std::span<const double> d, std::span<const double> p) {
    check_dims(d, p);
    double sum = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) sum += std::fabs(d[i] - p[i]);
    return sum;
}

inline std::vector<double> diff(std::span<const double> d, std::span<const double> p) {
    check_dims(d, p);
    std::vector<double> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = d[i] - p[i];
    return out;
}

inline std::vector<double> hadamard(std::span<const double> d, std::span<const double> p) {
    check_dims(d, p);
    std::vector<double> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = d[i] * p[i];
    return out;
}

// ---------------------------------------------------------------------------
// Feature layout descriptor
// ---------------------------------------------------------------------------

struct FeatureLayout {
    struct Block {
        std::string name;
        std::size_t width = 1;
        bool operator==(const Block&) const = default;
    };
    std::vector<Block> blocks;

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& b : blocks) n += b.width;
        return n;
    }

    /// Offset of a named block, or -1 when absent.
    std::ptrdiff_t offset_of(std::string_view name) const {
        std::size_t off = 0;
        for (const auto& b : blocks) {
            if (b.name == name) return static_cast<std::ptrdiff_t>(off);
            off += b.width;
        }
        return -1;
    }

    bool has(std::string_view name) const { return offset_of(name) >= 0; }

    json to_json() const {
        json arr = json::array();
        for (const auto& b : blocks) arr.push_back({{"name", b.name}, {"width", b.width}});
        return arr;
    }

    static FeatureLayout from_json(const json& arr) {
        FeatureLayout l;
        for (const auto& b : arr) {
            l.blocks.push_back({b.at("name").get<std::string>(), b.at("width").get<std::size_t>()});
        }
        return l;
    }

    bool operator==(const FeatureLayout&) const = default;
};

/// Full first-stage layout for a given embedding dimension and ethnicity
/// vocabulary (the one-hot carries an extra unknown slot).
inline FeatureLayout stage1_layout(std::size_t embedding_dim,
                                   const std::vector<std::string>& ethnicity_vocab) {
    FeatureLayout l;
    l.blocks = {
        {"cosine", 1},
        {"manhattan_scaled", 1},
        {"diff", embedding_dim},
        {"hadamard", embedding_dim},
        {"direct_self_cite", 1},
        {"indirect_self_cite", 1},
        {"advisor_coauthor", 1},
        {"advisor_cited", 1},
        {"has_advisor_info", 1},
        {"has_committee_info", 1},
        {"jw_display", 1},
        {"jw_raw", 1},
        {"nickname_match", 1},
        {"log_freq_first", 1},
        {"log_freq_last", 1},
        {"log_freq_full", 1},
        {"ethnicity", ethnicity_vocab.size() + 1},
        {"year_gap", 1},
        {"missing_flags", 4},  // embedding, citations, advisor, committee
    };
    return l;
}

/// Second-stage layout: everything except the diff and hadamard vectors, plus
/// the first-stage probability as the final feature.
inline FeatureLayout simplified_layout(const FeatureLayout& full) {
    FeatureLayout l;
    for (const auto& b : full.blocks) {
        if (b.name == "diff" || b.name == "hadamard" || b.name == "stage1_prob") continue;
        l.blocks.push_back(b);
    }
    l.blocks.push_back({"stage1_prob", 1});
    return l;
}

/// Projects a full-layout row onto the simplified layout, appending p1.
inline std::vector<double> simplify_row(const FeatureLayout& full, std::span<const double> row,
                                        double stage1_prob) {
    std::vector<double> out;
    out.reserve(row.size());
    std::size_t off = 0;
    for (const auto& b : full.blocks) {
        if (b.name != "diff" && b.name != "hadamard") {
            for (std::size_t i = 0; i < b.width; ++i) out.push_back(row[off + i]);
        }
        off += b.width;
    }
    out.push_back(stage1_prob);
    return out;
}

// ---------------------------------------------------------------------------
// Citation network indicators
// ---------------------------------------------------------------------------

struct CitationIndicators {
    bool direct_self_cite = false;
    bool indirect_self_cite = false;
    bool advisor_coauthor = false;
    bool advisor_cited = false;
    bool has_advisor_info = false;
    bool has_committee_info = false;
    bool missing_citations = false;
    bool missing_advisor = false;
    bool missing_committee = false;
};

namespace detail {

// Self-citations must precede graduation by at most this many years.
inline constexpr int kSelfCiteYearsBefore = 5;

/// Word-boundary containment of the folded institution in the folded text.
inline bool institution_aligned(const std::string& folded_institution, std::string_view affiliation) {
    if (folded_institution.size() <= 2) return false;  // just the pad spaces
    const std::string hay = names::fold_text(affiliation);
    return hay.find(folded_institution) != std::string::npos;
}

struct ParsedAuthor {
    int position;
    names::NameParts parts;
    const records::Authorship* authorship;
};

inline std::vector<ParsedAuthor> parse_authors(const records::PublicationRecord& pub) {
    std::vector<ParsedAuthor> out;
    for (const auto& a : pub.authorships) {
        const auto& name = a.raw_name.empty() ? a.display_name : a.raw_name;
        if (name.empty()) continue;
        try {
            out.push_back({a.position, names::parse_name(name), &a});
        } catch (const UnparseableName&) {
        }
    }
    return out;
}

/// A cited publication "aligns" with the graduate when some author is name
/// compatible, that author's affiliation contains the graduate's institution,
/// and the publication precedes graduation by at most kSelfCiteYearsBefore.
inline bool publication_aligns(const records::PublicationRecord& cited,
                               const names::NameParts& grad_parts,
                               const std::string& folded_institution, int grad_year,
                               const names::NicknameTable& nicknames) {
    if (cited.pub_year < grad_year - kSelfCiteYearsBefore || cited.pub_year > grad_year) return false;
    for (const auto& a : cited.authorships) {
        const auto& name = a.raw_name.empty() ? a.display_name : a.raw_name;
        if (name.empty()) continue;
        names::NameParts parts;
        try {
            parts = names::parse_name(name);
        } catch (const UnparseableName&) {
            continue;
        }
        if (names::names_compatible(grad_parts, parts, nicknames) == names::MatchClass::incompatible)
            continue;
        if (institution_aligned(folded_institution, a.affiliation_string)) return true;
    }
    return false;
}

inline bool any_mentor_match(const std::vector<names::NameParts>& mentors,
                             const names::NameParts& author, const std::string& folded_institution,
                             const std::string& affiliation, const names::NicknameTable& nicknames) {
    for (const auto& m : mentors) {
        if (names::names_compatible(m, author, nicknames) != names::MatchClass::incompatible &&
            institution_aligned(folded_institution, affiliation)) {
            return true;
        }
    }
    return false;
}

}  // namespace detail

/// Computes the five citation-network indicators for one candidate.
inline CitationIndicators citation_features(const blocking::CandidateLink& candidate,
                                            const records::Corpus& corpus,
                                            const names::NicknameTable& nicknames) {
    CitationIndicators out;
    const auto* grad = corpus.find_graduate(candidate.graduate_id);
    const auto* pub = corpus.find_publication(candidate.pub_id);
    if (!grad || !pub) throw SchemaError("candidate references unknown record ids");

    out.has_advisor_info = !grad->advisor_names.empty();
    out.has_committee_info = !grad->committee_names.empty();
    out.missing_advisor = grad->advisor_names.empty();
    out.missing_committee = grad->committee_names.empty();
    out.missing_citations = pub->cited_pub_ids.empty();

    names::NameParts grad_parts;
    try {
        grad_parts = names::parse_name(grad->raw_name);
    } catch (const UnparseableName&) {
        return out;
    }
    const std::string folded_inst = names::fold_text(grad->institution);

    std::vector<names::NameParts> mentors;
    for (const auto& list : {grad->advisor_names, grad->committee_names}) {
        for (const auto& n : list) {
            try {
                mentors.push_back(names::parse_name(n));
            } catch (const UnparseableName&) {
            }
        }
    }

    // Advisor/committee co-authorship on the candidate publication itself.
    if (!mentors.empty()) {
        for (const auto& pa : detail::parse_authors(*pub)) {
            if (pa.position == candidate.author_position) continue;
            if (detail::any_mentor_match(mentors, pa.parts, folded_inst,
                                         pa.authorship->affiliation_string, nicknames)) {
                out.advisor_coauthor = true;
                break;
            }
        }
    }

    if (pub->cited_pub_ids.empty()) return out;

    std::unordered_map<const records::PublicationRecord*, bool> align_memo;
    auto aligns = [&](const records::PublicationRecord& p) {
        auto it = align_memo.find(&p);
        if (it != align_memo.end()) return it->second;
        const bool v = detail::publication_aligns(p, grad_parts, folded_inst, grad->grad_year, nicknames);
        align_memo.emplace(&p, v);
        return v;
    };

    for (const auto& cited_id : pub->cited_pub_ids) {
        const auto* cited = corpus.find_publication(cited_id);
        if (!cited) continue;
        if (!out.direct_self_cite && aligns(*cited)) out.direct_self_cite = true;
        if (!out.indirect_self_cite) {
            for (const auto& second_id : cited->cited_pub_ids) {
                const auto* second = corpus.find_publication(second_id);
                if (second && aligns(*second)) {
                    out.indirect_self_cite = true;
                    break;
                }
            }
        }
        if (!out.advisor_cited && !mentors.empty()) {
            for (const auto& pa : detail::parse_authors(*cited)) {
                if (detail::any_mentor_match(mentors, pa.parts, folded_inst,
                                             pa.authorship->affiliation_string, nicknames)) {
                    out.advisor_cited = true;
                    break;
                }
            }
        }
        if (out.direct_self_cite && out.indirect_self_cite &&
            (out.advisor_cited || mentors.empty())) {
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Full feature assembly
// ---------------------------------------------------------------------------

/// Assembles per-candidate feature rows. Construction precomputes everything
/// the row computation needs; afterwards the assembler is read-only and safe
/// to share across threads.
class FeatureAssembler {
public:
    FeatureAssembler(const records::Corpus& corpus, const names::NameFrequencies& frequencies,
                     const names::NicknameTable& nicknames)
        : corpus_(corpus),
          frequencies_(frequencies),
          nicknames_(nicknames),
          layout_(stage1_layout(corpus.embedding_dim(), corpus.ethnicity_vocabulary())) {
        for (std::size_t i = 0; i < corpus.ethnicity_vocabulary().size(); ++i) {
            ethnicity_slot_[corpus.ethnicity_vocabulary()[i]] = i;
        }
    }

    const FeatureLayout& layout() const { return layout_; }

    std::vector<double> assemble(const blocking::CandidateLink& candidate) const {
        const auto* grad = corpus_.find_graduate(candidate.graduate_id);
        const auto* pub = corpus_.find_publication(candidate.pub_id);
        if (!grad || !pub) throw SchemaError("candidate references unknown record ids");
        const records::Authorship* authorship = nullptr;
        for (const auto& a : pub->authorships) {
            if (a.position == candidate.author_position) {
                authorship = &a;
                break;
            }
        }
        if (!authorship) throw SchemaError("candidate author position missing from publication");

        const std::size_t dim = corpus_.embedding_dim();
        std::vector<double> row;
        row.reserve(layout_.total());

        // Embedding block: distances on unit-normalized vectors so the scaled
        // features stay inside [-1, 1].
        const auto grad_unit = unit(grad->embedding, dim);
        const auto pub_unit = unit(pub->embedding, dim);
        const bool embedding_missing = grad_unit.empty() || pub_unit.empty();
        if (embedding_missing) {
            row.push_back(0.0);  // cosine
            row.push_back(0.0);  // manhattan_scaled
            row.insert(row.end(), 2 * dim, 0.0);
        } else {
            const double eu = euclidean(grad_unit, pub_unit);
            row.push_back(1.0 - eu * eu / 2.0);
            row.push_back(1.0 - manhattan(grad_unit, pub_unit) / static_cast<double>(dim));
            const auto d = diff(grad_unit, pub_unit);
            const auto h = hadamard(grad_unit, pub_unit);
            row.insert(row.end(), d.begin(), d.end());
            row.insert(row.end(), h.begin(), h.end());
        }

        const auto cites = citation_features(candidate, corpus_, nicknames_);
        row.push_back(cites.direct_self_cite ? 1.0 : 0.0);
        row.push_back(cites.indirect_self_cite ? 1.0 : 0.0);
        row.push_back(cites.advisor_coauthor ? 1.0 : 0.0);
        row.push_back(cites.advisor_cited ? 1.0 : 0.0);
        row.push_back(cites.has_advisor_info ? 1.0 : 0.0);
        row.push_back(cites.has_committee_info ? 1.0 : 0.0);

        // Name similarity block.
        double jw_display = 0.0, jw_raw = 0.0;
        try {
            const auto grad_parts = names::parse_name(grad->raw_name);
            const std::string grad_full = grad_parts.full();
            const auto& display = authorship->display_name.empty() ? authorship->raw_name
                                                                   : authorship->display_name;
            const auto& rawn = authorship->raw_name.empty() ? authorship->display_name
                                                            : authorship->raw_name;
            jw_display = names::jaro_winkler(grad_full, names::parse_name(display).full());
            jw_raw = names::jaro_winkler(grad_full, names::parse_name(rawn).full());
            row.push_back(jw_display);
            row.push_back(jw_raw);
            row.push_back(candidate.match_class == names::MatchClass::nickname_based ? 1.0 : 0.0);
            row.push_back(frequencies_.log_first(grad_parts.first));
            row.push_back(frequencies_.log_last(grad_parts.last));
            row.push_back(frequencies_.log_full(grad_full));
        } catch (const UnparseableName&) {
            row.insert(row.end(), 6, 0.0);
        }

        // Ethnicity one-hot with explicit unknown slot.
        const std::size_t slots = ethnicity_slot_.size() + 1;
        std::vector<double> onehot(slots, 0.0);
        if (grad->ethnicity_label) {
            auto it = ethnicity_slot_.find(*grad->ethnicity_label);
            if (it != ethnicity_slot_.end()) {
                onehot[it->second] = 1.0;
            } else {
                onehot[slots - 1] = 1.0;
            }
        } else {
            onehot[slots - 1] = 1.0;
        }
        row.insert(row.end(), onehot.begin(), onehot.end());

        row.push_back(static_cast<double>(pub->pub_year - grad->grad_year));

        row.push_back(embedding_missing ? 1.0 : 0.0);
        row.push_back(cites.missing_citations ? 1.0 : 0.0);
        row.push_back(cites.missing_advisor ? 1.0 : 0.0);
        row.push_back(cites.missing_committee ? 1.0 : 0.0);

        return row;
    }

private:
    static std::vector<double> unit(const std::vector<float>& v, std::size_t dim) {
        if (v.empty()) return {};
        if (v.size() != dim) {
            throw DimensionError("embedding dimension " + std::to_string(v.size()) + ", expected " +
                                 std::to_string(dim));
        }
        double norm = 0.0;
        for (float f : v) norm += static_cast<double>(f) * static_cast<double>(f);
        norm = std::sqrt(norm);
        if (norm == 0.0) return {};  // zero vector carries no signal: treat as missing
        std::vector<double> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(v[i]) / norm;
        return out;
    }

    const records::Corpus& corpus_;
    const names::NameFrequencies& frequencies_;
    const names::NicknameTable& nicknames_;
    FeatureLayout layout_;
    std::unordered_map<std::string, std::size_t> ethnicity_slot_;
};

// ---------------------------------------------------------------------------
// Binary feature shards: fixed-width f32 rows keyed by candidate row index.
// Layout: 'L''F''F''S' | u32 version | u32 row_width | u64 count |
//         u32 layout_json_len | layout json | count * (u64 key | row_width * f32)
// ---------------------------------------------------------------------------

inline void write_feature_shard(const std::filesystem::path& path, const FeatureLayout& layout,
                                const std::vector<std::pair<std::uint64_t, std::vector<double>>>& rows) {
    std::string out;
    auto put_u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    auto put_u64 = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    const std::size_t width = layout.total();
    out += "LFFS";
    put_u32(1);
    put_u32(static_cast<std::uint32_t>(width));
    put_u64(rows.size());
    const std::string lj = layout.to_json().dump();
    put_u32(static_cast<std::uint32_t>(lj.size()));
    out += lj;
    for (const auto& [key, row] : rows) {
        if (row.size() != width) {
            throw LayoutMismatch("feature row width " + std::to_string(row.size()) + ", layout needs " +
                                 std::to_string(width));
        }
        put_u64(key);
        for (double v : row) {
            const float f = static_cast<float>(v);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32(bits);
        }
    }
    io::atomic_write(path, out);
}

struct FeatureShard {
    FeatureLayout layout;
    std::vector<std::pair<std::uint64_t, std::vector<double>>> rows;
};

inline FeatureShard read_feature_shard(const std::filesystem::path& path) {
    const std::string buf = io::read_file(path);
    std::size_t pos = 0;
    auto need = [&](std::size_t n) {
        if (pos + n > buf.size()) throw SchemaError("feature shard truncated: " + path.string());
    };
    auto get_u32 = [&]() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    };
    auto get_u64 = [&]() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    };
    need(4);
    if (buf.compare(0, 4, "LFFS") != 0) throw SchemaError("bad feature shard magic: " + path.string());
    pos = 4;
    if (get_u32() != 1) throw SchemaError("unsupported feature shard version");
    const std::uint32_t width = get_u32();
    const std::uint64_t count = get_u64();
    const std::uint32_t lj_len = get_u32();
    need(lj_len);
    FeatureShard shard;
    shard.layout = FeatureLayout::from_json(json::parse(buf.substr(pos, lj_len)));
    pos += lj_len;
    if (shard.layout.total() != width) throw SchemaError("feature shard layout width mismatch");
    shard.rows.reserve(count);
    for (std::uint64_t r = 0; r < count; ++r) {
        const std::uint64_t key = get_u64();
        std::vector<double> row(width);
        for (std::uint32_t i = 0; i < width; ++i) {
            const std::uint32_t bits = get_u32();
            float f;
            std::memcpy(&f, &bits, 4);
            row[i] = static_cast<double>(f);
        }
        shard.rows.emplace_back(key, std::move(row));
    }
    return shard;
}

}  // namespace linkforge::features
