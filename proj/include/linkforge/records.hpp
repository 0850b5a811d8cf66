// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "linkforge/errors.hpp"
#include "linkforge/io.hpp"

namespace linkforge::records {

using json = nlohmann::json;

struct Authorship {
    int position = 0;
    std::string display_name;
    std::string raw_name;
    std::string affiliation_string;
    std::optional<std::string> registry_id;

    bool operator==(const Authorship&) const = default;
};

struct GraduateRecord {
    std::string graduate_id;
    std::string raw_name;
    int grad_year = 0;
    std::string institution;
    std::string subject;
    std::string field;
    std::vector<std::string> tech_areas;
    std::vector<std::string> advisor_names;
    std::vector<std::string> committee_names;
    std::vector<float> embedding;  // empty means absent
    std::optional<std::string> ethnicity_label;
    std::optional<bool> foreign_national;
    std::optional<std::string> registry_id;  // authenticated id, ground truth only
    json extras = json::object();

    bool operator==(const GraduateRecord&) const = default;
};

struct PublicationRecord {
    std::string pub_id;
    int pub_year = 0;
    std::vector<Authorship> authorships;
    std::vector<float> embedding;  // empty means absent
    std::vector<std::string> cited_pub_ids;
    json extras = json::object();

    bool operator==(const PublicationRecord&) const = default;
};

struct PatentCitation {
    std::string patent_id;
    int filing_year = 0;
    std::string assignee_country;  // 2-letter code
    std::string cited_pub_id;
    int confidence = 0;  // 1..10; rows below 3 are dropped at ingest

    bool operator==(const PatentCitation&) const = default;
    auto key() const { return std::tie(patent_id, cited_pub_id, filing_year, assignee_country, confidence); }
};

struct PatentPaperPair {
    std::string patent_id;
    std::string pub_id;

    bool operator==(const PatentPaperPair&) const = default;
    auto key() const { return std::tie(patent_id, pub_id); }
};

struct ReferentialWarning {
    std::string from_id;  // record holding the dangling reference
    std::string to_id;    // unknown pub_id
    std::string source;   // "publication", "patent_citation", "patent_paper_pair"

    bool operator==(const ReferentialWarning&) const = default;
    auto key() const { return std::tie(source, from_id, to_id); }
};

struct IngestStats {
    std::size_t low_confidence_citations_dropped = 0;
    std::size_t duplicate_pairs_dropped = 0;
    std::vector<ReferentialWarning> warnings;

    bool operator==(const IngestStats&) const = default;
};

struct IngestManifest {
    std::filesystem::path graduates;
    std::filesystem::path publications;
    std::filesystem::path patent_citations;   // optional, empty = none
    std::filesystem::path patent_paper_pairs; // optional, empty = none
    std::filesystem::path embeddings;         // optional sidecar, empty = none
    std::size_t embedding_dim = 768;
    int sample_window_lo = 1980;
    int sample_window_hi = 2019;

    static IngestManifest from_file(const std::filesystem::path& path) {
        json j;
        try {
            j = json::parse(io::read_file(path));
        } catch (const json::exception& e) {
            throw SchemaError("manifest " + path.string() + ": " + e.what());
        }
        IngestManifest m;
        const auto base = path.parent_path();
        auto resolve = [&](const char* key) -> std::filesystem::path {
            if (!j.contains(key) || j[key].is_null()) return {};
            std::filesystem::path p = j[key].get<std::string>();
            return p.is_absolute() ? p : base / p;
        };
        m.graduates = resolve("graduates");
        m.publications = resolve("publications");
        m.patent_citations = resolve("patent_citations");
        m.patent_paper_pairs = resolve("patent_paper_pairs");
        m.embeddings = resolve("embeddings");
        if (m.graduates.empty() || m.publications.empty()) {
            throw SchemaError("manifest must name graduates and publications files");
        }
        if (j.contains("embedding_dim")) m.embedding_dim = j["embedding_dim"].get<std::size_t>();
        if (j.contains("sample_window")) {
            m.sample_window_lo = j["sample_window"].at(0).get<int>();
            m.sample_window_hi = j["sample_window"].at(1).get<int>();
        }
        return m;
    }
};

/// Immutable record store. All collections are sorted by id, so a corpus is
/// identical regardless of input row order. Safe for concurrent reads.
class Corpus {
public:
    Corpus() = default;
    Corpus(std::vector<GraduateRecord> grads, std::vector<PublicationRecord> pubs,
           std::vector<PatentCitation> cites, std::vector<PatentPaperPair> pairs,
           IngestStats stats, std::size_t embedding_dim)
        : graduates_(std::move(grads)),
          publications_(std::move(pubs)),
          patent_citations_(std::move(cites)),
          patent_paper_pairs_(std::move(pairs)),
          stats_(std::move(stats)),
          embedding_dim_(embedding_dim) {
        finalize();
    }

    const std::vector<GraduateRecord>& graduates() const { return graduates_; }
    const std::vector<PublicationRecord>& publications() const { return publications_; }
    const std::vector<PatentCitation>& patent_citations() const { return patent_citations_; }
    const std::vector<PatentPaperPair>& patent_paper_pairs() const { return patent_paper_pairs_; }
    const IngestStats& stats() const { return stats_; }
    std::size_t embedding_dim() const { return embedding_dim_; }

    const GraduateRecord* find_graduate(const std::string& id) const {
        auto it = graduate_index_.find(id);
        return it == graduate_index_.end() ? nullptr : &graduates_[it->second];
    }
    const PublicationRecord* find_publication(const std::string& id) const {
        auto it = publication_index_.find(id);
        return it == publication_index_.end() ? nullptr : &publications_[it->second];
    }

    /// Inbound scientific citation count per pub_id (from this corpus only).
    std::size_t inbound_citations(const std::string& pub_id) const {
        auto it = inbound_.find(pub_id);
        return it == inbound_.end() ? 0 : it->second;
    }

    /// Distinct ethnicity labels over graduates, sorted. The feature one-hot
    /// vocabulary is derived from this plus an explicit unknown slot.
    const std::vector<std::string>& ethnicity_vocabulary() const { return ethnicity_vocab_; }

    bool operator==(const Corpus& o) const {
        return graduates_ == o.graduates_ && publications_ == o.publications_ &&
               patent_citations_ == o.patent_citations_ &&
               patent_paper_pairs_ == o.patent_paper_pairs_ &&
               embedding_dim_ == o.embedding_dim_;
    }

private:
    void finalize() {
        std::sort(graduates_.begin(), graduates_.end(),
                  [](const auto& a, const auto& b) { return a.graduate_id < b.graduate_id; });
        std::sort(publications_.begin(), publications_.end(),
                  [](const auto& a, const auto& b) { return a.pub_id < b.pub_id; });
        std::sort(patent_citations_.begin(), patent_citations_.end(),
                  [](const auto& a, const auto& b) { return a.key() < b.key(); });
        std::sort(patent_paper_pairs_.begin(), patent_paper_pairs_.end(),
                  [](const auto& a, const auto& b) { return a.key() < b.key(); });
        std::sort(stats_.warnings.begin(), stats_.warnings.end(),
                  [](const auto& a, const auto& b) { return a.key() < b.key(); });
        for (std::size_t i = 0; i < graduates_.size(); ++i)
            graduate_index_.emplace(graduates_[i].graduate_id, i);
        for (std::size_t i = 0; i < publications_.size(); ++i)
            publication_index_.emplace(publications_[i].pub_id, i);
        for (const auto& p : publications_) {
            for (const auto& cited : p.cited_pub_ids) {
                if (publication_index_.count(cited)) ++inbound_[cited];
            }
        }
        std::set<std::string> labels;
        for (const auto& g : graduates_) {
            if (g.ethnicity_label && !g.ethnicity_label->empty()) labels.insert(*g.ethnicity_label);
        }
        ethnicity_vocab_.assign(labels.begin(), labels.end());
    }

    std::vector<GraduateRecord> graduates_;
    std::vector<PublicationRecord> publications_;
    std::vector<PatentCitation> patent_citations_;
    std::vector<PatentPaperPair> patent_paper_pairs_;
    IngestStats stats_;
    std::size_t embedding_dim_ = 768;
    std::unordered_map<std::string, std::size_t> graduate_index_;
    std::unordered_map<std::string, std::size_t> publication_index_;
    std::unordered_map<std::string, std::size_t> inbound_;
    std::vector<std::string> ethnicity_vocab_;
};

struct IngestReport {
    std::size_t graduates = 0;
    std::size_t publications = 0;
    std::size_t patent_citations = 0;
    std::size_t patent_paper_pairs = 0;
    std::size_t low_confidence_citations_dropped = 0;
    std::size_t duplicate_pairs_dropped = 0;
    std::vector<ReferentialWarning> warnings;

    json to_json() const {
        json w = json::array();
        for (const auto& x : warnings) {
            w.push_back({{"from_id", x.from_id}, {"to_id", x.to_id}, {"source", x.source}});
        }
        return json{{"graduates", graduates},
                    {"publications", publications},
                    {"patent_citations", patent_citations},
                    {"patent_paper_pairs", patent_paper_pairs},
                    {"low_confidence_citations_dropped", low_confidence_citations_dropped},
                    {"duplicate_pairs_dropped", duplicate_pairs_dropped},
                    {"warnings", w}};
    }
};

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        throw SchemaError(where + ": missing required field '" + key + "'");
    }
    return *it;
}

inline std::string require_string(const json& j, const char* key, const std::string& where) {
    const auto& v = require(j, key, where);
    if (!v.is_string()) throw SchemaError(where + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

inline int require_int(const json& j, const char* key, const std::string& where) {
    const auto& v = require(j, key, where);
    if (!v.is_number_integer()) throw SchemaError(where + ": field '" + key + "' must be an integer");
    return v.get<int>();
}

inline std::vector<std::string> optional_string_list(const json& j, const char* key,
                                                     const std::string& where) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return {};
    if (!it->is_array()) throw SchemaError(where + ": field '" + key + "' must be a list");
    std::vector<std::string> out;
    for (const auto& v : *it) {
        if (!v.is_string()) throw SchemaError(where + ": field '" + key + "' must hold strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

inline std::vector<float> optional_embedding(const json& j, const std::string& where) {
    auto it = j.find("embedding");
    if (it == j.end() || it->is_null()) return {};
    if (!it->is_array()) throw SchemaError(where + ": field 'embedding' must be a list of numbers");
    std::vector<float> out;
    out.reserve(it->size());
    for (const auto& v : *it) {
        if (!v.is_number()) throw SchemaError(where + ": field 'embedding' must hold numbers");
        out.push_back(v.get<float>());
    }
    return out;
}

inline json collect_extras(const json& j, std::initializer_list<const char*> known) {
    json extras = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool is_known = false;
        for (const char* k : known) {
            if (it.key() == k) { is_known = true; break; }
        }
        if (!is_known) extras[it.key()] = it.value();
    }
    return extras;
}

inline json parse_line(const std::string& line, const std::string& where) {
    try {
        json j = json::parse(line);
        if (!j.is_object()) throw SchemaError(where + ": record must be a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw SchemaError(where + ": " + e.what());
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Embeddings sidecar: id-indexed fixed-width vectors, little-endian f32.
// Layout: 'L''F''E''B' | u32 version | u32 dim | u64 count |
//         count * (u32 id_len | id bytes | dim * f32)
// ---------------------------------------------------------------------------

inline void write_embedding_sidecar(const std::filesystem::path& path,
                                    const std::map<std::string, std::vector<float>>& vectors,
                                    std::size_t dim) {
    std::string out;
    auto put_u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    auto put_u64 = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    out += "LFEB";
    put_u32(1);
    put_u32(static_cast<std::uint32_t>(dim));
    put_u64(vectors.size());
    for (const auto& [id, vec] : vectors) {
        if (vec.size() != dim) {
            throw DimensionError("sidecar vector for '" + id + "' has dimension " +
                                 std::to_string(vec.size()) + ", expected " + std::to_string(dim));
        }
        put_u32(static_cast<std::uint32_t>(id.size()));
        out += id;
        for (float f : vec) {
            std::uint32_t bits;
            static_assert(sizeof(bits) == sizeof(f));
            std::memcpy(&bits, &f, 4);
            put_u32(bits);
        }
    }
    io::atomic_write(path, out);
}

inline std::map<std::string, std::vector<float>> read_embedding_sidecar(
    const std::filesystem::path& path, std::size_t expected_dim) {
    const std::string buf = io::read_file(path);
    std::size_t pos = 0;
    auto need = [&](std::size_t n) {
        if (pos + n > buf.size()) throw SchemaError("embedding sidecar truncated: " + path.string());
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
    if (buf.compare(0, 4, "LFEB") != 0) throw SchemaError("bad embedding sidecar magic: " + path.string());
    pos = 4;
    const std::uint32_t version = get_u32();
    if (version != 1) throw SchemaError("unsupported sidecar version " + std::to_string(version));
    const std::uint32_t dim = get_u32();
    if (dim != expected_dim) {
        throw DimensionError("sidecar dimension " + std::to_string(dim) + " does not match configured " +
                             std::to_string(expected_dim));
    }
    const std::uint64_t count = get_u64();
    std::map<std::string, std::vector<float>> out;
    for (std::uint64_t r = 0; r < count; ++r) {
        const std::uint32_t id_len = get_u32();
        need(id_len);
        std::string id = buf.substr(pos, id_len);
        pos += id_len;
        std::vector<float> vec(dim);
        for (std::uint32_t i = 0; i < dim; ++i) {
            const std::uint32_t bits = get_u32();
            std::memcpy(&vec[i], &bits, 4);
        }
        out.emplace(std::move(id), std::move(vec));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

inline Corpus ingest_corpus(const IngestManifest& m) {
    std::vector<GraduateRecord> grads;
    std::vector<PublicationRecord> pubs;
    std::vector<PatentCitation> cites;
    std::vector<PatentPaperPair> pairs;
    IngestStats stats;

    std::unordered_set<std::string> grad_ids;
    io::for_each_line(m.graduates, [&](std::size_t lineno, const std::string& line) {
        const std::string where = m.graduates.filename().string() + ":" + std::to_string(lineno);
        const json j = detail::parse_line(line, where);
        GraduateRecord g;
        g.graduate_id = detail::require_string(j, "graduate_id", where);
        g.raw_name = detail::require_string(j, "raw_name", where);
        g.grad_year = detail::require_int(j, "grad_year", where);
        g.institution = detail::require_string(j, "institution", where);
        g.subject = j.value("subject", std::string{});
        g.field = j.value("field", std::string{});
        g.tech_areas = detail::optional_string_list(j, "tech_areas", where);
        g.advisor_names = detail::optional_string_list(j, "advisor_names", where);
        g.committee_names = detail::optional_string_list(j, "committee_names", where);
        g.embedding = detail::optional_embedding(j, where);
        if (j.contains("ethnicity_label") && !j["ethnicity_label"].is_null())
            g.ethnicity_label = j["ethnicity_label"].get<std::string>();
        if (j.contains("foreign_national") && !j["foreign_national"].is_null())
            g.foreign_national = j["foreign_national"].get<bool>();
        if (j.contains("registry_id") && !j["registry_id"].is_null())
            g.registry_id = j["registry_id"].get<std::string>();
        g.extras = detail::collect_extras(
            j, {"graduate_id", "raw_name", "grad_year", "institution", "subject", "field", "tech_areas",
                "advisor_names", "committee_names", "embedding", "ethnicity_label", "foreign_national",
                "registry_id"});
        if (g.grad_year < m.sample_window_lo || g.grad_year > m.sample_window_hi) {
            throw SchemaError(where + ": grad_year " + std::to_string(g.grad_year) +
                              " outside sample window [" + std::to_string(m.sample_window_lo) + "," +
                              std::to_string(m.sample_window_hi) + "]");
        }
        if (!g.embedding.empty() && g.embedding.size() != m.embedding_dim) {
            throw DimensionError(where + ": embedding dimension " + std::to_string(g.embedding.size()) +
                                 ", expected " + std::to_string(m.embedding_dim));
        }
        if (!grad_ids.insert(g.graduate_id).second) {
            throw DuplicateIdError("duplicate graduate_id: " + g.graduate_id);
        }
        grads.push_back(std::move(g));
    });

    std::unordered_set<std::string> pub_ids;
    io::for_each_line(m.publications, [&](std::size_t lineno, const std::string& line) {
        const std::string where = m.publications.filename().string() + ":" + std::to_string(lineno);
        const json j = detail::parse_line(line, where);
        PublicationRecord p;
        p.pub_id = detail::require_string(j, "pub_id", where);
        p.pub_year = detail::require_int(j, "pub_year", where);
        const auto& authors = detail::require(j, "authorships", where);
        if (!authors.is_array()) throw SchemaError(where + ": 'authorships' must be a list");
        std::unordered_set<int> positions;
        for (const auto& a : authors) {
            Authorship au;
            au.position = detail::require_int(a, "position", where);
            au.display_name = a.value("display_name", std::string{});
            au.raw_name = a.value("raw_name", std::string{});
            au.affiliation_string = a.value("affiliation_string", std::string{});
            if (a.contains("registry_id") && !a["registry_id"].is_null())
                au.registry_id = a["registry_id"].get<std::string>();
            if (au.position < 0) throw SchemaError(where + ": authorship position must be >= 0");
            if (au.display_name.empty() && au.raw_name.empty()) {
                throw SchemaError(where + ": authorship needs display_name or raw_name");
            }
            if (!positions.insert(au.position).second) {
                throw SchemaError(where + ": duplicate authorship position " +
                                  std::to_string(au.position) + " in " + p.pub_id);
            }
            p.authorships.push_back(std::move(au));
        }
        std::sort(p.authorships.begin(), p.authorships.end(),
                  [](const auto& a, const auto& b) { return a.position < b.position; });
        p.embedding = detail::optional_embedding(j, where);
        p.cited_pub_ids = detail::optional_string_list(j, "cited_pub_ids", where);
        p.extras = detail::collect_extras(j, {"pub_id", "pub_year", "authorships", "embedding",
                                              "cited_pub_ids"});
        if (!p.embedding.empty() && p.embedding.size() != m.embedding_dim) {
            throw DimensionError(where + ": embedding dimension " + std::to_string(p.embedding.size()) +
                                 ", expected " + std::to_string(m.embedding_dim));
        }
        if (!pub_ids.insert(p.pub_id).second) {
            throw DuplicateIdError("duplicate pub_id: " + p.pub_id);
        }
        pubs.push_back(std::move(p));
    });

    if (!m.patent_citations.empty()) {
        io::for_each_line(m.patent_citations, [&](std::size_t lineno, const std::string& line) {
            const std::string where = m.patent_citations.filename().string() + ":" + std::to_string(lineno);
            const json j = detail::parse_line(line, where);
            PatentCitation c;
            c.patent_id = detail::require_string(j, "patent_id", where);
            c.filing_year = detail::require_int(j, "filing_year", where);
            c.assignee_country = detail::require_string(j, "assignee_country", where);
            c.cited_pub_id = detail::require_string(j, "cited_pub_id", where);
            c.confidence = detail::require_int(j, "confidence", where);
            if (c.assignee_country.size() != 2 ||
                !std::isalpha(static_cast<unsigned char>(c.assignee_country[0])) ||
                !std::isalpha(static_cast<unsigned char>(c.assignee_country[1]))) {
                throw SchemaError(where + ": assignee_country must be a 2-letter code");
            }
            for (char& ch : c.assignee_country) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
            if (c.confidence < 1 || c.confidence > 10) {
                throw SchemaError(where + ": confidence must be in 1..10");
            }
            if (c.confidence < 3) {
                ++stats.low_confidence_citations_dropped;
                return;
            }
            cites.push_back(std::move(c));
        });
    }

    if (!m.patent_paper_pairs.empty()) {
        std::set<std::pair<std::string, std::string>> seen;
        io::for_each_line(m.patent_paper_pairs, [&](std::size_t lineno, const std::string& line) {
            const std::string where = m.patent_paper_pairs.filename().string() + ":" + std::to_string(lineno);
            const json j = detail::parse_line(line, where);
            PatentPaperPair pp;
            pp.patent_id = detail::require_string(j, "patent_id", where);
            pp.pub_id = detail::require_string(j, "pub_id", where);
            if (!seen.emplace(pp.patent_id, pp.pub_id).second) {
                ++stats.duplicate_pairs_dropped;
                return;
            }
            pairs.push_back(std::move(pp));
        });
    }

    if (!m.embeddings.empty()) {
        const auto sidecar = read_embedding_sidecar(m.embeddings, m.embedding_dim);
        for (auto& g : grads) {
            if (g.embedding.empty()) {
                auto it = sidecar.find(g.graduate_id);
                if (it != sidecar.end()) g.embedding = it->second;
            }
        }
        for (auto& p : pubs) {
            if (p.embedding.empty()) {
                auto it = sidecar.find(p.pub_id);
                if (it != sidecar.end()) p.embedding = it->second;
            }
        }
    }

    // Referential checks are warnings: the citation sources are incomplete by
    // nature, so a dangling id must not sink the ingest.
    for (const auto& p : pubs) {
        for (const auto& cited : p.cited_pub_ids) {
            if (!pub_ids.count(cited)) stats.warnings.push_back({p.pub_id, cited, "publication"});
        }
    }
    for (const auto& c : cites) {
        if (!pub_ids.count(c.cited_pub_id)) {
            stats.warnings.push_back({c.patent_id, c.cited_pub_id, "patent_citation"});
        }
    }
    for (const auto& pp : pairs) {
        if (!pub_ids.count(pp.pub_id)) {
            stats.warnings.push_back({pp.patent_id, pp.pub_id, "patent_paper_pair"});
        }
    }

    return Corpus(std::move(grads), std::move(pubs), std::move(cites), std::move(pairs),
                  std::move(stats), m.embedding_dim);
}

inline IngestReport validate_corpus(const Corpus& corpus) {
    IngestReport r;
    r.graduates = corpus.graduates().size();
    r.publications = corpus.publications().size();
    r.patent_citations = corpus.patent_citations().size();
    r.patent_paper_pairs = corpus.patent_paper_pairs().size();
    r.low_confidence_citations_dropped = corpus.stats().low_confidence_citations_dropped;
    r.duplicate_pairs_dropped = corpus.stats().duplicate_pairs_dropped;
    r.warnings = corpus.stats().warnings;
    return r;
}

// ---------------------------------------------------------------------------
// Canonical serialization (embeddings inline). serialize + ingest round-trips
// to an equal corpus.
// ---------------------------------------------------------------------------

namespace detail {

inline json embedding_to_json(const std::vector<float>& e) {
    json arr = json::array();
    for (float f : e) arr.push_back(f);
    return arr;
}

}  // namespace detail

inline json graduate_to_json(const GraduateRecord& g) {
    json j = g.extras.is_object() ? g.extras : json::object();
    j["graduate_id"] = g.graduate_id;
    j["raw_name"] = g.raw_name;
    j["grad_year"] = g.grad_year;
    j["institution"] = g.institution;
    if (!g.subject.empty()) j["subject"] = g.subject;
    if (!g.field.empty()) j["field"] = g.field;
    if (!g.tech_areas.empty()) j["tech_areas"] = g.tech_areas;
    if (!g.advisor_names.empty()) j["advisor_names"] = g.advisor_names;
    if (!g.committee_names.empty()) j["committee_names"] = g.committee_names;
    if (!g.embedding.empty()) j["embedding"] = detail::embedding_to_json(g.embedding);
    if (g.ethnicity_label) j["ethnicity_label"] = *g.ethnicity_label;
    if (g.foreign_national) j["foreign_national"] = *g.foreign_national;
    if (g.registry_id) j["registry_id"] = *g.registry_id;
    return j;
}

inline json publication_to_json(const PublicationRecord& p) {
    json j = p.extras.is_object() ? p.extras : json::object();
    j["pub_id"] = p.pub_id;
    j["pub_year"] = p.pub_year;
    json authors = json::array();
    for (const auto& a : p.authorships) {
        json ja{{"position", a.position}};
        if (!a.display_name.empty()) ja["display_name"] = a.display_name;
        if (!a.raw_name.empty()) ja["raw_name"] = a.raw_name;
        if (!a.affiliation_string.empty()) ja["affiliation_string"] = a.affiliation_string;
        if (a.registry_id) ja["registry_id"] = *a.registry_id;
        authors.push_back(std::move(ja));
    }
    j["authorships"] = std::move(authors);
    if (!p.embedding.empty()) j["embedding"] = detail::embedding_to_json(p.embedding);
    if (!p.cited_pub_ids.empty()) j["cited_pub_ids"] = p.cited_pub_ids;
    return j;
}

/// Writes the four canonical jsonl files into `dir` and returns a manifest
/// describing them.
inline IngestManifest serialize_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::string out;
    for (const auto& g : corpus.graduates()) out += graduate_to_json(g).dump() + "\n";
    io::atomic_write(dir / "graduates.jsonl", out);

    out.clear();
    for (const auto& p : corpus.publications()) out += publication_to_json(p).dump() + "\n";
    io::atomic_write(dir / "publications.jsonl", out);

    out.clear();
    for (const auto& c : corpus.patent_citations()) {
        out += json{{"patent_id", c.patent_id},
                    {"filing_year", c.filing_year},
                    {"assignee_country", c.assignee_country},
                    {"cited_pub_id", c.cited_pub_id},
                    {"confidence", c.confidence}}
                   .dump() +
               "\n";
    }
    io::atomic_write(dir / "patent_citations.jsonl", out);

    out.clear();
    for (const auto& pp : corpus.patent_paper_pairs()) {
        out += json{{"patent_id", pp.patent_id}, {"pub_id", pp.pub_id}}.dump() + "\n";
    }
    io::atomic_write(dir / "patent_paper_pairs.jsonl", out);

    IngestManifest m;
    m.graduates = dir / "graduates.jsonl";
    m.publications = dir / "publications.jsonl";
    m.patent_citations = dir / "patent_citations.jsonl";
    m.patent_paper_pairs = dir / "patent_paper_pairs.jsonl";
    m.embedding_dim = corpus.embedding_dim();
    // Wide-open window: the records already passed validation once.
    m.sample_window_lo = -100000;
    m.sample_window_hi = 100000;
    return m;
}

}  // namespace linkforge::records
