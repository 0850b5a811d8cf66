// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "linkforge/analytics.hpp"
#include "linkforge/blocking.hpp"
#include "linkforge/features.hpp"
#include "linkforge/geo.hpp"
#include "linkforge/io.hpp"
#include "linkforge/linkmodel.hpp"
#include "linkforge/migration.hpp"
#include "linkforge/name_kit.hpp"
#include "linkforge/records.hpp"

namespace linkforge::pipeline {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct PipelineConfig {
    fs::path config_dir;  // directory of the config file; relative paths anchor here

    // Inputs
    fs::path graduates, publications, patent_citations, patent_paper_pairs;
    fs::path embeddings;         // optional sidecar
    fs::path nicknames;          // equivalence groups
    fs::path gazetteer_dir;      // countries.txt / us_states.txt / universities.txt
    fs::path regions;            // country -> region map
    fs::path labeled_histories;  // optional employment ground truth
    fs::path foreign_share;      // optional {year: share} series
    fs::path geo_mock;           // optional mock client mapping
    fs::path out_dir;

    std::size_t embedding_dim = 768;
    int sample_window_lo = 1980, sample_window_hi = 2019;
    blocking::TemporalWindow window{};
    double jw_threshold = 0.90;

    model::CascadeConfig cascade{};
    migration::GridSpec grid{};
    // Fallback parametrizations when no labeled histories are available.
    migration::MigrationParams default_base{0.7, 2};
    migration::MigrationParams default_high_precision{0.8, 4};
    migration::MigrationParams default_high_recall{0.5, 1};

    std::size_t min_pubs = 5;
    std::vector<int> horizons{5, 10, 15};
    int early_career_years = 5;  // stayer/leaver split horizon and output window
    std::uint64_t seed = 42;

    static PipelineConfig from_file(const fs::path& path);
    json canonical() const;
    std::string config_hash() const { return io::hex64(io::fnv1a(canonical().dump())); }
    void validate() const;

    records::IngestManifest ingest_manifest() const {
        records::IngestManifest m;
        m.graduates = graduates;
        m.publications = publications;
        m.patent_citations = patent_citations;
        m.patent_paper_pairs = patent_paper_pairs;
        m.embeddings = embeddings;
        m.embedding_dim = embedding_dim;
        m.sample_window_lo = sample_window_lo;
        m.sample_window_hi = sample_window_hi;
        return m;
    }
};

inline PipelineConfig PipelineConfig::from_file(const fs::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw SchemaError("config " + path.string() + ": " + e.what());
    }
    PipelineConfig c;
    c.config_dir = fs::absolute(path).parent_path();
    auto resolve = [&](const json& section, const char* key) -> fs::path {
        if (!section.contains(key) || section[key].is_null()) return {};
        fs::path p = section[key].get<std::string>();
        return p.is_absolute() ? p : c.config_dir / p;
    };
    if (!j.contains("paths")) throw SchemaError("config needs a paths section");
    const auto& paths = j["paths"];
    c.graduates = resolve(paths, "graduates");
    c.publications = resolve(paths, "publications");
    c.patent_citations = resolve(paths, "patent_citations");
    c.patent_paper_pairs = resolve(paths, "patent_paper_pairs");
    c.embeddings = resolve(paths, "embeddings");
    c.nicknames = resolve(paths, "nicknames");
    c.gazetteer_dir = resolve(paths, "gazetteer_dir");
    c.regions = resolve(paths, "regions");
    c.labeled_histories = resolve(paths, "labeled_histories");
    c.foreign_share = resolve(paths, "foreign_share");
    c.geo_mock = resolve(paths, "geo_mock");
    c.out_dir = resolve(paths, "out_dir");
    if (c.out_dir.empty()) c.out_dir = c.config_dir / "out";

    if (j.contains("embedding_dim")) c.embedding_dim = j["embedding_dim"].get<std::size_t>();
    if (j.contains("sample_window")) {
        c.sample_window_lo = j["sample_window"].at(0).get<int>();
        c.sample_window_hi = j["sample_window"].at(1).get<int>();
    }
    if (j.contains("candidate_window")) {
        c.window.lo = j["candidate_window"].at(0).get<int>();
        c.window.hi = j["candidate_window"].at(1).get<int>();
    }
    if (j.contains("jw_threshold")) c.jw_threshold = j["jw_threshold"].get<double>();

    if (j.contains("model")) {
        const auto& m = j["model"];
        if (m.contains("family")) c.cascade.family = model::model_family_from_string(m["family"].get<std::string>());
        auto sizes = [&](const char* key, std::vector<std::size_t>& out) {
            if (m.contains(key)) {
                out.clear();
                for (const auto& v : m[key]) out.push_back(v.get<std::size_t>());
            }
        };
        sizes("stage1_hidden", c.cascade.stage1_train.hidden_sizes);
        sizes("stage2_hidden", c.cascade.stage2_train.hidden_sizes);
        if (m.contains("stage1_sample")) {
            c.cascade.stage1_pos = m["stage1_sample"].at(0).get<std::size_t>();
            c.cascade.stage1_neg = m["stage1_sample"].at(1).get<std::size_t>();
        }
        if (m.contains("stage2_sample")) {
            c.cascade.stage2_pos = m["stage2_sample"].at(0).get<std::size_t>();
            c.cascade.stage2_neg = m["stage2_sample"].at(1).get<std::size_t>();
        }
        if (m.contains("stage1_threshold")) c.cascade.stage1_threshold = m["stage1_threshold"].get<double>();
        if (m.contains("stage2_threshold")) c.cascade.stage2_threshold = m["stage2_threshold"].get<double>();
        if (m.contains("high_confidence_threshold"))
            c.cascade.high_confidence_threshold = m["high_confidence_threshold"].get<double>();
        auto train_section = [&](const json& src, model::TrainConfig& t) {
            if (src.contains("learning_rate")) t.learning_rate = src["learning_rate"].get<double>();
            if (src.contains("momentum")) t.momentum = src["momentum"].get<double>();
            if (src.contains("batch_size")) t.batch_size = src["batch_size"].get<std::size_t>();
            if (src.contains("max_epochs")) t.max_epochs = src["max_epochs"].get<std::size_t>();
            if (src.contains("holdout_fraction")) t.holdout_fraction = src["holdout_fraction"].get<double>();
            if (src.contains("plateau_patience")) t.plateau_patience = src["plateau_patience"].get<std::size_t>();
            if (src.contains("max_halvings")) t.max_halvings = src["max_halvings"].get<std::size_t>();
        };
        // Shared keys apply to both stages; per-stage subsections refine them.
        train_section(m, c.cascade.stage1_train);
        train_section(m, c.cascade.stage2_train);
        if (m.contains("stage1")) train_section(m["stage1"], c.cascade.stage1_train);
        if (m.contains("stage2")) train_section(m["stage2"], c.cascade.stage2_train);
    }

    if (j.contains("migration")) {
        const auto& m = j["migration"];
        if (m.contains("prob_thresholds")) {
            c.grid.thresholds.clear();
            for (const auto& v : m["prob_thresholds"]) c.grid.thresholds.push_back(v.get<double>());
        }
        if (m.contains("persistence")) {
            c.grid.persistence.clear();
            for (const auto& v : m["persistence"]) c.grid.persistence.push_back(v.get<int>());
        }
        if (m.contains("min_pubs_strata")) {
            c.grid.strata.clear();
            for (const auto& v : m["min_pubs_strata"]) c.grid.strata.push_back(v.get<std::size_t>());
        }
    }

    if (j.contains("min_pubs")) c.min_pubs = j["min_pubs"].get<std::size_t>();
    if (j.contains("horizons")) {
        c.horizons.clear();
        for (const auto& v : j["horizons"]) c.horizons.push_back(v.get<int>());
    }
    if (j.contains("early_career_years")) c.early_career_years = j["early_career_years"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();

    c.validate();
    return c;
}

inline void PipelineConfig::validate() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (graduates.empty() || publications.empty()) {
        throw SchemaError("config must name graduates and publications files");
    }
    if (embedding_dim == 0) throw SchemaError("embedding_dim must be positive");
    if (sample_window_lo > sample_window_hi) throw SchemaError("sample_window is inverted");
    if (window.lo > window.hi) throw SchemaError("candidate_window is inverted");
    if (!in01(jw_threshold)) throw SchemaError("jw_threshold must be in [0,1]");
    for (double t : {cascade.stage1_threshold, cascade.stage2_threshold, cascade.high_confidence_threshold}) {
        if (!in01(t)) throw SchemaError("cascade thresholds must be in [0,1]");
    }
    if (cascade.stage1_pos == 0 || cascade.stage1_neg == 0 || cascade.stage2_pos == 0 ||
        cascade.stage2_neg == 0) {
        throw SchemaError("balanced sample sizes must be positive");
    }
    if (grid.thresholds.empty() || grid.persistence.empty() || grid.strata.empty()) {
        throw SchemaError("migration grid must have thresholds, persistence values and strata");
    }
    for (double t : grid.thresholds) {
        if (!in01(t)) throw SchemaError("migration thresholds must be in [0,1]");
    }
    for (int k : grid.persistence) {
        if (k < 1) throw SchemaError("persistence must be at least 1");
    }
    for (int h : horizons) {
        if (h < 1) throw SchemaError("horizons must be positive");
    }
    if (early_career_years < 1) throw SchemaError("early_career_years must be positive");
}

inline json PipelineConfig::canonical() const {
    auto rel = [&](const fs::path& p) -> json {
        if (p.empty()) return nullptr;
        return p.lexically_proximate(config_dir).generic_string();
    };
    json j;
    j["paths"] = {{"graduates", rel(graduates)},
                  {"publications", rel(publications)},
                  {"patent_citations", rel(patent_citations)},
                  {"patent_paper_pairs", rel(patent_paper_pairs)},
                  {"embeddings", rel(embeddings)},
                  {"nicknames", rel(nicknames)},
                  {"gazetteer_dir", rel(gazetteer_dir)},
                  {"regions", rel(regions)},
                  {"labeled_histories", rel(labeled_histories)},
                  {"foreign_share", rel(foreign_share)},
                  {"geo_mock", rel(geo_mock)},
                  {"out_dir", rel(out_dir)}};
    j["embedding_dim"] = embedding_dim;
    j["sample_window"] = {sample_window_lo, sample_window_hi};
    j["candidate_window"] = {window.lo, window.hi};
    j["jw_threshold"] = jw_threshold;
    auto train_json = [](const model::TrainConfig& t) {
        return json{{"hidden", t.hidden_sizes},
                    {"learning_rate", t.learning_rate},
                    {"momentum", t.momentum},
                    {"batch_size", t.batch_size},
                    {"max_epochs", t.max_epochs},
                    {"holdout_fraction", t.holdout_fraction},
                    {"plateau_patience", t.plateau_patience},
                    {"max_halvings", t.max_halvings}};
    };
    j["model"] = {{"family", "dnn"},
                  {"stage1", train_json(cascade.stage1_train)},
                  {"stage2", train_json(cascade.stage2_train)},
                  {"stage1_sample", {cascade.stage1_pos, cascade.stage1_neg}},
                  {"stage2_sample", {cascade.stage2_pos, cascade.stage2_neg}},
                  {"stage1_threshold", cascade.stage1_threshold},
                  {"stage2_threshold", cascade.stage2_threshold},
                  {"high_confidence_threshold", cascade.high_confidence_threshold}};
    j["migration"] = {{"prob_thresholds", grid.thresholds},
                      {"persistence", grid.persistence},
                      {"min_pubs_strata", grid.strata}};
    j["min_pubs"] = min_pubs;
    j["horizons"] = horizons;
    j["early_career_years"] = early_career_years;
    j["seed"] = seed;
    return j;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

enum class Stage { ingest, candidates, features, train, classify, geo, migrate, analyze };

inline const std::vector<Stage>& stage_order() {
    static const std::vector<Stage> kOrder = {Stage::ingest, Stage::candidates, Stage::features,
                                              Stage::train, Stage::classify, Stage::geo,
                                              Stage::migrate, Stage::analyze};
    return kOrder;
}

inline const char* to_string(Stage s) {
    switch (s) {
        case Stage::ingest: return "ingest";
        case Stage::candidates: return "candidates";
        case Stage::features: return "features";
        case Stage::train: return "train";
        case Stage::classify: return "classify";
        case Stage::geo: return "geo";
        case Stage::migrate: return "migrate";
        case Stage::analyze: return "analyze";
    }
    return "?";
}

inline Stage stage_from_string(std::string_view s) {
    for (Stage st : stage_order()) {
        if (s == to_string(st)) return st;
    }
    throw SchemaError("unknown stage: " + std::string(s));
}

inline std::vector<Stage> upstream_of(Stage s) {
    switch (s) {
        case Stage::ingest: return {};
        case Stage::candidates: return {Stage::ingest};
        case Stage::features: return {Stage::ingest, Stage::candidates};
        case Stage::train: return {Stage::candidates, Stage::features};
        case Stage::classify: return {Stage::candidates, Stage::features, Stage::train};
        case Stage::geo: return {Stage::ingest};
        case Stage::migrate: return {Stage::ingest, Stage::classify, Stage::geo};
        case Stage::analyze: return {Stage::ingest, Stage::classify, Stage::geo, Stage::migrate};
    }
    return {};
}

struct StageResult {
    Stage stage;
    bool ran = false;  // false = skipped as up to date
};

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

class Runner {
public:
    explicit Runner(PipelineConfig cfg) : cfg_(std::move(cfg)) {}

    const PipelineConfig& config() const { return cfg_; }

    fs::path stage_dir(Stage s) const { return cfg_.out_dir / to_string(s); }
    fs::path manifest_path(Stage s) const { return stage_dir(s) / "manifest.json"; }

    StageResult run(Stage stage, bool force) {
        check_upstream(stage);
        if (!force && up_to_date(stage)) return {stage, false};
        const auto inputs = stage_inputs(stage);
        for (const auto& in : inputs) {
            if (!fs::exists(in)) throw MissingUpstream("input missing for " + std::string(to_string(stage)) + ": " + in.string());
        }
        fs::create_directories(stage_dir(stage));
        json counts;
        std::vector<fs::path> outputs;
        switch (stage) {
            case Stage::ingest: outputs = do_ingest(counts); break;
            case Stage::candidates: outputs = do_candidates(counts); break;
            case Stage::features: outputs = do_features(counts); break;
            case Stage::train: outputs = do_train(counts); break;
            case Stage::classify: outputs = do_classify(counts); break;
            case Stage::geo: outputs = do_geo(counts); break;
            case Stage::migrate: outputs = do_migrate(counts); break;
            case Stage::analyze: outputs = do_analyze(counts); break;
        }
        write_manifest(stage, inputs, outputs, counts);
        return {stage, true};
    }

    std::vector<StageResult> run_through(Stage last, bool force) {
        std::vector<StageResult> results;
        for (Stage s : stage_order()) {
            results.push_back(run(s, force));
            if (s == last) break;
        }
        return results;
    }

private:
    // --- manifest machinery ---

    std::string rel(const fs::path& p) const {
        return p.lexically_proximate(cfg_.config_dir).generic_string();
    }

    json stage_config(Stage s) const {
        json j;
        switch (s) {
            case Stage::ingest:
                j = {{"embedding_dim", cfg_.embedding_dim},
                     {"sample_window", {cfg_.sample_window_lo, cfg_.sample_window_hi}}};
                break;
            case Stage::candidates:
                j = {{"candidate_window", {cfg_.window.lo, cfg_.window.hi}},
                     {"jw_threshold", cfg_.jw_threshold}};
                break;
            case Stage::features:
                j = json::object();
                break;
            case Stage::train:
                j = cfg_.canonical()["model"];
                j["seed"] = cfg_.seed;
                break;
            case Stage::classify:
                j = {{"stage1_threshold", cfg_.cascade.stage1_threshold},
                     {"stage2_threshold", cfg_.cascade.stage2_threshold}};
                break;
            case Stage::geo:
                j = {{"client", client_kind()}};
                break;
            case Stage::migrate:
                j = cfg_.canonical()["migration"];
                break;
            case Stage::analyze:
                j = {{"min_pubs", cfg_.min_pubs},
                     {"horizons", cfg_.horizons},
                     {"early_career_years", cfg_.early_career_years}};
                break;
        }
        return j;
    }

    std::string client_kind() const {
        if (!cfg_.geo_mock.empty()) return "mock";
        const char* url = std::getenv("LINKFORGE_GEO_URL");
        return (url && *url) ? "http" : "none";
    }

    std::vector<fs::path> stage_inputs(Stage s) const {
        std::vector<fs::path> in;
        auto add = [&](const fs::path& p) {
            if (!p.empty()) in.push_back(p);
        };
        switch (s) {
            case Stage::ingest:
                add(cfg_.graduates);
                add(cfg_.publications);
                add(cfg_.patent_citations);
                add(cfg_.patent_paper_pairs);
                add(cfg_.embeddings);
                break;
            case Stage::candidates:
                add(stage_dir(Stage::ingest) / "graduates.jsonl");
                add(stage_dir(Stage::ingest) / "publications.jsonl");
                add(cfg_.nicknames);
                break;
            case Stage::features:
                add(stage_dir(Stage::ingest) / "graduates.jsonl");
                add(stage_dir(Stage::ingest) / "publications.jsonl");
                add(stage_dir(Stage::candidates) / "candidates.jsonl");
                add(cfg_.nicknames);
                break;
            case Stage::train:
                add(stage_dir(Stage::candidates) / "candidates.jsonl");
                add(stage_dir(Stage::features) / "features.bin");
                break;
            case Stage::classify:
                add(stage_dir(Stage::candidates) / "candidates.jsonl");
                add(stage_dir(Stage::features) / "features.bin");
                add(stage_dir(Stage::train) / "model.cascade");
                break;
            case Stage::geo:
                add(stage_dir(Stage::ingest) / "publications.jsonl");
                add(cfg_.gazetteer_dir / "countries.txt");
                add(cfg_.gazetteer_dir / "us_states.txt");
                add(cfg_.gazetteer_dir / "universities.txt");
                add(cfg_.geo_mock);
                break;
            case Stage::migrate:
                add(stage_dir(Stage::ingest) / "graduates.jsonl");
                add(stage_dir(Stage::classify) / "links.jsonl");
                add(stage_dir(Stage::geo) / "assignments.jsonl");
                add(cfg_.labeled_histories);
                break;
            case Stage::analyze:
                add(stage_dir(Stage::ingest) / "graduates.jsonl");
                add(stage_dir(Stage::ingest) / "publications.jsonl");
                add(stage_dir(Stage::ingest) / "patent_citations.jsonl");
                add(stage_dir(Stage::ingest) / "patent_paper_pairs.jsonl");
                add(stage_dir(Stage::candidates) / "candidates.jsonl");
                add(stage_dir(Stage::classify) / "links.jsonl");
                add(stage_dir(Stage::classify) / "stage1_links.jsonl");
                add(stage_dir(Stage::geo) / "assignments.jsonl");
                add(stage_dir(Stage::migrate) / "events_base.jsonl");
                add(stage_dir(Stage::migrate) / "events_high_precision.jsonl");
                add(stage_dir(Stage::migrate) / "events_high_recall.jsonl");
                add(cfg_.regions);
                add(cfg_.foreign_share);
                break;
        }
        return in;
    }

    void check_upstream(Stage s) const {
        for (Stage u : upstream_of(s)) {
            const auto mp = manifest_path(u);
            if (!fs::exists(mp)) {
                throw MissingUpstream("stage '" + std::string(to_string(s)) + "' needs '" +
                                      to_string(u) + "' to run first");
            }
            json m;
            try {
                m = json::parse(io::read_file(mp));
            } catch (const json::exception&) {
                throw StaleUpstream("manifest of '" + std::string(to_string(u)) + "' is unreadable; rerun it");
            }
            const std::string want = io::hex64(io::fnv1a(stage_config(u).dump()));
            if (m.value("stage_config_hash", "") != want) {
                throw StaleUpstream("config changed for stage '" + std::string(to_string(u)) + "'; rerun it");
            }
            for (const auto& out : m.value("outputs", json::array())) {
                const fs::path p = cfg_.config_dir / out.at("path").get<std::string>();
                if (!fs::exists(p)) {
                    throw MissingUpstream("output of '" + std::string(to_string(u)) + "' missing: " + p.string());
                }
                if (io::hash_file(p) != out.at("hash").get<std::string>()) {
                    throw StaleUpstream("output of '" + std::string(to_string(u)) + "' changed on disk: " +
                                        p.string() + "; rerun it");
                }
            }
        }
    }

    bool up_to_date(Stage s) const {
        const auto mp = manifest_path(s);
        if (!fs::exists(mp)) return false;
        json m;
        try {
            m = json::parse(io::read_file(mp));
        } catch (const json::exception&) {
            return false;
        }
        if (m.value("stage_config_hash", "") != io::hex64(io::fnv1a(stage_config(s).dump()))) return false;
        const auto inputs = stage_inputs(s);
        const auto& recorded = m.value("inputs", json::array());
        if (recorded.size() != inputs.size()) return false;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            if (!fs::exists(inputs[i])) return false;
            if (recorded[i].at("path").get<std::string>() != rel(inputs[i])) return false;
            if (recorded[i].at("hash").get<std::string>() != io::hash_file(inputs[i])) return false;
        }
        for (const auto& out : m.value("outputs", json::array())) {
            const fs::path p = cfg_.config_dir / out.at("path").get<std::string>();
            if (!fs::exists(p) || io::hash_file(p) != out.at("hash").get<std::string>()) return false;
        }
        return true;
    }

    void write_manifest(Stage s, const std::vector<fs::path>& inputs,
                        const std::vector<fs::path>& outputs, const json& counts) {
        json m;
        m["stage"] = to_string(s);
        m["config_hash"] = cfg_.config_hash();
        m["stage_config_hash"] = io::hex64(io::fnv1a(stage_config(s).dump()));
        m["seed"] = cfg_.seed;
        json in = json::array();
        for (const auto& p : inputs) in.push_back({{"path", rel(p)}, {"hash", io::hash_file(p)}});
        m["inputs"] = in;
        json out = json::array();
        for (const auto& p : outputs) out.push_back({{"path", rel(p)}, {"hash", io::hash_file(p)}});
        m["outputs"] = out;
        m["counts"] = counts;
        io::atomic_write(manifest_path(s), m.dump(2) + "\n");
    }

    // --- shared loaders ---

    records::Corpus load_canonical_corpus() const {
        records::IngestManifest m;
        m.graduates = stage_dir(Stage::ingest) / "graduates.jsonl";
        m.publications = stage_dir(Stage::ingest) / "publications.jsonl";
        m.patent_citations = stage_dir(Stage::ingest) / "patent_citations.jsonl";
        m.patent_paper_pairs = stage_dir(Stage::ingest) / "patent_paper_pairs.jsonl";
        m.embedding_dim = cfg_.embedding_dim;
        m.sample_window_lo = cfg_.sample_window_lo;
        m.sample_window_hi = cfg_.sample_window_hi;
        return records::ingest_corpus(m);
    }

    std::vector<blocking::CandidateLink> load_candidates() const {
        std::vector<blocking::CandidateLink> out;
        io::for_each_line(stage_dir(Stage::candidates) / "candidates.jsonl",
                          [&](std::size_t, const std::string& line) {
                              out.push_back(blocking::candidate_from_json(json::parse(line)));
                          });
        return out;
    }

    struct LinkRow {
        std::string graduate_id;
        std::string pub_id;
        int position = 0;
        double p1 = 0.0, p2 = 0.0;
        std::optional<bool> label;
    };

    std::vector<LinkRow> load_links(const fs::path& path) const {
        std::vector<LinkRow> out;
        io::for_each_line(path, [&](std::size_t, const std::string& line) {
            const json j = json::parse(line);
            LinkRow r;
            r.graduate_id = j.at("graduate_id").get<std::string>();
            r.pub_id = j.at("pub_id").get<std::string>();
            r.position = j.at("author_position").get<int>();
            r.p1 = j.value("p1", 0.0);
            r.p2 = j.value("p2", 0.0);
            if (j.contains("label") && !j["label"].is_null()) r.label = j["label"].get<bool>();
            out.push_back(std::move(r));
        });
        return out;
    }

    std::map<std::pair<std::string, int>, std::string> load_assignments() const {
        std::map<std::pair<std::string, int>, std::string> out;
        io::for_each_line(stage_dir(Stage::geo) / "assignments.jsonl",
                          [&](std::size_t, const std::string& line) {
                              const json j = json::parse(line);
                              out[{j.at("pub_id").get<std::string>(), j.at("position").get<int>()}] =
                                  j.at("country").get<std::string>();
                          });
        return out;
    }

    std::map<std::string, migration::MigrationEvent> load_events(const std::string& name) const {
        std::map<std::string, migration::MigrationEvent> out;
        io::for_each_line(stage_dir(Stage::migrate) / name, [&](std::size_t, const std::string& line) {
            auto ev = migration::MigrationEvent::from_json(json::parse(line));
            out[ev.graduate_id] = std::move(ev);
        });
        return out;
    }

    // --- stage bodies (declared here, defined below for readability) ---

    std::vector<fs::path> do_ingest(json& counts);
    std::vector<fs::path> do_candidates(json& counts);
    std::vector<fs::path> do_features(json& counts);
    std::vector<fs::path> do_train(json& counts);
    std::vector<fs::path> do_classify(json& counts);
    std::vector<fs::path> do_geo(json& counts);
    std::vector<fs::path> do_migrate(json& counts);
    std::vector<fs::path> do_analyze(json& counts);

    PipelineConfig cfg_;
};

// ---------------------------------------------------------------------------
// Stage bodies
// ---------------------------------------------------------------------------

inline std::vector<fs::path> Runner::do_ingest(json& counts) {
    const auto corpus = records::ingest_corpus(cfg_.ingest_manifest());
    const auto dir = stage_dir(Stage::ingest);
    records::serialize_corpus(corpus, dir);
    const auto report = records::validate_corpus(corpus);
    io::atomic_write(dir / "report.json", report.to_json().dump(2) + "\n");
    counts = {{"graduates", report.graduates},
              {"publications", report.publications},
              {"patent_citations", report.patent_citations},
              {"patent_paper_pairs", report.patent_paper_pairs},
              {"warnings", report.warnings.size()}};
    return {dir / "graduates.jsonl", dir / "publications.jsonl", dir / "patent_citations.jsonl",
            dir / "patent_paper_pairs.jsonl", dir / "report.json"};
}

inline std::vector<fs::path> Runner::do_candidates(json& counts) {
    const auto corpus = load_canonical_corpus();
    const auto nicknames = cfg_.nicknames.empty() ? names::NicknameTable{}
                                                  : names::NicknameTable::from_file(cfg_.nicknames);
    auto candidates = blocking::generate_candidates(corpus, nicknames, cfg_.window, cfg_.jw_threshold);
    blocking::label_candidates(candidates, corpus);
    std::string out;
    std::size_t labeled = 0;
    for (const auto& c : candidates) {
        if (c.label) ++labeled;
        out += blocking::candidate_to_json(c).dump() + "\n";
    }
    const auto path = stage_dir(Stage::candidates) / "candidates.jsonl";
    io::atomic_write(path, out);
    counts = {{"candidates", candidates.size()}, {"labeled", labeled}};
    return {path};
}

inline std::vector<fs::path> Runner::do_features(json& counts) {
    const auto corpus = load_canonical_corpus();
    const auto nicknames = cfg_.nicknames.empty() ? names::NicknameTable{}
                                                  : names::NicknameTable::from_file(cfg_.nicknames);
    const auto frequencies = names::build_frequencies(corpus);
    const auto candidates = load_candidates();
    features::FeatureAssembler assembler(corpus, frequencies, nicknames);
    std::vector<std::pair<std::uint64_t, std::vector<double>>> rows;
    rows.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        rows.emplace_back(i, assembler.assemble(candidates[i]));
    }
    const auto path = stage_dir(Stage::features) / "features.bin";
    features::write_feature_shard(path, assembler.layout(), rows);
    counts = {{"rows", rows.size()}, {"width", assembler.layout().total()}};
    return {path};
}

inline std::vector<fs::path> Runner::do_train(json& counts) {
    const auto candidates = load_candidates();
    const auto shard = features::read_feature_shard(stage_dir(Stage::features) / "features.bin");
    if (shard.rows.size() != candidates.size()) {
        throw StaleUpstream("feature shard row count does not match candidates");
    }
    std::vector<std::vector<double>> X;
    std::vector<bool> y;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!candidates[i].label) continue;
        X.push_back(shard.rows[i].second);
        y.push_back(*candidates[i].label);
    }
    if (X.empty()) throw InsufficientData("training requires labeled candidates");
    const auto cascade = model::train_cascade(X, y, shard.layout, cfg_.cascade, cfg_.seed);
    const auto dir = stage_dir(Stage::train);
    io::atomic_write(dir / "model.cascade", model::serialize_cascade(cascade));
    json hist1 = json::array(), hist2 = json::array();
    for (const auto& h : cascade.stage1.history) {
        hist1.push_back({{"train_loss", h.train_loss}, {"holdout_loss", h.holdout_loss}, {"lr", h.learning_rate}});
    }
    for (const auto& h : cascade.stage2.history) {
        hist2.push_back({{"train_loss", h.train_loss}, {"holdout_loss", h.holdout_loss}, {"lr", h.learning_rate}});
    }
    json report{{"labeled_rows", X.size()},
                {"stage1_epochs", cascade.stage1.epochs_run},
                {"stage2_epochs", cascade.stage2.epochs_run},
                {"stage1_history", hist1},
                {"stage2_history", hist2}};
    io::atomic_write(dir / "report.json", report.dump(2) + "\n");
    counts = {{"labeled_rows", X.size()}};
    return {dir / "model.cascade", dir / "report.json"};
}

inline std::vector<fs::path> Runner::do_classify(json& counts) {
    const auto candidates = load_candidates();
    const auto shard = features::read_feature_shard(stage_dir(Stage::features) / "features.bin");
    if (shard.rows.size() != candidates.size()) {
        throw StaleUpstream("feature shard row count does not match candidates");
    }
    const auto cascade = model::deserialize_cascade(io::read_file(stage_dir(Stage::train) / "model.cascade"));
    std::vector<std::vector<double>> X;
    X.reserve(shard.rows.size());
    for (auto& [key, row] : shard.rows) X.push_back(row);
    const auto sample = model::run_cascade_labeled(cascade, candidates, X);

    std::map<std::tuple<std::string, std::string, int>, std::optional<bool>> label_of;
    for (const auto& c : candidates) {
        label_of[{c.graduate_id, c.pub_id, c.author_position}] = c.label;
    }

    const auto dir = stage_dir(Stage::classify);
    std::string out;
    for (const auto& l : sample.accepted) {
        json j{{"graduate_id", l.graduate_id},
               {"pub_id", l.pub_id},
               {"author_position", l.author_position},
               {"match_class", names::to_string(l.match_class)},
               {"p1", l.stage1_prob},
               {"p2", l.stage2_prob}};
        const auto& lab = label_of[{l.graduate_id, l.pub_id, l.author_position}];
        if (lab) j["label"] = *lab;
        out += j.dump() + "\n";
    }
    io::atomic_write(dir / "links.jsonl", out);

    // Stage-1 positives, for the stage-wise error analysis downstream.
    out.clear();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (sample.stage1_probs[i] < cascade.stage1_threshold) continue;
        json j{{"graduate_id", candidates[i].graduate_id},
               {"pub_id", candidates[i].pub_id},
               {"author_position", candidates[i].author_position},
               {"p1", sample.stage1_probs[i]}};
        if (sample.stage2_probs[i]) j["p2"] = *sample.stage2_probs[i];
        if (candidates[i].label) j["label"] = *candidates[i].label;
        out += j.dump() + "\n";
    }
    io::atomic_write(dir / "stage1_links.jsonl", out);

    json report{{"candidates", candidates.size()}, {"accepted", sample.accepted.size()}};
    if (sample.confusion) {
        auto conf_json = [](const analytics::ConfusionMatrix& c) {
            const auto r = analytics::metrics_from_confusion(c);
            return json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn},
                        {"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}};
        };
        report["stage1"] = conf_json(sample.confusion->stage1);
        report["stage2"] = conf_json(sample.confusion->stage2);
        report["final"] = conf_json(sample.confusion->final);
    }
    io::atomic_write(dir / "report.json", report.dump(2) + "\n");
    counts = {{"accepted", sample.accepted.size()}};
    return {dir / "links.jsonl", dir / "stage1_links.jsonl", dir / "report.json"};
}

inline std::vector<fs::path> Runner::do_geo(json& counts) {
    const auto corpus = load_canonical_corpus();
    const auto gazetteer = geo::Gazetteer::from_files(cfg_.gazetteer_dir);
    std::unique_ptr<geo::CountryClient> client;
    if (!cfg_.geo_mock.empty()) {
        client = geo::MockCountryClient::from_file(cfg_.geo_mock);
    }
#ifdef LINKFORGE_ENABLE_HTTP_GEO
    if (!client) client = geo::HttpCountryClient::from_environment();
#endif
    auto cache = geo::ResolutionCache::load(stage_dir(Stage::geo) / "cache.tsv");
    const auto res = geo::resolve_corpus(corpus, gazetteer, client.get(), cache);

    const auto dir = stage_dir(Stage::geo);
    std::string out;
    for (const auto& [s, r] : res.by_string) {
        json j{{"affiliation_string", s}, {"method", geo::to_string(r.method)}, {"cached", r.cached}};
        if (r.country) j["country"] = *r.country;
        out += j.dump() + "\n";
    }
    io::atomic_write(dir / "resolutions.jsonl", out);

    out.clear();
    for (const auto& [key, country] : res.assignments) {
        out += json{{"pub_id", key.first}, {"position", key.second}, {"country", country}}.dump() + "\n";
    }
    io::atomic_write(dir / "assignments.jsonl", out);
    io::atomic_write(dir / "report.json", res.report.to_json().dump(2) + "\n");
    counts = {{"unique_strings", res.report.unique_strings},
              {"resolved", res.report.gazetteer_resolved + res.report.fallback_resolved}};
    return {dir / "resolutions.jsonl", dir / "assignments.jsonl", dir / "report.json"};
}

inline std::vector<fs::path> Runner::do_migrate(json& counts) {
    const auto corpus = load_canonical_corpus();
    const auto links = load_links(stage_dir(Stage::classify) / "links.jsonl");
    const auto assignments = load_assignments();

    // Per graduate: merged per-publication observations.
    struct PubAgg {
        int rel_year = 0;
        double prob = 0.0;
        std::set<std::string> countries;
    };
    std::map<std::string, std::map<std::string, PubAgg>> per_grad;  // grad -> pub -> agg
    for (const auto& l : links) {
        const auto* grad = corpus.find_graduate(l.graduate_id);
        const auto* pub = corpus.find_publication(l.pub_id);
        if (!grad || !pub) continue;
        auto& agg = per_grad[l.graduate_id][l.pub_id];
        agg.rel_year = pub->pub_year - grad->grad_year;
        agg.prob = std::max(agg.prob, l.p2);
        auto it = assignments.find({l.pub_id, l.position});
        if (it != assignments.end()) agg.countries.insert(it->second);
    }

    auto observations = [&](const std::string& grad_id) {
        std::vector<migration::PubObservation> obs;
        auto it = per_grad.find(grad_id);
        if (it == per_grad.end()) return obs;
        for (const auto& [pub_id, agg] : it->second) {
            obs.push_back({agg.rel_year, agg.prob,
                           std::vector<std::string>(agg.countries.begin(), agg.countries.end())});
        }
        return obs;
    };
    auto linked_pub_count = [&](const std::string& grad_id) -> std::size_t {
        auto it = per_grad.find(grad_id);
        return it == per_grad.end() ? 0 : it->second.size();
    };

    const auto dir = stage_dir(Stage::migrate);
    std::vector<fs::path> outputs;
    migration::MigrationParams base = cfg_.default_base;
    migration::MigrationParams high_precision = cfg_.default_high_precision;
    migration::MigrationParams high_recall = cfg_.default_high_recall;
    json selection{{"source", "defaults"}};

    if (!cfg_.labeled_histories.empty()) {
        // Ground truth: any non-US employment year within the post window.
        std::map<std::string, bool> truth;
        io::for_each_line(cfg_.labeled_histories, [&](std::size_t, const std::string& line) {
            const json j = json::parse(line);
            const std::string gid = j.at("graduate_id").get<std::string>();
            const auto* grad = corpus.find_graduate(gid);
            if (!grad) return;
            bool migrated = false;
            for (const auto& stint : j.at("stints")) {
                const int year = stint.at("year").get<int>();
                const std::string country = stint.at("country").get<std::string>();
                const int rel = year - grad->grad_year;
                if (country != "US" && rel >= 0 && rel <= migration::kRelYearHi) migrated = true;
            }
            truth[gid] = migrated;
        });

        std::vector<migration::LabeledSeries> sample;
        for (const auto& [gid, is_migrated] : truth) {
            migration::LabeledSeries ls;
            ls.graduate_id = gid;
            ls.truth_migrated = is_migrated;
            ls.linked_pub_count = linked_pub_count(gid);
            const auto obs = observations(gid);
            for (double t : cfg_.grid.thresholds) {
                ls.series_by_threshold[t] = migration::build_series(gid, obs, t);
            }
            sample.push_back(std::move(ls));
        }
        const auto grid = migration::grid_validate(sample, cfg_.grid);
        base = grid.base;
        high_precision = grid.high_precision;
        high_recall = grid.high_recall;
        selection = {{"source", "grid_validation"},
                     {"labeled_graduates", sample.size()},
                     {"notes", grid.notes}};

        // Grid CSVs: one matrix per metric per stratum.
        for (std::size_t s = 0; s < cfg_.grid.strata.size(); ++s) {
            for (const char* metric : {"precision", "recall", "f1"}) {
                std::string csv = "k";
                for (double t : cfg_.grid.thresholds) csv += "," + io::format_double(t);
                csv += "\n";
                for (std::size_t k = 0; k < cfg_.grid.persistence.size(); ++k) {
                    csv += std::to_string(cfg_.grid.persistence[k]);
                    for (std::size_t t = 0; t < cfg_.grid.thresholds.size(); ++t) {
                        const auto& cell = grid.cell(s, t, k);
                        double v = 0.0;
                        if (std::string(metric) == "precision") v = cell.precision();
                        else if (std::string(metric) == "recall") v = cell.recall();
                        else v = cell.f1();
                        csv += "," + (cell.defined ? io::format_double(v) : std::string("NA"));
                    }
                    csv += "\n";
                }
                const auto path = dir / ("grid_" + std::string(metric) + "_min" +
                                         std::to_string(cfg_.grid.strata[s]) + ".csv");
                io::atomic_write(path, csv);
                outputs.push_back(path);
            }
        }
    }

    selection["base"] = {{"prob_threshold", base.prob_threshold}, {"persistence", base.persistence}};
    selection["high_precision"] = {{"prob_threshold", high_precision.prob_threshold},
                                   {"persistence", high_precision.persistence}};
    selection["high_recall"] = {{"prob_threshold", high_recall.prob_threshold},
                                {"persistence", high_recall.persistence}};
    io::atomic_write(dir / "selection.json", selection.dump(2) + "\n");
    outputs.push_back(dir / "selection.json");

    const std::vector<std::pair<std::string, migration::MigrationParams>> runs = {
        {"events_base.jsonl", base},
        {"events_high_precision.jsonl", high_precision},
        {"events_high_recall.jsonl", high_recall}};
    std::size_t graduates_with_links = 0;
    for (const auto& [filename, params] : runs) {
        std::string out;
        for (const auto& [gid, pubs] : per_grad) {
            const auto series = migration::build_series(gid, observations(gid), params.prob_threshold);
            const auto ev = migration::detect_migration(series, params.persistence);
            out += ev.to_json().dump() + "\n";
        }
        io::atomic_write(dir / filename, out);
        outputs.push_back(dir / filename);
    }
    graduates_with_links = per_grad.size();
    counts = {{"graduates_with_links", graduates_with_links}};
    return outputs;
}

inline std::vector<fs::path> Runner::do_analyze(json& counts) {
    const auto corpus = load_canonical_corpus();
    const auto candidates = load_candidates();
    const auto links = load_links(stage_dir(Stage::classify) / "links.jsonl");
    const auto stage1_links = load_links(stage_dir(Stage::classify) / "stage1_links.jsonl");
    const auto assignments = load_assignments();
    const auto base_events = load_events("events_base.jsonl");
    const auto hp_events = load_events("events_high_precision.jsonl");
    const auto hr_events = load_events("events_high_recall.jsonl");

    std::map<std::string, std::string> region_of;
    if (!cfg_.regions.empty()) {
        io::for_each_line(cfg_.regions, [&](std::size_t, const std::string& line) {
            if (line[0] == '#') return;
            const auto bar = line.find('|');
            if (bar == std::string::npos) return;
            region_of[line.substr(0, bar)] = line.substr(bar + 1);
        });
    }

    const auto dir = stage_dir(Stage::analyze);
    std::vector<fs::path> outputs;

    // Linked publications per graduate (distinct pubs).
    std::map<std::string, std::set<std::string>> pubs_of;
    for (const auto& l : links) pubs_of[l.graduate_id].insert(l.pub_id);

    int data_end_year = cfg_.sample_window_lo;
    for (const auto& p : corpus.publications()) data_end_year = std::max(data_end_year, p.pub_year);

    // --- cohort emigration ---
    std::vector<analytics::GraduateOutcome> outcomes;
    for (const auto& g : corpus.graduates()) {
        auto it = pubs_of.find(g.graduate_id);
        if (it == pubs_of.end()) continue;
        analytics::GraduateOutcome o;
        o.graduate_id = g.graduate_id;
        o.grad_year = g.grad_year;
        o.field = g.field;
        o.linked_pub_count = it->second.size();
        auto pick = [&](const std::map<std::string, migration::MigrationEvent>& events) {
            auto e = events.find(g.graduate_id);
            migration::MigrationEvent ev;
            ev.graduate_id = g.graduate_id;
            return e == events.end() ? ev : e->second;
        };
        o.base = pick(base_events);
        o.high_precision = pick(hp_events);
        o.high_recall = pick(hr_events);
        outcomes.push_back(std::move(o));
    }
    const auto cohorts = analytics::cohort_emigration(outcomes, cfg_.min_pubs, data_end_year,
                                                      region_of, cfg_.horizons);

    std::string csv = "cohort,horizon,share,lo,hi,eligible\n";
    for (const auto& [year, by_h] : cohorts.cells) {
        for (const auto& [h, cell] : by_h) {
            csv += std::to_string(year) + "," + std::to_string(h) + "," + io::format_double(cell.share) +
                   "," + io::format_double(cell.lo) + "," + io::format_double(cell.hi) + "," +
                   std::to_string(cell.eligible) + "\n";
        }
    }
    io::atomic_write(dir / "cohort_emigration.csv", csv);
    outputs.push_back(dir / "cohort_emigration.csv");

    csv = "cohort,horizon,region,share\n";
    for (const auto& [year, by_h] : cohorts.destination_regions) {
        for (const auto& [h, regions] : by_h) {
            for (const auto& [region, share] : regions) {
                csv += std::to_string(year) + "," + std::to_string(h) + "," + region + "," +
                       io::format_double(share) + "\n";
            }
        }
    }
    io::atomic_write(dir / "destination_regions.csv", csv);
    outputs.push_back(dir / "destination_regions.csv");

    csv = "field,horizon,share,lo,hi,eligible\n";
    for (const auto& [field, by_h] : cohorts.by_field) {
        for (const auto& [h, cell] : by_h) {
            csv += field + "," + std::to_string(h) + "," + io::format_double(cell.share) + "," +
                   io::format_double(cell.lo) + "," + io::format_double(cell.hi) + "," +
                   std::to_string(cell.eligible) + "\n";
        }
    }
    io::atomic_write(dir / "field_emigration.csv", csv);
    outputs.push_back(dir / "field_emigration.csv");

    // --- correlation with foreign-national share ---
    json correlation = json::object();
    if (!cfg_.foreign_share.empty()) {
        std::map<int, double> foreign;
        const json fj = json::parse(io::read_file(cfg_.foreign_share));
        for (auto it = fj.begin(); it != fj.end(); ++it) {
            foreign[std::stoi(it.key())] = it.value().get<double>();
        }
        for (int h : cfg_.horizons) {
            std::map<int, double> shares;
            for (const auto& [year, by_h] : cohorts.cells) {
                auto it = by_h.find(h);
                if (it != by_h.end()) shares[year] = it->second.share;
            }
            const std::string key = "horizon_" + std::to_string(h);
            try {
                correlation[key] = analytics::series_correlation(shares, foreign);
            } catch (const Error& e) {
                correlation[key + "_note"] = e.what();
            }
        }
    }
    io::atomic_write(dir / "correlation.json", correlation.dump(2) + "\n");
    outputs.push_back(dir / "correlation.json");

    // --- stayer/leaver comparison over the first post-PhD years ---
    std::map<std::string, std::size_t> patent_cites_of, pairs_of;
    for (const auto& pc : corpus.patent_citations()) ++patent_cites_of[pc.cited_pub_id];
    for (const auto& pp : corpus.patent_paper_pairs()) ++pairs_of[pp.pub_id];

    std::vector<analytics::EarlyCareer> early;
    for (const auto& g : corpus.graduates()) {
        auto it = pubs_of.find(g.graduate_id);
        if (it == pubs_of.end()) continue;
        analytics::EarlyCareer ec;
        ec.graduate_id = g.graduate_id;
        const auto be = base_events.find(g.graduate_id);
        ec.leaver = be != base_events.end() && be->second.migrated && be->second.onset_relative_year &&
                    *be->second.onset_relative_year <= cfg_.early_career_years;
        for (const auto& pub_id : it->second) {
            const auto* pub = corpus.find_publication(pub_id);
            if (!pub) continue;
            const int gap = pub->pub_year - g.grad_year;
            if (gap < 0 || gap > cfg_.early_career_years) continue;
            ++ec.publications;
            ec.scientific_citations += corpus.inbound_citations(pub_id);
            auto pc = patent_cites_of.find(pub_id);
            if (pc != patent_cites_of.end()) ec.patent_citations += pc->second;
            auto pp = pairs_of.find(pub_id);
            if (pp != pairs_of.end()) ec.patent_paper_pairs += pp->second;
        }
        early.push_back(std::move(ec));
    }
    json gc;
    try {
        const auto comparison = analytics::group_compare(early);
        gc = {{"stayers", comparison.stayers.to_json()}, {"leavers", comparison.leavers.to_json()}};
    } catch (const EmptyGroup& e) {
        gc = {{"error", e.what()}};
    }
    io::atomic_write(dir / "group_compare.json", gc.dump(2) + "\n");
    outputs.push_back(dir / "group_compare.json");

    // --- stratified true-match rates and fp histograms ---
    std::map<std::string, std::string> ethnicity_of;
    for (const auto& g : corpus.graduates()) {
        if (g.ethnicity_label) ethnicity_of[g.graduate_id] = *g.ethnicity_label;
    }
    auto group_of = [&](const std::string& gid) {
        auto it = ethnicity_of.find(gid);
        return it == ethnicity_of.end() ? std::string("unknown") : it->second;
    };

    std::vector<analytics::LabeledLink> candidate_links, accepted_links, high_conf_links, s1_links;
    for (const auto& c : candidates) {
        if (!c.label) continue;
        candidate_links.push_back({c.graduate_id, group_of(c.graduate_id), *c.label});
    }
    for (const auto& l : links) {
        if (!l.label) continue;
        accepted_links.push_back({l.graduate_id, group_of(l.graduate_id), *l.label});
        if (l.p2 >= cfg_.cascade.high_confidence_threshold) {
            high_conf_links.push_back({l.graduate_id, group_of(l.graduate_id), *l.label});
        }
    }
    for (const auto& l : stage1_links) {
        if (!l.label) continue;
        s1_links.push_back({l.graduate_id, group_of(l.graduate_id), *l.label});
    }

    csv = "link_set,group,links,true_match_rate\n";
    const std::vector<std::pair<std::string, const std::vector<analytics::LabeledLink>*>> sets = {
        {"candidates", &candidate_links}, {"accepted", &accepted_links}, {"high_confidence", &high_conf_links}};
    for (const auto& [name, set] : sets) {
        if (set->empty()) continue;
        const auto rep = analytics::stratified_error_rates(*set);
        for (const auto& [group, rate] : rep.true_match_rate) {
            csv += name + "," + group + "," + std::to_string(rep.group_link_count.at(group)) + "," +
                   io::format_double(rate) + "\n";
        }
    }
    io::atomic_write(dir / "true_match_rates.csv", csv);
    outputs.push_back(dir / "true_match_rates.csv");

    csv = "stage,group,bin_lo,bin_hi,graduates\n";
    const std::vector<std::pair<std::string, const std::vector<analytics::LabeledLink>*>> stages = {
        {"stage1", &s1_links}, {"final", &accepted_links}};
    for (const auto& [name, set] : stages) {
        if (set->empty()) continue;
        const auto rep = analytics::stratified_error_rates(*set);
        auto emit = [&](const std::string& group, const analytics::FpHistogram& h) {
            for (std::size_t b = 0; b < h.bins.size(); ++b) {
                csv += name + "," + group + "," + io::format_double(0.1 * static_cast<double>(b)) + "," +
                       io::format_double(0.1 * static_cast<double>(b + 1)) + "," +
                       std::to_string(h.bins[b]) + "\n";
            }
        };
        emit("all", rep.overall);
        for (const auto& [group, hist] : rep.by_group) emit(group, hist);
    }
    io::atomic_write(dir / "fp_histograms.csv", csv);
    outputs.push_back(dir / "fp_histograms.csv");

    // --- patent citation shares ---
    // Classify linked publications by their best link's graduate.
    struct BestLink {
        double p2 = -1.0;
        std::string graduate_id;
    };
    std::map<std::string, BestLink> best_of;
    for (const auto& l : links) {
        auto& b = best_of[l.pub_id];
        if (l.p2 > b.p2 || (l.p2 == b.p2 && l.graduate_id < b.graduate_id)) {
            b = {l.p2, l.graduate_id};
        }
    }
    std::map<std::string, std::pair<analytics::ScienceCategory, std::optional<std::string>>> category_of;
    for (const auto& [pub_id, best] : best_of) {
        const auto* grad = corpus.find_graduate(best.graduate_id);
        const auto* pub = corpus.find_publication(pub_id);
        if (!grad || !pub) continue;
        const auto ev = base_events.find(best.graduate_id);
        if (ev != base_events.end() && ev->second.migrated && ev->second.onset_relative_year) {
            const int onset_year = grad->grad_year + *ev->second.onset_relative_year;
            const auto cat = pub->pub_year < onset_year ? analytics::ScienceCategory::pre_emigration
                                                        : analytics::ScienceCategory::post_emigration;
            category_of[pub_id] = {cat, ev->second.destination};
        } else {
            category_of[pub_id] = {analytics::ScienceCategory::never_leaver, std::nullopt};
        }
    }
    // Unlinked publications with a non-US modal country stand in for foreign science.
    for (const auto& p : corpus.publications()) {
        if (category_of.count(p.pub_id)) continue;
        std::map<std::string, int> country_votes;
        for (const auto& a : p.authorships) {
            auto it = assignments.find({p.pub_id, a.position});
            if (it != assignments.end()) ++country_votes[it->second];
        }
        std::string modal;
        int best = 0;
        for (const auto& [code, n] : country_votes) {
            if (n > best) {
                best = n;
                modal = code;
            }
        }
        if (!modal.empty() && modal != "US") {
            category_of[p.pub_id] = {analytics::ScienceCategory::non_us, std::nullopt};
        }
    }

    std::vector<analytics::ClassifiedCitation> classified;
    for (const auto& pc : corpus.patent_citations()) {
        auto it = category_of.find(pc.cited_pub_id);
        if (it == category_of.end()) continue;
        classified.push_back({pc.filing_year, pc.assignee_country, it->second.first, it->second.second});
    }
    const auto shares = analytics::citation_shares(classified);

    csv = "filing_year,category,group,count,total,share\n";
    for (const auto& [key, cell] : shares.shares) {
        csv += std::to_string(std::get<0>(key)) + "," + std::get<1>(key) + "," + std::get<2>(key) + "," +
               std::to_string(cell.count) + "," + std::to_string(cell.total) + "," +
               io::format_double(cell.share) + "\n";
    }
    io::atomic_write(dir / "citation_shares.csv", csv);
    outputs.push_back(dir / "citation_shares.csv");

    csv = "filing_year,category,count,total,share\n";
    for (const auto& [key, cell] : shares.destination_shares) {
        csv += std::to_string(key.first) + "," + key.second + "," + std::to_string(cell.count) + "," +
               std::to_string(cell.total) + "," + io::format_double(cell.share) + "\n";
    }
    io::atomic_write(dir / "destination_shares.csv", csv);
    outputs.push_back(dir / "destination_shares.csv");

    counts = {{"linked_graduates", pubs_of.size()}, {"classified_citations", classified.size()}};
    return outputs;
}

}  // namespace linkforge::pipeline
