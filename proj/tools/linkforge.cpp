// SPDX-License-Identifier: Apache-2.0
//
// linkforge <stage> --config <file> [--force]
//
// Stages run in order: ingest, candidates, features, train, classify, geo,
// migrate, analyze. `all` runs the whole chain. A stage whose inputs and
// config are unchanged is skipped unless --force is given. Logs go to
// stderr; every artifact is a file under the configured output directory.

#define LINKFORGE_ENABLE_HTTP_GEO 1

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "linkforge/pipeline.hpp"

namespace {

// Exit codes by error class.
constexpr int kOk = 0;
constexpr int kInternal = 1;
constexpr int kConfig = 2;
constexpr int kData = 3;
constexpr int kMissingUpstream = 4;
constexpr int kStaleUpstream = 5;
constexpr int kInsufficientData = 6;
constexpr int kModel = 7;

int run_stages(const std::string& stage_name, const std::string& config_path, bool force) {
    using namespace linkforge;
    const auto cfg = pipeline::PipelineConfig::from_file(config_path);
    pipeline::Runner runner(cfg);

    auto report = [](const pipeline::StageResult& r) {
        std::cerr << "[linkforge] " << pipeline::to_string(r.stage)
                  << (r.ran ? ": done" : ": up to date, skipped") << "\n";
    };

    if (stage_name == "all") {
        for (const auto& r : runner.run_through(pipeline::Stage::analyze, force)) report(r);
    } else {
        report(runner.run(pipeline::stage_from_string(stage_name), force));
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"linkforge: graduate-to-publication linkage and migration analytics pipeline"};
    app.require_subcommand(1);

    const std::vector<std::string> stage_names = {"ingest", "candidates", "features", "train",
                                                  "classify", "geo", "migrate", "analyze", "all"};
    std::string config_path;
    bool force = false;
    std::string chosen;
    for (const auto& name : stage_names) {
        auto* sub = app.add_subcommand(
            name, name == "all" ? "Run every stage in order" : "Run the " + name + " stage");
        sub->add_option("--config", config_path, "Pipeline config file (JSON)")->required();
        sub->add_flag("--force", force, "Rerun even when outputs are up to date");
        sub->callback([&chosen, name]() { chosen = name; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        return run_stages(chosen, config_path, force);
    } catch (const linkforge::SchemaError& e) {
        std::cerr << "error (schema): " << e.what() << "\n";
        return kConfig;
    } catch (const linkforge::DuplicateIdError& e) {
        std::cerr << "error (duplicate id): " << e.what() << "\n";
        return kData;
    } catch (const linkforge::DimensionError& e) {
        std::cerr << "error (dimension): " << e.what() << "\n";
        return kData;
    } catch (const linkforge::UnparseableName& e) {
        std::cerr << "error (name): " << e.what() << "\n";
        return kData;
    } catch (const linkforge::MissingUpstream& e) {
        std::cerr << "error (missing upstream): " << e.what() << "\n";
        return kMissingUpstream;
    } catch (const linkforge::StaleUpstream& e) {
        std::cerr << "error (stale upstream): " << e.what() << "\n";
        return kStaleUpstream;
    } catch (const linkforge::InsufficientData& e) {
        std::cerr << "error (insufficient data): " << e.what() << "\n";
        return kInsufficientData;
    } catch (const linkforge::NonFiniteLoss& e) {
        std::cerr << "error (training): " << e.what() << "\n";
        return kModel;
    } catch (const linkforge::LayoutMismatch& e) {
        std::cerr << "error (layout): " << e.what() << "\n";
        return kModel;
    } catch (const linkforge::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInternal;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInternal;
    }
}
