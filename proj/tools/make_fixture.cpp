// SPDX-License-Identifier: Apache-2.0
//
// Generates a synthetic linkage corpus with planted ground truth, plus a
// ready-to-run pipeline config. Handy for demos and for exercising the CLI:
//
//   make_fixture --out /tmp/demo --graduates 200 --data-dir ./data
//   linkforge all --config /tmp/demo/config.json

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "support/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Synthetic corpus generator for the linkforge pipeline"};
    std::string out_dir;
    std::string data_dir = "data";
    std::size_t graduates = 200;
    std::uint64_t seed = 20240601;
    app.add_option("--out", out_dir, "Output directory")->required();
    app.add_option("--data-dir", data_dir, "Repo data directory (nicknames, gazetteer, regions)");
    app.add_option("--graduates", graduates, "Number of graduates");
    app.add_option("--seed", seed, "Generator seed");
    CLI11_PARSE(app, argc, argv);

    try {
        linkforge::testsupport::SynthOptions opt;
        opt.n_graduates = graduates;
        opt.seed = seed;
        const auto fixture = linkforge::testsupport::make_fixture(opt);
        linkforge::testsupport::write_fixture_files(fixture, out_dir,
                                                    std::filesystem::absolute(data_dir), opt);
        std::cerr << "wrote fixture: " << fixture.corpus.graduates().size() << " graduates, "
                  << fixture.corpus.publications().size() << " publications, planted true links "
                  << fixture.true_links << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
