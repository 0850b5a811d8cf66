// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <filesystem>
#include <random>

#include "linkforge/geo.hpp"

using namespace linkforge;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kRepo = LINKFORGE_REPO_DIR;

geo::Gazetteer repo_gazetteer() { return geo::Gazetteer::from_files(kRepo / "data/gazetteer"); }

struct FixtureRow {
    std::string affiliation;
    std::optional<std::string> country;
    std::string category;
};

std::vector<FixtureRow> load_fixture() {
    std::vector<FixtureRow> rows;
    io::for_each_line(kRepo / "testdata/affiliations_200.jsonl",
                      [&](std::size_t, const std::string& line) {
                          const json j = json::parse(line);
                          FixtureRow r;
                          r.affiliation = j.at("affiliation_string").get<std::string>();
                          if (!j.at("country").is_null()) r.country = j["country"].get<std::string>();
                          r.category = j.at("category").get<std::string>();
                          rows.push_back(std::move(r));
                      });
    return rows;
}

records::Corpus corpus_from_fixture(const std::vector<FixtureRow>& rows) {
    std::vector<records::PublicationRecord> pubs;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        records::PublicationRecord p;
        p.pub_id = "P" + std::to_string(i);
        p.pub_year = 2005;
        records::Authorship a;
        a.position = 0;
        a.raw_name = "Alex Example";
        a.affiliation_string = rows[i].affiliation;
        p.authorships.push_back(std::move(a));
        pubs.push_back(std::move(p));
    }
    return records::Corpus({}, std::move(pubs), {}, {}, {}, 2);
}

class FailingClient : public geo::CountryClient {
public:
    std::string name() const override { return "failing"; }
    std::vector<geo::ClientResponse> resolve(const std::vector<geo::ClientRequest>&) override {
        throw ClientUnavailable("endpoint is down");
    }
};

class BadCodeClient : public geo::CountryClient {
public:
    std::string name() const override { return "badcode"; }
    std::vector<geo::ClientResponse> resolve(const std::vector<geo::ClientRequest>& batch) override {
        std::vector<geo::ClientResponse> out;
        for (const auto& r : batch) out.push_back({r.string_id, "XX"});
        return out;
    }
};

records::Corpus single_string_corpus(const std::string& affiliation) {
    records::PublicationRecord p;
    p.pub_id = "P1";
    p.pub_year = 2000;
    records::Authorship a;
    a.position = 0;
    a.raw_name = "A B";
    a.affiliation_string = affiliation;
    p.authorships.push_back(a);
    return records::Corpus({}, {p}, {}, {}, {}, 2);
}

}  // namespace

TEST_CASE("gazetteer resolves the documented examples") {
    const auto g = repo_gazetteer();
    CHECK(g.resolve("Dept. of Physics, Tsinghua University, Beijing, China") == "CN");
    CHECK(g.resolve("MIT, Cambridge, MA 02139") == "US");
    CHECK(g.resolve("Unaffiliated researcher") == std::nullopt);
}

TEST_CASE("country precedence: rightmost mention wins, countries beat states") {
    const auto g = repo_gazetteer();
    CHECK(g.resolve("University of Toronto, Canada; now at Tsinghua University, Beijing, China") == "CN");
    CHECK(g.resolve("Tsinghua University, Beijing, China; formerly University of Toronto, Canada") == "CA");
    CHECK(g.resolve("Department of Physics, Cambridge, MA; visiting Kyoto University, Japan") == "JP");
}

TEST_CASE("category precedence is country, then state, then university") {
    const auto g = repo_gazetteer();
    // A university name never overrides an explicit country mention, even
    // when the university appears later in the string.
    CHECK(g.resolve("Visiting from Germany, now at Tsinghua University") == "DE");
    // A state hit outranks a university hit.
    CHECK(g.resolve("Tsinghua University alumni office, Cambridge, MA") == "US");
    // University-only strings resolve through the university table.
    CHECK(g.resolve("Tsinghua University, Haidian District") == "CN");
}

TEST_CASE("longer pattern wins at the same end position") {
    const auto g = repo_gazetteer();
    CHECK(g.resolve("Institute of Science, Pyongyang, North Korea") == "KP");
    CHECK(g.resolve("Institute of Science, Seoul, South Korea") == "KR");
    CHECK(g.resolve("Metallurgy Lab, Belfast, Northern Ireland") == "GB");
}

TEST_CASE("state abbreviations only match as uppercase tokens") {
    const auto g = repo_gazetteer();
    CHECK(g.resolve("Department of Physics in Beijing") == std::nullopt);  // lowercase 'in'
    CHECK(g.resolve("West Lafayette, IN 47907") == "US");
    CHECK(g.resolve("Instituto de Matematica") == std::nullopt);  // MA inside a word
}

TEST_CASE("gazetteer entries require valid country codes") {
    geo::Gazetteer g;
    CHECK_THROWS_AS(g.add_country("Atlantis", "XX"), SchemaError);
    CHECK_THROWS_AS(g.add_university("Nowhere University", "ZZ"), SchemaError);
}

TEST_CASE("gazetteer resolves at least 95 percent of country and state strings") {
    const auto g = repo_gazetteer();
    const auto rows = load_fixture();
    std::size_t eligible = 0, resolved = 0, correct = 0;
    for (const auto& r : rows) {
        if (r.category != "country" && r.category != "state") continue;
        ++eligible;
        const auto code = g.resolve(r.affiliation);
        if (code) {
            ++resolved;
            if (code == r.country) ++correct;
        }
    }
    REQUIRE(eligible == 160);
    CHECK(static_cast<double>(resolved) / static_cast<double>(eligible) >= 0.95);
    CHECK(correct == resolved);  // nothing resolves to the wrong country
}

TEST_CASE("resolve_corpus: fallback raises the total rate and caches") {
    const auto rows = load_fixture();
    const auto corpus = corpus_from_fixture(rows);
    const auto gazetteer = repo_gazetteer();
    auto client = geo::MockCountryClient::from_file(kRepo / "testdata/geo_mock.json");

    const auto cache_path = fs::temp_directory_path() /
                            ("lf_geo_cache_" + std::to_string(std::random_device{}()) + ".tsv");
    auto cache = geo::ResolutionCache::load(cache_path);
    const auto res = geo::resolve_corpus(corpus, gazetteer, client.get(), cache);

    CHECK(res.report.unique_strings == 200);
    CHECK(res.report.gazetteer_resolved >= 160);  // country + state + university hits
    CHECK(res.report.fallback_resolved == 10);
    CHECK(res.report.client_calls >= 1);
    const double gaz_rate = res.report.gazetteer_rate();
    CHECK(res.report.total_rate() > gaz_rate);

    // Expected labels hold wherever resolution succeeded.
    for (const auto& r : rows) {
        const auto& rr = res.by_string.at(r.affiliation);
        if (rr.country) {
            CHECK(geo::valid_country_code(*rr.country));
            CHECK(*rr.country == *r.country);
        } else {
            CHECK(r.category == "unresolvable");
        }
    }

    // Second run: fallback strings come from the cache, zero client traffic.
    auto client2 = geo::MockCountryClient::from_file(kRepo / "testdata/geo_mock.json");
    auto cache2 = geo::ResolutionCache::load(cache_path);
    const auto res2 = geo::resolve_corpus(corpus, gazetteer, client2.get(), cache2);
    CHECK(client2->calls() == 0);
    CHECK(res2.report.client_calls == 0);
    CHECK(res2.report.cache_hits >= 10);
    for (const auto& [s, rr] : res2.by_string) {
        const auto& first = res.by_string.at(s);
        CHECK(rr.country == first.country);
        if (first.method == geo::Method::fallback) CHECK(rr.cached);
    }
    fs::remove(cache_path);
}

TEST_CASE("resolve_fallback honors the mock mapping, cache and batching") {
    geo::MockCountryClient client(std::map<std::string, std::string>{{"Acad. Sin.", "TW"}});
    auto cache = geo::ResolutionCache();
    geo::GeoReport report;
    const std::vector<std::string> strings = {"Acad. Sin.", "Opaque Research Site"};
    const auto first = geo::resolve_fallback(strings, &client, cache, report);
    CHECK(first.at("Acad. Sin.").country == "TW");
    CHECK(first.at("Acad. Sin.").method == geo::Method::fallback);
    CHECK_FALSE(first.at("Acad. Sin.").cached);
    CHECK(first.at("Opaque Research Site").method == geo::Method::unresolved);
    CHECK(client.calls() == 1);

    // Both answers (including the explicit null) came back from the cache.
    geo::GeoReport report2;
    const auto second = geo::resolve_fallback(strings, &client, cache, report2);
    CHECK(client.calls() == 1);
    CHECK(second.at("Acad. Sin.").cached);
    CHECK(second.at("Acad. Sin.").country == "TW");
    CHECK(second.at("Opaque Research Site").method == geo::Method::unresolved);
    CHECK(report2.cache_hits == 2);
}

TEST_CASE("fallback is never invoked for gazetteer-resolvable strings") {
    const auto corpus = single_string_corpus("Tsinghua University, Beijing, China");
    geo::MockCountryClient client({});
    auto cache = geo::ResolutionCache();
    const auto res = geo::resolve_corpus(corpus, repo_gazetteer(), &client, cache);
    CHECK(client.calls() == 0);
    CHECK(res.by_string.begin()->second.method == geo::Method::gazetteer);
}

TEST_CASE("invalid client codes are rejected with a warning") {
    const auto corpus = single_string_corpus("Completely Unknown Institute");
    BadCodeClient client;
    auto cache = geo::ResolutionCache();
    const auto res = geo::resolve_corpus(corpus, repo_gazetteer(), &client, cache);
    CHECK(res.by_string.begin()->second.method == geo::Method::unresolved);
    REQUIRE_FALSE(res.report.warnings.empty());
    CHECK(res.report.warnings[0].find("XX") != std::string::npos);
}

TEST_CASE("an unavailable client leaves strings unresolved without failing") {
    const auto corpus = single_string_corpus("Completely Unknown Institute");
    FailingClient client;
    auto cache = geo::ResolutionCache();
    const auto res = geo::resolve_corpus(corpus, repo_gazetteer(), &client, cache);
    CHECK(res.by_string.begin()->second.method == geo::Method::unresolved);
    CHECK_FALSE(res.report.warnings.empty());
}

TEST_CASE("empty affiliations never reach the client") {
    const auto corpus = single_string_corpus("");
    geo::MockCountryClient client({});
    auto cache = geo::ResolutionCache();
    const auto res = geo::resolve_corpus(corpus, repo_gazetteer(), &client, cache);
    CHECK(res.report.unique_strings == 0);
    CHECK(res.report.total_rate() == 0.0);
    CHECK(client.calls() == 0);
    CHECK(res.assignments.empty());
}

TEST_CASE("assignments join back to every authorship sharing the string") {
    records::PublicationRecord p1, p2;
    p1.pub_id = "P1";
    p1.pub_year = 2000;
    p2.pub_id = "P2";
    p2.pub_year = 2001;
    records::Authorship a;
    a.position = 0;
    a.raw_name = "A B";
    a.affiliation_string = "Kyoto University, Japan";
    p1.authorships.push_back(a);
    a.position = 3;
    p2.authorships.push_back(a);
    const records::Corpus corpus({}, {p1, p2}, {}, {}, {}, 2);
    auto cache = geo::ResolutionCache();
    const auto res = geo::resolve_corpus(corpus, repo_gazetteer(), nullptr, cache);
    CHECK(res.assignments.at({"P1", 0}) == "JP");
    CHECK(res.assignments.at({"P2", 3}) == "JP");
}
