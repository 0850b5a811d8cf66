// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <random>
#include <set>

#include "linkforge/blocking.hpp"

using namespace linkforge;
using records::Authorship;
using records::GraduateRecord;
using records::PublicationRecord;

namespace {

GraduateRecord grad(const std::string& id, const std::string& name, int year,
                    std::optional<std::string> registry = std::nullopt) {
    GraduateRecord g;
    g.graduate_id = id;
    g.raw_name = name;
    g.grad_year = year;
    g.institution = "Test University";
    g.registry_id = std::move(registry);
    return g;
}

PublicationRecord pub(const std::string& id, int year,
                      std::vector<std::pair<std::string, std::optional<std::string>>> authors) {
    PublicationRecord p;
    p.pub_id = id;
    p.pub_year = year;
    int pos = 0;
    for (auto& [name, registry] : authors) {
        Authorship a;
        a.position = pos++;
        a.raw_name = name;
        a.display_name = name;
        a.registry_id = std::move(registry);
        p.authorships.push_back(std::move(a));
    }
    return p;
}

records::Corpus make_corpus(std::vector<GraduateRecord> grads, std::vector<PublicationRecord> pubs) {
    return records::Corpus(std::move(grads), std::move(pubs), {}, {}, {}, 2);
}

}  // namespace

TEST_CASE("candidates require name compatibility and the temporal window") {
    names::NicknameTable nicknames;
    const auto corpus = make_corpus(
        {grad("G1", "John Smith", 2000)},
        {pub("P_in", 2010, {{"John Smith", {}}}),
         pub("P_late", 2017, {{"John Smith", {}}}),   // +17 > 15
         pub("P_early", 1993, {{"John Smith", {}}}),  // -7 < -5
         pub("P_edge_hi", 2015, {{"John Smith", {}}}),
         pub("P_edge_lo", 1995, {{"John Smith", {}}}),
         pub("P_other", 2010, {{"Jane Smith", {}}})});
    const auto cands = blocking::generate_candidates(corpus, nicknames);
    std::set<std::string> ids;
    for (const auto& c : cands) ids.insert(c.pub_id);
    CHECK(ids == std::set<std::string>{"P_in", "P_edge_hi", "P_edge_lo"});
}

TEST_CASE("tightening the window only removes candidates") {
    names::NicknameTable nicknames;
    const auto corpus = make_corpus({grad("G1", "John Smith", 2000)},
                                    {pub("P1", 2010, {{"John Smith", {}}}),
                                     pub("P2", 2014, {{"John Smith", {}}}),
                                     pub("P3", 1996, {{"John Smith", {}}})});
    const auto wide = blocking::generate_candidates(corpus, nicknames, {-5, 15});
    const auto narrow = blocking::generate_candidates(corpus, nicknames, {0, 10});
    CHECK(narrow.size() <= wide.size());
    for (const auto& c : narrow) {
        CHECK(std::find(wide.begin(), wide.end(), c) != wide.end());
    }
}

TEST_CASE("labeling follows authenticated registry ids") {
    names::NicknameTable nicknames;
    const auto corpus = make_corpus(
        {grad("G1", "John Smith", 2000, "R1")},
        {pub("P_same", 2005, {{"John Smith", std::optional<std::string>{"R1"}}}),
         pub("P_diff", 2005, {{"John Smith", std::optional<std::string>{"R2"}}}),
         pub("P_none", 2005, {{"John Smith", std::nullopt}})});
    auto cands = blocking::generate_candidates(corpus, nicknames);
    blocking::label_candidates(cands, corpus);
    REQUIRE(cands.size() == 3);
    std::map<std::string, std::optional<bool>> by_pub;
    for (const auto& c : cands) by_pub[c.pub_id] = c.label;
    CHECK(by_pub["P_same"] == std::optional<bool>{true});
    CHECK(by_pub["P_diff"] == std::optional<bool>{false});
    CHECK(by_pub["P_none"] == std::nullopt);
}

TEST_CASE("match class is recorded per candidate") {
    names::NicknameTable nicknames;
    nicknames.add_group({"JOHN", "JACK"});
    // The initial form clears the 0.90 gate here (similarity 0.9256).
    const auto corpus = make_corpus({grad("G1", "John Robert Smith", 2000)},
                                    {pub("P_exact", 2005, {{"John Robert Smith", {}}}),
                                     pub("P_nick", 2005, {{"Jack Smith", {}}}),
                                     pub("P_initial", 2005, {{"J. Robert Smith", {}}})});
    const auto cands = blocking::generate_candidates(corpus, nicknames);
    std::map<std::string, names::MatchClass> cls;
    for (const auto& c : cands) cls[c.pub_id] = c.match_class;
    CHECK(cls.at("P_exact") == names::MatchClass::exact);
    CHECK(cls.at("P_nick") == names::MatchClass::nickname_based);
    CHECK(cls.at("P_initial") == names::MatchClass::initial_based);
}

TEST_CASE("blocking agrees with brute-force all-pairs evaluation") {
    // ~40 graduates x ~120 authorships over a small name pool, then compare
    // against the quadratic evaluation of the same predicate.
    names::NicknameTable nicknames;
    nicknames.add_group({"ROBERT", "BOB"});
    nicknames.add_group({"WILLIAM", "BILL"});

    const std::vector<std::string> firsts = {"Robert", "Bob", "William", "Bill", "John",
                                             "J.", "Jane", "Mary"};
    const std::vector<std::string> middles = {"", "Lee", "Ray"};
    const std::vector<std::string> lasts = {"Smith", "Zhang", "Garcia", "Lee"};

    std::mt19937_64 rng(7);
    auto pick = [&](const std::vector<std::string>& v) {
        return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
    };
    auto make_name = [&]() {
        const auto m = pick(middles);
        return pick(firsts) + (m.empty() ? " " : " " + m + " ") + pick(lasts);
    };

    std::vector<GraduateRecord> grads;
    for (int i = 0; i < 40; ++i) {
        grads.push_back(grad("G" + std::to_string(i), make_name(),
                             1995 + std::uniform_int_distribution<int>(0, 10)(rng)));
    }
    std::vector<PublicationRecord> pubs;
    for (int i = 0; i < 60; ++i) {
        std::vector<std::pair<std::string, std::optional<std::string>>> authors;
        const int n = std::uniform_int_distribution<int>(1, 2)(rng);
        for (int a = 0; a < n; ++a) authors.emplace_back(make_name(), std::nullopt);
        pubs.push_back(pub("P" + std::to_string(i),
                           1992 + std::uniform_int_distribution<int>(0, 28)(rng), std::move(authors)));
    }
    const auto corpus = make_corpus(grads, pubs);
    const auto blocked = blocking::generate_candidates(corpus, nicknames);

    // Brute force oracle: every (graduate, authorship) pair.
    std::set<std::tuple<std::string, std::string, int>> expected;
    for (const auto& g : corpus.graduates()) {
        names::NameParts gp;
        try {
            gp = names::parse_name(g.raw_name);
        } catch (const UnparseableName&) {
            continue;
        }
        for (const auto& p : corpus.publications()) {
            const int gap = p.pub_year - g.grad_year;
            if (gap < -5 || gap > 15) continue;
            for (const auto& a : p.authorships) {
                names::NameParts ap;
                try {
                    ap = names::parse_name(a.raw_name.empty() ? a.display_name : a.raw_name);
                } catch (const UnparseableName&) {
                    continue;
                }
                if (names::names_compatible(gp, ap, nicknames) != names::MatchClass::incompatible) {
                    expected.insert({g.graduate_id, p.pub_id, a.position});
                }
            }
        }
    }
    std::set<std::tuple<std::string, std::string, int>> actual;
    for (const auto& c : blocked) actual.insert({c.graduate_id, c.pub_id, c.author_position});
    CHECK(actual == expected);
    CHECK_FALSE(actual.empty());

    // Output order is deterministic and sorted.
    auto sorted = blocked;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.key() < b.key(); });
    CHECK(std::equal(blocked.begin(), blocked.end(), sorted.begin()));
}

TEST_CASE("candidate json round-trips") {
    blocking::CandidateLink c{"G1", "P1", 2, names::MatchClass::nickname_based, true};
    const auto j = blocking::candidate_to_json(c);
    CHECK(blocking::candidate_from_json(j) == c);
    blocking::CandidateLink unlabeled{"G1", "P1", 2, names::MatchClass::exact, std::nullopt};
    CHECK(blocking::candidate_from_json(blocking::candidate_to_json(unlabeled)) == unlabeled);
}
