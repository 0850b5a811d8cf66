// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "linkforge/errors.hpp"
#include "linkforge/io.hpp"
#include "linkforge/name_kit.hpp"
#include "linkforge/records.hpp"

namespace linkforge::geo {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// ISO 3166-1 alpha-2
// ---------------------------------------------------------------------------

inline const std::set<std::string>& iso_alpha2() {
    static const std::set<std::string> kCodes = {
        "AD", "AE", "AF", "AG", "AI", "AL", "AM", "AO", "AQ", "AR", "AS", "AT", "AU", "AW", "AX",
        "AZ", "BA", "BB", "BD", "BE", "BF", "BG", "BH", "BI", "BJ", "BL", "BM", "BN", "BO", "BQ",
        "BR", "BS", "BT", "BV", "BW", "BY", "BZ", "CA", "CC", "CD", "CF", "CG", "CH", "CI", "CK",
        "CL", "CM", "CN", "CO", "CR", "CU", "CV", "CW", "CX", "CY", "CZ", "DE", "DJ", "DK", "DM",
        "DO", "DZ", "EC", "EE", "EG", "EH", "ER", "ES", "ET", "FI", "FJ", "FK", "FM", "FO", "FR",
        "GA", "GB", "GD", "GE", "GF", "GG", "GH", "GI", "GL", "GM", "GN", "GP", "GQ", "GR", "GS",
        "GT", "GU", "GW", "GY", "HK", "HM", "HN", "HR", "HT", "HU", "ID", "IE", "IL", "IM", "IN",
        "IO", "IQ", "IR", "IS", "IT", "JE", "JM", "JO", "JP", "KE", "KG", "KH", "KI", "KM", "KN",
        "KP", "KR", "KW", "KY", "KZ", "LA", "LB", "LC", "LI", "LK", "LR", "LS", "LT", "LU", "LV",
        "LY", "MA", "MC", "MD", "ME", "MF", "MG", "MH", "MK", "ML", "MM", "MN", "MO", "MP", "MQ",
        "MR", "MS", "MT", "MU", "MV", "MW", "MX", "MY", "MZ", "NA", "NC", "NE", "NF", "NG", "NI",
        "NL", "NO", "NP", "NR", "NU", "NZ", "OM", "PA", "PE", "PF", "PG", "PH", "PK", "PL", "PM",
        "PN", "PR", "PS", "PT", "PW", "PY", "QA", "RE", "RO", "RS", "RU", "RW", "SA", "SB", "SC",
        "SD", "SE", "SG", "SH", "SI", "SJ", "SK", "SL", "SM", "SN", "SO", "SR", "SS", "ST", "SV",
        "SX", "SY", "SZ", "TC", "TD", "TF", "TG", "TH", "TJ", "TK", "TL", "TM", "TN", "TO", "TR",
        "TT", "TV", "TW", "TZ", "UA", "UG", "UM", "US", "UY", "UZ", "VA", "VC", "VE", "VG", "VI",
        "VN", "VU", "WF", "WS", "YE", "YT", "ZA", "ZM", "ZW"};
    return kCodes;
}

inline bool valid_country_code(std::string_view code) {
    return code.size() == 2 && iso_alpha2().count(std::string(code)) > 0;
}

// ---------------------------------------------------------------------------
// Gazetteer
// ---------------------------------------------------------------------------

/// Regex-free pattern table. Country and university names are matched on the
/// folded affiliation with word boundaries; two-letter US state abbreviations
/// are matched only as uppercase tokens of the raw string, which keeps "in",
/// "De Jong" and friends from reading as states.
class Gazetteer {
public:
    /// countries.txt / universities.txt: "CC|NAME" per line.
    /// us_states.txt: "FULL NAME|ABBR" per line.
    static Gazetteer from_files(const std::filesystem::path& dir) {
        Gazetteer g;
        io::for_each_line(dir / "countries.txt", [&](std::size_t, const std::string& line) {
            if (line[0] == '#') return;
            const auto bar = line.find('|');
            if (bar == std::string::npos) throw SchemaError("countries.txt line needs CC|NAME: " + line);
            g.add_country(line.substr(bar + 1), line.substr(0, bar));
        });
        io::for_each_line(dir / "us_states.txt", [&](std::size_t, const std::string& line) {
            if (line[0] == '#') return;
            const auto bar = line.find('|');
            g.add_state(bar == std::string::npos ? line : line.substr(0, bar),
                        bar == std::string::npos ? "" : line.substr(bar + 1));
        });
        io::for_each_line(dir / "universities.txt", [&](std::size_t, const std::string& line) {
            if (line[0] == '#') return;
            const auto bar = line.find('|');
            if (bar == std::string::npos) throw SchemaError("universities.txt line needs CC|NAME: " + line);
            g.add_university(line.substr(bar + 1), line.substr(0, bar));
        });
        return g;
    }

    void add_country(const std::string& name, const std::string& code) {
        add_pattern(countries_, name, code);
    }
    void add_state(const std::string& full_name, const std::string& abbr) {
        add_pattern(states_, full_name, "US");
        if (abbr.size() == 2) state_abbrs_.insert(abbr);
    }
    void add_university(const std::string& name, const std::string& code) {
        add_pattern(universities_, name, code);
    }

    std::size_t size() const { return countries_.size() + states_.size() + universities_.size(); }

    /// Precedence: explicit country mention (rightmost end wins, then the
    /// longer pattern), then US state, then university.
    std::optional<std::string> resolve(std::string_view affiliation) const {
        const std::string folded = names::fold_text(affiliation);
        if (auto hit = best_match(countries_, folded)) return hit;
        if (auto hit = best_match(states_, folded)) return hit;
        if (has_state_abbreviation(affiliation)) return "US";
        if (auto hit = best_match(universities_, folded)) return hit;
        return std::nullopt;
    }

private:
    struct Pattern {
        std::string folded;  // " NAME " with boundary pads
        std::string code;
    };

    static void add_pattern(std::vector<Pattern>& table, const std::string& name,
                            const std::string& code) {
        std::string upper = code;
        for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (!valid_country_code(upper)) {
            throw SchemaError("gazetteer entry '" + name + "' maps to invalid country code '" + code + "'");
        }
        const std::string folded = names::fold_text(name);
        if (folded.size() <= 2) throw SchemaError("gazetteer pattern is empty: " + name);
        table.push_back({folded, upper});
    }

    static std::optional<std::string> best_match(const std::vector<Pattern>& table,
                                                 const std::string& folded) {
        // Patterns are padded with spaces, the haystack too, so find() already
        // enforces word boundaries. Interior occurrences need the one-char
        // overlap of the pads handled: search on the unpadded pattern body
        // flanked by spaces, which is exactly the stored string.
        std::ptrdiff_t best_end = -1;
        std::size_t best_len = 0;
        const std::string* best_code = nullptr;
        for (const auto& p : table) {
            std::size_t from = 0;
            while (true) {
                const auto at = folded.find(p.folded, from);
                if (at == std::string::npos) break;
                const auto end = static_cast<std::ptrdiff_t>(at + p.folded.size());
                if (end > best_end || (end == best_end && p.folded.size() > best_len)) {
                    best_end = end;
                    best_len = p.folded.size();
                    best_code = &p.code;
                }
                from = at + 1;
            }
        }
        if (!best_code) return std::nullopt;
        return *best_code;
    }

    bool has_state_abbreviation(std::string_view raw) const {
        for (std::size_t i = 0; i + 1 < raw.size(); ++i) {
            const unsigned char a = static_cast<unsigned char>(raw[i]);
            const unsigned char b = static_cast<unsigned char>(raw[i + 1]);
            if (a < 'A' || a > 'Z' || b < 'A' || b > 'Z') continue;
            const bool left_ok = i == 0 || !std::isalpha(static_cast<unsigned char>(raw[i - 1]));
            const bool right_ok = i + 2 >= raw.size() || !std::isalpha(static_cast<unsigned char>(raw[i + 2]));
            if (left_ok && right_ok && state_abbrs_.count(std::string(raw.substr(i, 2)))) return true;
        }
        return false;
    }

    std::vector<Pattern> countries_;
    std::vector<Pattern> states_;
    std::vector<Pattern> universities_;
    std::set<std::string> state_abbrs_;
};

inline std::optional<std::string> resolve_gazetteer(std::string_view affiliation, const Gazetteer& g) {
    return g.resolve(affiliation);
}

// ---------------------------------------------------------------------------
// Fallback classifier client
// ---------------------------------------------------------------------------

struct ClientRequest {
    std::uint64_t string_id = 0;
    std::string text;
};

struct ClientResponse {
    std::uint64_t string_id = 0;
    std::optional<std::string> country_code;  // null = classifier says unknown
};

class CountryClient {
public:
    virtual ~CountryClient() = default;
    virtual std::string name() const = 0;
    /// May throw ClientUnavailable or MalformedResponse.
    virtual std::vector<ClientResponse> resolve(const std::vector<ClientRequest>& batch) = 0;
};

/// Deterministic file-backed mock: a JSON object mapping affiliation strings
/// to country codes. Strings absent from the map come back null.
class MockCountryClient : public CountryClient {
public:
    explicit MockCountryClient(std::map<std::string, std::string> mapping)
        : mapping_(std::move(mapping)) {}

    static std::unique_ptr<MockCountryClient> from_file(const std::filesystem::path& path) {
        json j = json::parse(io::read_file(path));
        std::map<std::string, std::string> m;
        for (auto it = j.begin(); it != j.end(); ++it) m[it.key()] = it.value().get<std::string>();
        return std::make_unique<MockCountryClient>(std::move(m));
    }

    std::string name() const override { return "mock"; }

    std::vector<ClientResponse> resolve(const std::vector<ClientRequest>& batch) override {
        ++calls_;
        std::vector<ClientResponse> out;
        out.reserve(batch.size());
        for (const auto& r : batch) {
            auto it = mapping_.find(r.text);
            if (it == mapping_.end()) {
                out.push_back({r.string_id, std::nullopt});
            } else {
                out.push_back({r.string_id, it->second});
            }
        }
        return out;
    }

    std::size_t calls() const { return calls_; }

private:
    std::map<std::string, std::string> mapping_;
    std::size_t calls_ = 0;
};

/// HTTP JSON client. Request: {"strings": [{"id": n, "text": s}, ...]}.
/// Response: {"results": [{"id": n, "country_code": "CC"|null}, ...]}.
/// Endpoint and key come from the environment so no secret lands in configs.
class HttpCountryClient : public CountryClient {
public:
    HttpCountryClient(std::string url, std::string api_key)
        : url_(std::move(url)), api_key_(std::move(api_key)) {}

    static std::unique_ptr<HttpCountryClient> from_environment();

    std::string name() const override { return "http"; }
    std::vector<ClientResponse> resolve(const std::vector<ClientRequest>& batch) override;

private:
    std::string url_;
    std::string api_key_;
};

// ---------------------------------------------------------------------------
// Resolution cache: append-only, keyed by the fold hash of the string.
// Line format: <hex64 hash>\t<CC or ->
// ---------------------------------------------------------------------------

class ResolutionCache {
public:
    ResolutionCache() = default;

    static std::string key_for(std::string_view affiliation) {
        return io::hex64(io::fnv1a(names::fold_text(affiliation)));
    }

    static ResolutionCache load(const std::filesystem::path& path) {
        ResolutionCache c;
        c.path_ = path;
        if (std::filesystem::exists(path)) {
            io::for_each_line(path, [&](std::size_t, const std::string& line) {
                const auto tab = line.find('\t');
                if (tab == std::string::npos) return;  // tolerate torn tail lines
                const std::string key = line.substr(0, tab);
                const std::string val = line.substr(tab + 1);
                if (val == "-") {
                    c.entries_[key] = std::nullopt;
                } else if (valid_country_code(val)) {
                    c.entries_[key] = val;
                }
            });
        }
        return c;
    }

    bool contains(const std::string& key) const { return entries_.count(key) > 0; }

    std::optional<std::string> get(const std::string& key) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? std::nullopt : it->second;
    }

    void put(const std::string& key, std::optional<std::string> code) {
        entries_[key] = code;
        pending_.emplace_back(key, std::move(code));
    }

    /// Appends pending entries to the backing file.
    void flush() {
        if (pending_.empty() || path_.empty()) return;
        const auto parent = path_.parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
        std::ofstream out(path_, std::ios::app);
        if (!out) throw Error("cannot open cache for append: " + path_.string());
        for (const auto& [key, code] : pending_) {
            out << key << '\t' << (code ? *code : std::string("-")) << '\n';
        }
        out.flush();
        pending_.clear();
    }

    std::size_t size() const { return entries_.size(); }

private:
    std::filesystem::path path_;
    std::map<std::string, std::optional<std::string>> entries_;
    std::vector<std::pair<std::string, std::optional<std::string>>> pending_;
};

// ---------------------------------------------------------------------------
// Corpus-level resolution
// ---------------------------------------------------------------------------

enum class Method { gazetteer, fallback, unresolved };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::gazetteer: return "gazetteer";
        case Method::fallback: return "fallback";
        case Method::unresolved: return "unresolved";
    }
    return "unresolved";
}

struct ResolutionResult {
    std::string affiliation_string;
    std::optional<std::string> country;
    Method method = Method::unresolved;
    bool cached = false;
};

struct GeoReport {
    std::size_t unique_strings = 0;
    std::size_t gazetteer_resolved = 0;
    std::size_t fallback_resolved = 0;
    std::size_t cache_hits = 0;
    std::size_t client_calls = 0;
    std::size_t unresolved = 0;
    std::vector<std::string> warnings;

    double gazetteer_rate() const {
        return unique_strings == 0 ? 0.0 : static_cast<double>(gazetteer_resolved) / static_cast<double>(unique_strings);
    }
    double fallback_rate() const {
        return unique_strings == 0 ? 0.0 : static_cast<double>(fallback_resolved) / static_cast<double>(unique_strings);
    }
    double total_rate() const { return gazetteer_rate() + fallback_rate(); }

    json to_json() const {
        return json{{"unique_strings", unique_strings},
                    {"gazetteer_resolved", gazetteer_resolved},
                    {"fallback_resolved", fallback_resolved},
                    {"cache_hits", cache_hits},
                    {"client_calls", client_calls},
                    {"unresolved", unresolved},
                    {"gazetteer_rate", gazetteer_rate()},
                    {"fallback_rate", fallback_rate()},
                    {"total_rate", total_rate()},
                    {"warnings", warnings}};
    }
};

/// Resolves a batch of gazetteer-unresolved strings through the cache and
/// the fallback classifier. Invalid codes are rejected with a warning, an
/// unavailable client leaves the remaining strings unresolved, and every
/// fresh client answer is appended to the cache.
inline std::map<std::string, ResolutionResult> resolve_fallback(
    const std::vector<std::string>& strings, CountryClient* client, ResolutionCache& cache,
    GeoReport& report, std::size_t batch_size = 64) {
    std::map<std::string, ResolutionResult> out;

    std::vector<const std::string*> need_client;
    for (const auto& s : strings) {
        const auto key = ResolutionCache::key_for(s);
        if (cache.contains(key)) {
            const auto code = cache.get(key);
            out[s] = {s, code, code ? Method::fallback : Method::unresolved, true};
            ++report.cache_hits;
            if (code) {
                ++report.fallback_resolved;
            } else {
                ++report.unresolved;
            }
            continue;
        }
        need_client.push_back(&s);
    }

    std::size_t next = 0;
    bool client_down = (client == nullptr);
    if (client_down && !need_client.empty()) {
        report.warnings.push_back("no fallback client configured; " +
                                  std::to_string(need_client.size()) + " strings left unresolved");
    }
    while (!client_down && next < need_client.size()) {
        std::vector<ClientRequest> batch;
        std::vector<const std::string*> batch_strings;
        for (; next < need_client.size() && batch.size() < batch_size; ++next) {
            batch.push_back({static_cast<std::uint64_t>(batch.size()), *need_client[next]});
            batch_strings.push_back(need_client[next]);
        }
        try {
            ++report.client_calls;
            const auto responses = client->resolve(batch);
            std::map<std::uint64_t, std::optional<std::string>> by_id;
            for (const auto& r : responses) by_id[r.string_id] = r.country_code;
            for (std::size_t i = 0; i < batch_strings.size(); ++i) {
                const std::string& s = *batch_strings[i];
                auto it = by_id.find(i);
                std::optional<std::string> code = it == by_id.end() ? std::nullopt : it->second;
                if (code && !valid_country_code(*code)) {
                    report.warnings.push_back("client returned invalid country code '" + *code +
                                              "' for: " + s);
                    code.reset();
                }
                out[s] = {s, code, code ? Method::fallback : Method::unresolved, false};
                cache.put(ResolutionCache::key_for(s), code);
                if (code) {
                    ++report.fallback_resolved;
                } else {
                    ++report.unresolved;
                }
            }
        } catch (const ClientUnavailable& e) {
            report.warnings.push_back(std::string("fallback client unavailable: ") + e.what());
            client_down = true;
            for (std::size_t i = 0; i < batch_strings.size(); ++i) {
                out[*batch_strings[i]] = {*batch_strings[i], std::nullopt, Method::unresolved, false};
                ++report.unresolved;
            }
        } catch (const MalformedResponse& e) {
            report.warnings.push_back(std::string("malformed client response: ") + e.what());
            for (std::size_t i = 0; i < batch_strings.size(); ++i) {
                out[*batch_strings[i]] = {*batch_strings[i], std::nullopt, Method::unresolved, false};
                ++report.unresolved;
            }
        }
    }
    // Client went down mid-run: remaining strings stay unresolved.
    for (; next < need_client.size(); ++next) {
        out[*need_client[next]] = {*need_client[next], std::nullopt, Method::unresolved, false};
        ++report.unresolved;
    }
    cache.flush();
    return out;
}

struct CorpusResolution {
    std::map<std::string, ResolutionResult> by_string;
    // (pub_id, author position) -> country code
    std::map<std::pair<std::string, int>, std::string> assignments;
    GeoReport report;
};

/// Resolves the unique affiliation strings of a corpus and joins the results
/// back onto every authorship. The fallback client only ever sees strings the
/// gazetteer could not place and the cache does not know.
inline CorpusResolution resolve_corpus(const records::Corpus& corpus, const Gazetteer& gazetteer,
                                       CountryClient* client, ResolutionCache& cache,
                                       std::size_t batch_size = 64) {
    CorpusResolution out;
    std::set<std::string> unique;
    for (const auto& p : corpus.publications()) {
        for (const auto& a : p.authorships) {
            if (!a.affiliation_string.empty()) unique.insert(a.affiliation_string);
        }
    }
    out.report.unique_strings = unique.size();

    std::vector<std::string> need_fallback;
    for (const auto& s : unique) {
        if (auto code = gazetteer.resolve(s)) {
            out.by_string[s] = {s, code, Method::gazetteer, false};
            ++out.report.gazetteer_resolved;
            continue;
        }
        need_fallback.push_back(s);
    }

    auto fallback = resolve_fallback(need_fallback, client, cache, out.report, batch_size);
    for (auto& [s, r] : fallback) out.by_string[s] = std::move(r);

    for (const auto& p : corpus.publications()) {
        for (const auto& a : p.authorships) {
            if (a.affiliation_string.empty()) continue;
            const auto& res = out.by_string[a.affiliation_string];
            if (res.country) out.assignments[{p.pub_id, a.position}] = *res.country;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// HTTP client implementation (kept out of line so only the translation units
// that want HTTP pay for including httplib).
// ---------------------------------------------------------------------------

}  // namespace linkforge::geo

#ifdef LINKFORGE_ENABLE_HTTP_GEO
#include <httplib.h>

namespace linkforge::geo {

inline std::unique_ptr<HttpCountryClient> HttpCountryClient::from_environment() {
    const char* url = std::getenv("LINKFORGE_GEO_URL");
    if (!url || !*url) return nullptr;
    const char* key = std::getenv("LINKFORGE_GEO_API_KEY");
    return std::make_unique<HttpCountryClient>(url, key ? key : "");
}

inline std::vector<ClientResponse> HttpCountryClient::resolve(const std::vector<ClientRequest>& batch) {
    json req;
    req["strings"] = json::array();
    for (const auto& r : batch) {
        req["strings"].push_back({{"id", r.string_id}, {"text", r.text}});
    }

    // Split URL into host part and path.
    std::string url = url_;
    std::string path = "/";
    auto scheme_end = url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto slash = url.find('/', host_start);
    if (slash != std::string::npos) {
        path = url.substr(slash);
        url = url.substr(0, slash);
    }

    httplib::Client cli(url);
    cli.set_connection_timeout(10);
    cli.set_read_timeout(60);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = cli.Post(path, headers, req.dump(), "application/json");
    if (!res || res->status < 200 || res->status >= 300) {
        throw ClientUnavailable("geo endpoint " + url_ + " unreachable or returned status " +
                                (res ? std::to_string(res->status) : std::string("none")));
    }
    json body;
    try {
        body = json::parse(res->body);
    } catch (const json::exception& e) {
        throw MalformedResponse(std::string("response is not JSON: ") + e.what());
    }
    if (!body.contains("results") || !body["results"].is_array()) {
        throw MalformedResponse("response lacks a results array");
    }
    std::vector<ClientResponse> out;
    for (const auto& r : body["results"]) {
        if (!r.contains("id") || !r["id"].is_number_unsigned()) {
            throw MalformedResponse("result entry lacks a numeric id");
        }
        ClientResponse cr;
        cr.string_id = r["id"].get<std::uint64_t>();
        if (r.contains("country_code") && r["country_code"].is_string()) {
            cr.country_code = r["country_code"].get<std::string>();
        }
        out.push_back(std::move(cr));
    }
    return out;
}

}  // namespace linkforge::geo
#endif  // LINKFORGE_ENABLE_HTTP_GEO
