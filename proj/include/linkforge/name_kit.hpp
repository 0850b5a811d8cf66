// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "linkforge/errors.hpp"
#include "linkforge/io.hpp"
#include "linkforge/records.hpp"

namespace linkforge::names {

// ---------------------------------------------------------------------------
// Normalization: uppercase ASCII, diacritics folded, punctuation resolved.
// ---------------------------------------------------------------------------

namespace detail {

/// Folds one Unicode codepoint to uppercase ASCII letters. Returns an empty
/// view for anything that is not a letter we know how to fold.
inline std::string_view fold_codepoint(char32_t cp) {
    if (cp >= U'a' && cp <= U'z') cp = cp - U'a' + U'A';
    if (cp >= U'A' && cp <= U'Z') {
        static const char* kAscii = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
        return {kAscii + (cp - U'A'), 1};
    }
    switch (cp) {
        case 0x00C6: case 0x00E6: return "AE";
        case 0x00DF: return "SS";
        case 0x00D0: case 0x00F0: case 0x0110: case 0x0111: return "D";
        case 0x00DE: case 0x00FE: return "TH";
        case 0x0152: case 0x0153: return "OE";
        case 0x0132: case 0x0133: return "IJ";
        default: break;
    }
    struct Range { char32_t lo, hi; const char* out; };
    static const Range kRanges[] = {
        {0x00C0, 0x00C5, "A"}, {0x00E0, 0x00E5, "A"}, {0x0100, 0x0105, "A"},
        {0x00C7, 0x00C7, "C"}, {0x00E7, 0x00E7, "C"}, {0x0106, 0x010D, "C"},
        {0x010E, 0x010F, "D"},
        {0x00C8, 0x00CB, "E"}, {0x00E8, 0x00EB, "E"}, {0x0112, 0x011B, "E"},
        {0x011C, 0x0123, "G"},
        {0x0124, 0x0127, "H"},
        {0x00CC, 0x00CF, "I"}, {0x00EC, 0x00EF, "I"}, {0x0128, 0x0131, "I"},
        {0x0134, 0x0135, "J"},
        {0x0136, 0x0138, "K"},
        {0x0139, 0x0142, "L"},
        {0x00D1, 0x00D1, "N"}, {0x00F1, 0x00F1, "N"}, {0x0143, 0x014B, "N"},
        {0x00D2, 0x00D6, "O"}, {0x00F2, 0x00F6, "O"}, {0x00D8, 0x00D8, "O"},
        {0x00F8, 0x00F8, "O"}, {0x014C, 0x0151, "O"},
        {0x0154, 0x0159, "R"},
        {0x015A, 0x0161, "S"},
        {0x0162, 0x0167, "T"},
        {0x00D9, 0x00DC, "U"}, {0x00F9, 0x00FC, "U"}, {0x0168, 0x0173, "U"},
        {0x0174, 0x0175, "W"},
        {0x00DD, 0x00DD, "Y"}, {0x00FD, 0x00FD, "Y"}, {0x00FF, 0x00FF, "Y"},
        {0x0176, 0x0178, "Y"},
        {0x0179, 0x017E, "Z"},
    };
    for (const auto& r : kRanges) {
        if (cp >= r.lo && cp <= r.hi) return r.out;
    }
    return {};
}

/// Decodes the next UTF-8 codepoint; malformed bytes decode as U+FFFD.
inline char32_t next_codepoint(std::string_view s, std::size_t& i) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) { ++i; return c; }
    int extra = 0;
    char32_t cp = 0;
    if ((c >> 5) == 0x6) { extra = 1; cp = c & 0x1f; }
    else if ((c >> 4) == 0xe) { extra = 2; cp = c & 0x0f; }
    else if ((c >> 3) == 0x1e) { extra = 3; cp = c & 0x07; }
    else { ++i; return 0xFFFD; }
    if (i + static_cast<std::size_t>(extra) >= s.size()) { i = s.size(); return 0xFFFD; }
    for (int k = 1; k <= extra; ++k) {
        const unsigned char cc = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((cc >> 6) != 0x2) { ++i; return 0xFFFD; }
        cp = (cp << 6) | (cc & 0x3f);
    }
    i += 1 + static_cast<std::size_t>(extra);
    return cp;
}

}  // namespace detail

/// Uppercases, folds diacritics to ASCII, removes joining punctuation
/// (apostrophes, hyphens) and drops everything else that is not a letter.
/// "O'Neil-García" becomes "ONEILGARCIA".
inline std::string normalize_word(std::string_view word) {
    std::string out;
    out.reserve(word.size());
    std::size_t i = 0;
    while (i < word.size()) {
        const char32_t cp = detail::next_codepoint(word, i);
        const auto folded = detail::fold_codepoint(cp);
        out.append(folded);
    }
    return out;
}

/// Case/diacritic/punctuation-insensitive fold for free text (affiliations,
/// institutions). Letters and digits survive, runs of anything else collapse
/// to single spaces, and the result is padded with one space on each side so
/// word-boundary containment is a plain substring search.
inline std::string fold_text(std::string_view s) {
    std::string out;
    out.reserve(s.size() + 2);
    out.push_back(' ');
    bool pending_space = false;
    std::size_t i = 0;
    while (i < s.size()) {
        const char32_t cp = detail::next_codepoint(s, i);
        const std::string_view folded = detail::fold_codepoint(cp);
        if (folded.empty() && cp >= U'0' && cp <= U'9') {
            if (pending_space && out.back() != ' ') out.push_back(' ');
            out.push_back(static_cast<char>(cp));
            pending_space = false;
            continue;
        }
        if (folded.empty()) {
            pending_space = true;
            continue;
        }
        if (pending_space && out.back() != ' ') out.push_back(' ');
        out.append(folded);
        pending_space = false;
    }
    out.push_back(' ');
    return out;
}

struct NameParts {
    std::string first;
    std::string middle;  // may be empty; multiple middles joined by one space
    std::string last;
    std::string suffix;

    /// "FIRST MIDDLE LAST", skipping empty components. Suffix excluded.
    std::string full() const {
        std::string out = first;
        if (!middle.empty()) {
            if (!out.empty()) out += ' ';
            out += middle;
        }
        if (!last.empty()) {
            if (!out.empty()) out += ' ';
            out += last;
        }
        return out;
    }

    bool operator==(const NameParts&) const = default;
};

namespace detail {

inline bool is_particle(const std::string& w) {
    static const std::unordered_set<std::string> kParticles = {
        "VAN", "DER", "DEN", "DE", "LA", "DEL", "DELLA", "DI", "VON", "BIN",
        "IBN", "AL", "EL", "LE", "DA", "DOS", "DU", "TER", "TEN", "ST", "MC", "MAC"};
    return kParticles.count(w) > 0;
}

inline bool is_suffix(const std::string& w) {
    static const std::unordered_set<std::string> kSuffixes = {"JR", "SR", "II", "III", "IV",
                                                              "PHD", "MD", "ESQ"};
    return kSuffixes.count(w) > 0;
}

inline bool is_title(const std::string& w) {
    static const std::unordered_set<std::string> kTitles = {"DR", "PROF", "MR", "MRS", "MS"};
    return kTitles.count(w) > 0;
}

/// Splits a raw name into comma-separated segments of normalized words.
/// Periods and most punctuation act as separators; apostrophes and hyphens
/// join (they vanish inside a word).
inline std::vector<std::vector<std::string>> segment_words(std::string_view raw) {
    std::vector<std::vector<std::string>> segments(1);
    std::string current;
    auto flush_word = [&]() {
        if (!current.empty()) {
            segments.back().push_back(current);
            current.clear();
        }
    };
    std::size_t i = 0;
    while (i < raw.size()) {
        const std::size_t start = i;
        const char32_t cp = detail::next_codepoint(raw, i);
        if (cp == U',') {
            flush_word();
            segments.emplace_back();
            continue;
        }
        if (cp == U'\'' || cp == 0x2019 || cp == U'-' || cp == 0x2010 || cp == 0x2013) {
            continue;  // joiner: O'NEIL-GARCIA -> ONEILGARCIA
        }
        const auto folded = detail::fold_codepoint(cp);
        if (folded.empty()) {
            flush_word();  // separator (space, period, digits, anything else)
            continue;
        }
        (void)start;
        current.append(folded);
    }
    flush_word();
    return segments;
}

}  // namespace detail

/// Parses "Last, First Middle" and "First Middle Last" forms into normalized
/// components. Compound last names collapse to a single token (VAN DER BERG
/// -> VANDERBERG) so that last-name equality is robust to spacing.
inline NameParts parse_name(const std::string& raw) {
    auto segments = detail::segment_words(raw);
    // Drop empty segments but remember whether an explicit comma split the
    // surname from the given names.
    std::vector<std::vector<std::string>> nonempty;
    for (auto& seg : segments) {
        if (!seg.empty()) nonempty.push_back(std::move(seg));
    }
    if (nonempty.empty()) throw UnparseableName("no alphabetic content in name: " + raw);

    NameParts parts;
    std::vector<std::string> given;

    auto strip_suffixes = [&](std::vector<std::string>& words) {
        while (!words.empty() && detail::is_suffix(words.back())) {
            if (parts.suffix.empty()) parts.suffix = words.back();
            words.pop_back();
        }
    };
    auto strip_titles = [&](std::vector<std::string>& words) {
        while (!words.empty() && detail::is_title(words.front())) {
            words.erase(words.begin());
        }
    };

    if (nonempty.size() >= 2) {
        // "Last, First Middle [, Suffix]"
        auto& last_words = nonempty[0];
        strip_suffixes(last_words);
        given = nonempty[1];
        for (std::size_t s = 2; s < nonempty.size(); ++s) {
            for (auto& w : nonempty[s]) {
                if (detail::is_suffix(w)) {
                    if (parts.suffix.empty()) parts.suffix = w;
                } else {
                    given.push_back(w);
                }
            }
        }
        strip_titles(given);
        strip_suffixes(given);
        for (const auto& w : last_words) parts.last += w;
    } else {
        auto words = std::move(nonempty[0]);
        strip_titles(words);
        strip_suffixes(words);
        if (words.empty()) throw UnparseableName("only titles/suffixes in name: " + raw);
        if (words.size() == 1) {
            parts.last = words[0];
            return parts;
        }
        // Attach a trailing run of particles to the last name.
        std::size_t last_start = words.size() - 1;
        while (last_start > 1 && detail::is_particle(words[last_start - 1])) --last_start;
        for (std::size_t i = last_start; i < words.size(); ++i) parts.last += words[i];
        given.assign(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(last_start));
    }

    if (!given.empty()) {
        parts.first = given[0];
        for (std::size_t i = 1; i < given.size(); ++i) {
            if (!parts.middle.empty()) parts.middle += ' ';
            parts.middle += given[i];
        }
    }
    if (parts.last.empty()) {
        // "John," style input: treat the sole given name as the last name.
        if (parts.first.empty()) throw UnparseableName("no usable name components: " + raw);
        parts.last = parts.first;
        parts.first.clear();
    }
    return parts;
}

// ---------------------------------------------------------------------------
// Jaro-Winkler similarity
// ---------------------------------------------------------------------------

/// Standard Jaro-Winkler similarity in [0,1]. Prefix scale 0.1 over at most 4
/// characters, applied when the Jaro score exceeds the usual 0.7 boost
/// threshold. Empty input scores 0 even against another empty string.
inline double jaro_winkler(std::string_view a, std::string_view b) {
    if (a.empty() || b.empty()) return 0.0;
    if (a == b) return 1.0;
    const std::size_t la = a.size(), lb = b.size();
    const std::size_t window = std::max(la, lb) / 2 == 0 ? 0 : std::max(la, lb) / 2 - 1;

    std::vector<bool> ma(la, false), mb(lb, false);
    std::size_t matches = 0;
    for (std::size_t i = 0; i < la; ++i) {
        const std::size_t lo = i > window ? i - window : 0;
        const std::size_t hi = std::min(lb - 1, i + window);
        for (std::size_t j = lo; j <= hi; ++j) {
            if (!mb[j] && a[i] == b[j]) {
                ma[i] = true;
                mb[j] = true;
                ++matches;
                break;
            }
        }
    }
    if (matches == 0) return 0.0;

    std::size_t transpositions = 0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < la; ++i) {
        if (!ma[i]) continue;
        while (!mb[k]) ++k;
        if (a[i] != b[k]) ++transpositions;
        ++k;
    }
    transpositions /= 2;

    const double m = static_cast<double>(matches);
    double sim = (m / static_cast<double>(la) + m / static_cast<double>(lb) +
                  (m - static_cast<double>(transpositions)) / m) /
                 3.0;

    if (sim > 0.7) {
        std::size_t prefix = 0;
        const std::size_t max_prefix = std::min<std::size_t>({4, la, lb});
        while (prefix < max_prefix && a[prefix] == b[prefix]) ++prefix;
        sim += static_cast<double>(prefix) * 0.1 * (1.0 - sim);
    }
    return std::min(sim, 1.0);
}

// ---------------------------------------------------------------------------
// Nickname equivalence
// ---------------------------------------------------------------------------

/// Symmetric nickname equivalence. Every name is trivially equivalent to
/// itself; groups loaded from a data file are closed within each line.
class NicknameTable {
public:
    NicknameTable() = default;

    void add_group(const std::vector<std::string>& group) {
        std::vector<std::string> normed;
        normed.reserve(group.size());
        for (const auto& g : group) {
            auto n = normalize_word(g);
            if (!n.empty()) normed.push_back(std::move(n));
        }
        for (const auto& a : normed) {
            for (const auto& b : normed) {
                table_[a].insert(b);
            }
        }
    }

    /// One equivalence group per line, comma-separated.
    static NicknameTable from_file(const std::filesystem::path& path) {
        NicknameTable t;
        io::for_each_line(path, [&](std::size_t, const std::string& line) {
            if (line[0] == '#') return;
            std::vector<std::string> group;
            std::size_t start = 0;
            while (start <= line.size()) {
                const auto comma = line.find(',', start);
                const auto end = comma == std::string::npos ? line.size() : comma;
                group.push_back(line.substr(start, end - start));
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
            t.add_group(group);
        });
        return t;
    }

    bool equivalent(std::string_view a, std::string_view b) const {
        if (a == b) return !a.empty();
        auto it = table_.find(std::string(a));
        return it != table_.end() && it->second.count(std::string(b)) > 0;
    }

    std::size_t size() const { return table_.size(); }

private:
    std::unordered_map<std::string, std::unordered_set<std::string>> table_;
};

// ---------------------------------------------------------------------------
// Corpus name frequencies
// ---------------------------------------------------------------------------

class NameFrequencies {
public:
    void add(const NameParts& p) {
        if (!p.first.empty()) ++first_[p.first];
        if (!p.last.empty()) ++last_[p.last];
        ++full_[p.full()];
        ++total_;
    }

    std::size_t first_count(const std::string& name) const { return get(first_, name); }
    std::size_t last_count(const std::string& name) const { return get(last_, name); }
    std::size_t full_count(const std::string& name) const { return get(full_, name); }
    std::size_t total() const { return total_; }

    double log_first(const std::string& name) const { return std::log1p(static_cast<double>(first_count(name))); }
    double log_last(const std::string& name) const { return std::log1p(static_cast<double>(last_count(name))); }
    double log_full(const std::string& name) const { return std::log1p(static_cast<double>(full_count(name))); }

private:
    static std::size_t get(const std::unordered_map<std::string, std::size_t>& m,
                           const std::string& k) {
        auto it = m.find(k);
        return it == m.end() ? 0 : it->second;
    }
    std::unordered_map<std::string, std::size_t> first_, last_, full_;
    std::size_t total_ = 0;
};

inline NameFrequencies build_frequencies(const std::vector<NameParts>& parsed) {
    NameFrequencies f;
    for (const auto& p : parsed) f.add(p);
    return f;
}

/// Frequencies over the graduate corpus only. Unparseable names are skipped.
inline NameFrequencies build_frequencies(const records::Corpus& corpus) {
    NameFrequencies f;
    for (const auto& g : corpus.graduates()) {
        try {
            f.add(parse_name(g.raw_name));
        } catch (const UnparseableName&) {
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Compatibility classes
// ---------------------------------------------------------------------------

enum class MatchClass { exact, initial_based, nickname_based, incompatible };

inline const char* to_string(MatchClass c) {
    switch (c) {
        case MatchClass::exact: return "exact";
        case MatchClass::initial_based: return "initial_based";
        case MatchClass::nickname_based: return "nickname_based";
        case MatchClass::incompatible: return "incompatible";
    }
    return "incompatible";
}

inline MatchClass match_class_from_string(std::string_view s) {
    if (s == "exact") return MatchClass::exact;
    if (s == "initial_based") return MatchClass::initial_based;
    if (s == "nickname_based") return MatchClass::nickname_based;
    return MatchClass::incompatible;
}

namespace detail {
inline bool complete_name(const std::string& s) { return s.size() > 1; }
}

/// Classifies a graduate/author name pair. Last names must agree exactly
/// after normalization. First names agree exactly, through the nickname
/// table, or through a shared first initial; initial matches additionally
/// need complete, equal middle names on both sides and full-name similarity
/// above the threshold (0.90 by default). The strongest applicable class
/// wins; the similarity gate applies only to initial-based matches.
inline MatchClass names_compatible(const NameParts& grad, const NameParts& author,
                                   const NicknameTable& nicknames, double jw_threshold = 0.90) {
    if (grad.last.empty() || grad.last != author.last) return MatchClass::incompatible;
    if (grad.first.empty() || author.first.empty()) return MatchClass::incompatible;

    if (grad.first == author.first) return MatchClass::exact;

    if (grad.first[0] == author.first[0] &&
        (grad.first.size() == 1 || author.first.size() == 1) &&
        detail::complete_name(grad.middle) && detail::complete_name(author.middle) &&
        grad.middle == author.middle &&
        jaro_winkler(grad.full(), author.full()) > jw_threshold) {
        return MatchClass::initial_based;
    }

    if (nicknames.equivalent(grad.first, author.first)) return MatchClass::nickname_based;

    return MatchClass::incompatible;
}

}  // namespace linkforge::names
