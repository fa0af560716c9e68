#include "tweetrec/textprep.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include <boost/multiprecision/cpp_int.hpp>

#include "tweetrec/io.hpp"

namespace tweetrec {

namespace {

bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_letter(char c) { return is_lower(c) || is_upper(c); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_tag_char(char c) {
    return is_letter(c) || is_digit(c) || c == '_' || static_cast<unsigned char>(c) >= 0x80;
}

bool is_sigil(char c) { return c == '#' || c == '@'; }

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (is_upper(c)) c = static_cast<char>(c - 'A' + 'a');
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::size_t utf8_char_len(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead >> 5) == 0x6) return 2;
    if ((lead >> 4) == 0xE) return 3;
    if ((lead >> 3) == 0x1E) return 4;
    return 1;
}

// Partial segmentation of a prefix, scored by sum of log(count) - k log(total).
struct Path {
    bool valid = false;
    long double log_score = 0;
    std::vector<std::string> segments;
};

using boost::multiprecision::cpp_int;

cpp_int product_of_counts(const std::vector<std::string>& segments, const UnigramDictionary& dict) {
    cpp_int p = 1;
    for (const auto& s : segments) p *= dict.count(s);
    return p;
}

// <0 when a scores lower than b, 0 on an exact tie, >0 when higher.
int compare_scores(const Path& a, const Path& b, const UnigramDictionary& dict) {
    constexpr long double kNearTie = 1e-9L;
    const long double diff = a.log_score - b.log_score;
    if (diff > kNearTie) return 1;
    if (diff < -kNearTie) return -1;
    // prod_a / T^ka vs prod_b / T^kb, cross-multiplied.
    const cpp_int total = dict.total();
    cpp_int lhs = product_of_counts(a.segments, dict) * boost::multiprecision::pow(total, static_cast<unsigned>(b.segments.size()));
    cpp_int rhs = product_of_counts(b.segments, dict) * boost::multiprecision::pow(total, static_cast<unsigned>(a.segments.size()));
    if (lhs == rhs) return 0;
    return lhs > rhs ? 1 : -1;
}

bool better(const Path& a, const Path& b, const UnigramDictionary& dict) {
    if (!b.valid) return a.valid;
    if (!a.valid) return false;
    const int c = compare_scores(a, b, dict);
    if (c != 0) return c > 0;
    if (a.segments.size() != b.segments.size()) return a.segments.size() < b.segments.size();
    return a.segments < b.segments;
}

std::vector<std::string> split_pretokens(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) words.push_back(std::move(cur));
        cur.clear();
    };
    for (char c : text) {
        if (is_space(c)) {
            flush();
        } else if (static_cast<unsigned char>(c) < 0x80 && std::ispunct(static_cast<unsigned char>(c))) {
            flush();
            words.emplace_back(1, c);
        } else {
            cur += is_upper(c) ? static_cast<char>(c - 'A' + 'a') : c;
        }
    }
    flush();
    return words;
}

} // namespace

UnigramDictionary::UnigramDictionary(std::unordered_map<std::string, std::uint64_t> counts) {
    for (auto& [word, count] : counts) {
        if (count == 0) throw InvalidInput("unigram count must be >= 1 for '" + word + "'");
        if (word.empty()) throw InvalidInput("empty unigram");
        counts_[lower_ascii(word)] += count;
    }
    for (const auto& [word, count] : counts_) {
        total_ += count;
        max_word_length_ = std::max(max_word_length_, word.size());
    }
}

UnigramDictionary UnigramDictionary::from_tsv(std::string_view text) {
    std::unordered_map<std::string, std::uint64_t> counts;
    for_each_line(text, [&](std::string_view line, std::size_t n) {
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos || tab == 0)
            throw InvalidInput("dictionary line " + std::to_string(n) + ": expected token<TAB>count");
        const auto num = line.substr(tab + 1);
        std::uint64_t count = 0;
        auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), count);
        if (ec != std::errc{} || ptr != num.data() + num.size() || count == 0)
            throw InvalidInput("dictionary line " + std::to_string(n) + ": bad count");
        counts[lower_ascii(line.substr(0, tab))] += count;
    });
    return UnigramDictionary(std::move(counts));
}

std::uint64_t UnigramDictionary::count(std::string_view word) const {
    auto it = counts_.find(std::string(word));
    return it == counts_.end() ? 0 : it->second;
}

Vocabulary::Vocabulary(std::vector<std::string> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (!index_.emplace(entries_[i], static_cast<TokenId>(i)).second)
            throw InvalidInput("duplicate vocabulary entry '" + entries_[i] + "'");
        std::string_view e = entries_[i];
        if (e.starts_with(kContinuation)) e.remove_prefix(kContinuation.size());
        max_piece_length_ = std::max(max_piece_length_, e.size());
    }
    if (entries_.empty()) return;
    auto unk = find(kUnknown);
    if (!unk) throw InvalidInput("vocabulary has no [UNK] entry");
    unknown_id_ = *unk;
    padding_id_ = find(kPadding);
}

Vocabulary Vocabulary::from_lines(std::string_view text) {
    std::vector<std::string> entries;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        entries.emplace_back(line);
        start = end + 1;
    }
    return Vocabulary(std::move(entries));
}

std::string Vocabulary::to_lines() const {
    std::string out;
    for (const auto& e : entries_) out += e + "\n";
    return out;
}

std::optional<TokenId> Vocabulary::find(std::string_view piece) const {
    auto it = index_.find(std::string(piece));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::string_view role_name(Role r) {
    switch (r) {
    case Role::News: return "news";
    case Role::Tweet: return "tweet";
    case Role::Creator: return "creator";
    case Role::EarlyFusion: return "early_fusion";
    }
    return "?";
}

Role parse_role(std::string_view name) {
    for (Role r : {Role::News, Role::Tweet, Role::Creator, Role::EarlyFusion})
        if (role_name(r) == name) return r;
    throw InvalidInput("unknown role: " + std::string(name));
}

std::size_t role_cap(Role r) {
    switch (r) {
    case Role::News: return 512;
    case Role::Tweet: return 128;
    case Role::Creator: return 128;
    case Role::EarlyFusion: return 256;
    }
    return 0;
}

std::optional<std::vector<std::string>> split_camel_underscore(std::string_view token) {
    std::vector<std::string> pieces;
    std::string cur;
    bool boundary = false;
    for (std::size_t i = 0; i < token.size(); ++i) {
        const char c = token[i];
        if (c == '_') {
            boundary = true;
            if (!cur.empty()) pieces.push_back(std::move(cur));
            cur.clear();
            continue;
        }
        if (!cur.empty()) {
            const char prev = cur.back();
            const bool split = (is_lower(prev) && is_upper(c)) ||
                               (is_letter(prev) && is_digit(c)) ||
                               (is_digit(prev) && is_letter(c));
            if (split) {
                boundary = true;
                pieces.push_back(std::move(cur));
                cur.clear();
            }
        }
        cur += c;
    }
    if (!cur.empty()) pieces.push_back(std::move(cur));
    if (!boundary || pieces.empty()) return std::nullopt;
    return pieces;
}

std::vector<std::string> segment_max_prob(std::string_view token, const UnigramDictionary& dict) {
    const std::size_t n = token.size();
    if (n == 0 || n > kMaxSegmentableLength || dict.total() == 0) return {std::string(token)};

    const long double log_total = std::log(static_cast<long double>(dict.total()));
    const std::size_t max_word = dict.max_word_length();
    std::vector<Path> best(n + 1);
    best[0].valid = true;
    for (std::size_t end = 1; end <= n; ++end) {
        const std::size_t lo = end > max_word ? end - max_word : 0;
        for (std::size_t start = lo; start < end; ++start) {
            if (!best[start].valid) continue;
            const auto word = token.substr(start, end - start);
            const std::uint64_t c = dict.count(word);
            if (c == 0) continue;
            Path cand;
            cand.valid = true;
            cand.log_score = best[start].log_score + std::log(static_cast<long double>(c)) - log_total;
            cand.segments = best[start].segments;
            cand.segments.emplace_back(word);
            if (better(cand, best[end], dict)) best[end] = std::move(cand);
        }
    }
    if (!best[n].valid) return {std::string(token)};
    return std::move(best[n].segments);
}

std::string expand_compound_tokens(std::string_view text, const UnigramDictionary& dict) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        const bool at_boundary = i == 0 || !(is_tag_char(text[i - 1]) || is_sigil(text[i - 1]));
        if (!is_sigil(c) || !at_boundary) {
            out += c;
            ++i;
            continue;
        }
        std::size_t body_start = i;
        while (body_start < text.size() && is_sigil(text[body_start])) ++body_start;
        std::size_t body_end = body_start;
        while (body_end < text.size() && is_tag_char(text[body_end])) ++body_end;
        if (body_end == body_start) {
            out.append(text.substr(i, body_start - i));
            i = body_start;
            continue;
        }
        const std::string_view body = text.substr(body_start, body_end - body_start);
        if (auto pieces = split_camel_underscore(body)) {
            out += join(*pieces, " ");
        } else {
            auto segments = segment_max_prob(lower_ascii(body), dict);
            out += segments.size() > 1 ? join(segments, " ") : std::string(body);
        }
        i = body_end;
    }
    return out;
}

std::string serialize_creator_context(const CreatorProfile& profile, const AttributeSet& included) {
    std::string out;
    for (Attribute a : kAllAttributes) {
        if (!included.contains(a)) continue;
        const auto& value = profile.get(a);
        if (!value || value->empty()) continue;
        if (!out.empty()) out += ' ';
        out += attribute_name(a);
        out += ": ";
        out += *value;
    }
    return out;
}

TokenSequence tokenize_for_role(std::string_view text, const Vocabulary& vocab, Role role) {
    if (vocab.empty()) throw InvalidInput("tokenize_for_role: empty vocabulary");
    const std::size_t cap = role_cap(role);
    TokenSequence seq;
    seq.role = role;
    std::string candidate;
    for (const auto& word : split_pretokens(text)) {
        std::size_t start = 0;
        while (start < word.size()) {
            if (seq.ids.size() >= cap) return seq;
            std::optional<TokenId> match;
            std::size_t match_end = start;
            const std::size_t longest = std::min(word.size(), start + vocab.max_piece_length());
            for (std::size_t end = longest; end > start; --end) {
                candidate.clear();
                if (start > 0) candidate += Vocabulary::kContinuation;
                candidate.append(word, start, end - start);
                if (auto id = vocab.find(candidate)) {
                    match = id;
                    match_end = end;
                    break;
                }
            }
            if (match) {
                seq.ids.push_back(*match);
                start = match_end;
            } else {
                seq.ids.push_back(vocab.unknown_id());
                start += std::min(utf8_char_len(static_cast<unsigned char>(word[start])),
                                  word.size() - start);
            }
        }
    }
    if (seq.ids.size() > cap) seq.ids.resize(cap);
    return seq;
}

} // namespace tweetrec
