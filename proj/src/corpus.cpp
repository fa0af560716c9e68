#include "tweetrec/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <unordered_set>

namespace tweetrec {

namespace {

constexpr std::array<std::string_view, 5> kAttributeNames = {"screen", "display", "bio",
                                                              "website", "location"};
constexpr std::array<std::size_t, 5> kAttributeBounds = {15, 50, 160, 100, 30};

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_handle_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view take_digits(std::string_view s, std::size_t pos) {
    std::size_t end = pos;
    while (end < s.size() && is_digit(s[end])) ++end;
    return s.substr(pos, end - pos);
}

bool starts_with_at(std::string_view s, std::size_t pos, std::string_view prefix) {
    return s.size() >= pos && s.substr(pos).starts_with(prefix);
}

struct Hit {
    std::size_t pos;
    std::string id;
};

// twitter.com/<handle>/status(es)/<digits> and twitter.com/i/web/status/<digits>
void scan_status_urls(std::string_view lower, std::vector<Hit>& hits) {
    constexpr std::string_view kDomain = "twitter.com/";
    for (std::size_t pos = lower.find(kDomain); pos != std::string_view::npos;
         pos = lower.find(kDomain, pos + 1)) {
        if (pos > 0) {
            const char before = lower[pos - 1];
            if (std::isalnum(static_cast<unsigned char>(before)) || before == '-' ||
                before == '_')
                continue;
        }
        std::size_t p = pos + kDomain.size();
        const std::size_t handle_start = p;
        while (p < lower.size() && is_handle_char(lower[p])) ++p;
        const std::string_view handle = lower.substr(handle_start, p - handle_start);
        if (handle.empty()) continue;
        if (handle == "i" && starts_with_at(lower, p, "/web")) p += 4;
        std::size_t digits_at = std::string_view::npos;
        if (starts_with_at(lower, p, "/statuses/")) {
            digits_at = p + 10;
        } else if (starts_with_at(lower, p, "/status/")) {
            digits_at = p + 8;
        }
        if (digits_at == std::string_view::npos) continue;
        const auto digits = take_digits(lower, digits_at);
        if (digits.empty() || digits.size() > 20) continue;
        hits.push_back({pos, std::string(digits)});
    }
}

// <blockquote class="twitter-tweet" data-tweet-id="...">
void scan_blockquotes(std::string_view lower, std::vector<Hit>& hits) {
    constexpr std::string_view kTag = "<blockquote";
    for (std::size_t pos = lower.find(kTag); pos != std::string_view::npos;
         pos = lower.find(kTag, pos + 1)) {
        const std::size_t close = lower.find('>', pos);
        if (close == std::string_view::npos) break;
        const std::string_view tag = lower.substr(pos, close - pos);
        if (tag.find("twitter-tweet") == std::string_view::npos) continue;
        constexpr std::string_view kAttr = "data-tweet-id=";
        const std::size_t attr = tag.find(kAttr);
        if (attr == std::string_view::npos) continue;
        std::size_t p = attr + kAttr.size();
        if (p < tag.size() && (tag[p] == '"' || tag[p] == '\'')) ++p;
        const auto digits = take_digits(tag, p);
        if (digits.empty() || digits.size() > 20) continue;
        hits.push_back({pos, std::string(digits)});
    }
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

// Sizes per the ratio rule: floor for dev/test, bumped to one when empty and
// n allows, remainder to train.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& r) {
    const std::uint64_t total = std::uint64_t{r.train} + r.dev + r.test;
    std::size_t dev = static_cast<std::size_t>(n * std::uint64_t{r.dev} / total);
    std::size_t test = static_cast<std::size_t>(n * std::uint64_t{r.test} / total);
    if (n >= 3) {
        dev = std::max<std::size_t>(dev, 1);
        test = std::max<std::size_t>(test, 1);
    }
    return {n - dev - test, dev, test};
}

} // namespace

std::string_view attribute_name(Attribute a) {
    return kAttributeNames[static_cast<std::size_t>(a)];
}

Attribute parse_attribute(std::string_view name) {
    for (std::size_t i = 0; i < kAttributeNames.size(); ++i) {
        if (kAttributeNames[i] == name) return static_cast<Attribute>(i);
    }
    throw InvalidInput("unknown creator attribute: " + std::string(name));
}

std::size_t attribute_max_chars(Attribute a) {
    return kAttributeBounds[static_cast<std::size_t>(a)];
}

const std::optional<std::string>& CreatorProfile::get(Attribute a) const {
    switch (a) {
    case Attribute::Screen: return screen_handle;
    case Attribute::Display: return display_name;
    case Attribute::Bio: return bio;
    case Attribute::Website: return website;
    case Attribute::Location: return location;
    }
    throw InvalidInput("bad attribute");
}

std::optional<std::string>& CreatorProfile::get(Attribute a) {
    return const_cast<std::optional<std::string>&>(std::as_const(*this).get(a));
}

void validate(const Article& a) {
    if (a.article_id.empty()) throw InvalidInput("article with empty id");
    if (a.published_at <= 0) throw InvalidInput("article " + a.article_id + ": published_at must be > 0");
    std::unordered_set<std::string_view> seen;
    for (const auto& id : a.embedded_tweet_ids) {
        if (!seen.insert(id).second)
            throw InvalidInput("article " + a.article_id + ": duplicate embedded tweet id " + id);
    }
}

void validate(const Tweet& t) {
    if (t.tweet_id.empty()) throw InvalidInput("tweet with empty id");
    if (utf8_length(t.text) > kMaxTweetChars)
        throw InvalidInput("tweet " + t.tweet_id + ": text exceeds 280 characters");
}

void validate(const CreatorProfile& p) {
    if (p.creator_id.empty()) throw InvalidInput("creator with empty id");
    for (Attribute a : kAllAttributes) {
        const auto& v = p.get(a);
        if (v && utf8_length(*v) > attribute_max_chars(a))
            throw InvalidInput("creator " + p.creator_id + ": " +
                               std::string(attribute_name(a)) + " exceeds " +
                               std::to_string(attribute_max_chars(a)) + " characters");
    }
}

Corpus::Corpus(std::vector<Article> articles, std::vector<Tweet> tweets,
               std::vector<CreatorProfile> creators)
    : articles_(std::move(articles)), tweets_(std::move(tweets)), creators_(std::move(creators)) {
    for (std::size_t i = 0; i < articles_.size(); ++i) {
        validate(articles_[i]);
        if (!article_index_.emplace(articles_[i].article_id, i).second)
            throw InvalidInput("duplicate article id " + articles_[i].article_id);
    }
    for (std::size_t i = 0; i < tweets_.size(); ++i) {
        validate(tweets_[i]);
        if (!tweet_index_.emplace(tweets_[i].tweet_id, i).second)
            throw InvalidInput("duplicate tweet id " + tweets_[i].tweet_id);
    }
    for (std::size_t i = 0; i < creators_.size(); ++i) {
        validate(creators_[i]);
        if (!creator_index_.emplace(creators_[i].creator_id, i).second)
            throw InvalidInput("duplicate creator id " + creators_[i].creator_id);
    }
}

const Article* Corpus::find_article(std::string_view id) const {
    auto it = article_index_.find(std::string(id));
    return it == article_index_.end() ? nullptr : &articles_[it->second];
}

const Tweet* Corpus::find_tweet(std::string_view id) const {
    auto it = tweet_index_.find(std::string(id));
    return it == tweet_index_.end() ? nullptr : &tweets_[it->second];
}

const CreatorProfile* Corpus::find_creator(std::string_view id) const {
    auto it = creator_index_.find(std::string(id));
    return it == creator_index_.end() ? nullptr : &creators_[it->second];
}

std::vector<TrainingPair> Corpus::mine_pairs() const {
    std::vector<TrainingPair> pairs;
    for (const auto& a : articles_) {
        for (const auto& id : a.embedded_tweet_ids) {
            if (find_tweet(id) != nullptr) pairs.push_back({a.article_id, id});
        }
    }
    return pairs;
}

std::vector<std::string> extract_embedded_tweet_ids(std::string_view html) {
    const std::string lower = to_lower_ascii(html);
    std::vector<Hit> hits;
    scan_status_urls(lower, hits);
    scan_blockquotes(lower, hits);
    std::stable_sort(hits.begin(), hits.end(),
                     [](const Hit& a, const Hit& b) { return a.pos < b.pos; });
    std::vector<std::string> ids;
    std::unordered_set<std::string> seen;
    for (auto& h : hits) {
        if (seen.insert(h.id).second) ids.push_back(std::move(h.id));
    }
    return ids;
}

std::vector<Article> filter_articles(std::span<const Article> articles) {
    std::vector<Article> kept;
    for (const auto& a : articles) {
        const auto n = a.embedded_tweet_ids.size();
        if (n >= 1 && n <= kMaxEmbedsPerArticle) kept.push_back(a);
    }
    return kept;
}

std::string strip_embedded_tweets(std::string_view body, std::span<const Tweet> embedded) {
    std::string out(body);
    // Removing a span can splice a new occurrence together, so repeat to a fixpoint.
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& t : embedded) {
            if (t.text.empty()) continue;
            for (auto pos = out.find(t.text); pos != std::string::npos;
                 pos = out.find(t.text, pos)) {
                out.erase(pos, t.text.size());
                changed = true;
            }
        }
    }
    if (is_blank(out)) throw DegenerateArticle("article body consists only of embedded tweets");
    return out;
}

DatasetSplit split_dataset(std::span<const TrainingPair> pairs, std::uint64_t seed,
                           SplitRatios ratios, SplitUnit unit) {
    if (pairs.empty()) throw InvalidInput("split_dataset: empty pair set");
    if (ratios.train == 0 || ratios.dev == 0 || ratios.test == 0)
        throw InvalidInput("split_dataset: ratios must be positive");

    // Canonical order first, so the split depends only on the set and the seed.
    std::vector<TrainingPair> sorted(pairs.begin(), pairs.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    // Groups: one pair each, or all pairs of one article.
    std::vector<std::vector<TrainingPair>> groups;
    if (unit == SplitUnit::Pair) {
        for (auto& p : sorted) groups.push_back({p});
    } else {
        std::map<std::string, std::vector<TrainingPair>> by_article;
        for (auto& p : sorted) by_article[p.article_id].push_back(p);
        for (auto& [_, g] : by_article) groups.push_back(std::move(g));
    }

    Rng rng(seed);
    rng.shuffle(groups);
    const auto sizes = split_sizes(groups.size(), ratios);

    DatasetSplit split;
    split.seed = seed;
    std::size_t i = 0;
    auto take = [&](std::vector<TrainingPair>& dst, std::size_t count) {
        for (std::size_t end = i + count; i < end; ++i)
            dst.insert(dst.end(), groups[i].begin(), groups[i].end());
    };
    take(split.train, sizes[0]);
    take(split.dev, sizes[1]);
    take(split.test, sizes[2]);
    return split;
}

std::vector<std::string> build_candidate_pool(std::span<const Tweet> tweets,
                                              Timestamp article_time, int window_days) {
    if (window_days < 1) throw InvalidInput("build_candidate_pool: window_days must be >= 1");
    const Timestamp lo = article_time - Timestamp{window_days} * kSecondsPerDay;
    std::vector<std::string> ids;
    for (const auto& t : tweets) {
        if (t.created_at >= lo && t.created_at < article_time) ids.push_back(t.tweet_id);
    }
    return ids;
}

StabilityReport compare_profile_snapshots(std::span<const CreatorProfile> a,
                                          std::span<const CreatorProfile> b) {
    std::unordered_map<std::string_view, const CreatorProfile*> later;
    for (const auto& p : b) later.emplace(p.creator_id, &p);

    StabilityReport report;
    std::array<std::size_t, 5> identical{};
    for (const auto& p : a) {
        auto it = later.find(p.creator_id);
        if (it == later.end()) continue;
        ++report.shared_creators;
        for (Attribute attr : kAllAttributes) {
            if (p.get(attr) == it->second->get(attr)) ++identical[static_cast<std::size_t>(attr)];
        }
    }
    if (report.shared_creators == 0)
        throw InvalidInput("compare_profile_snapshots: no creators shared between snapshots");
    for (std::size_t i = 0; i < identical.size(); ++i)
        report.identical_fraction[i] =
            static_cast<double>(identical[i]) / static_cast<double>(report.shared_creators);
    return report;
}

SplitUnit parse_split_unit(std::string_view name) {
    if (name == "article") return SplitUnit::Article;
    if (name == "pair") return SplitUnit::Pair;
    throw InvalidInput("unknown split unit: " + std::string(name));
}

std::string_view split_unit_name(SplitUnit unit) {
    return unit == SplitUnit::Article ? "article" : "pair";
}

} // namespace tweetrec
