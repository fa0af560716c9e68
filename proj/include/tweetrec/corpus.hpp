#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tweetrec/common.hpp"

namespace tweetrec {

inline constexpr std::size_t kMaxTweetChars = 280;
inline constexpr std::size_t kMaxEmbedsPerArticle = 20;

struct Article {
    std::string article_id;
    std::string title;
    std::string body;
    Timestamp published_at = 0;
    std::vector<std::string> embedded_tweet_ids;
    std::string raw_html;  // optional, only consulted at ingest
};

struct Tweet {
    std::string tweet_id;
    std::string text;
    Timestamp created_at = 0;
    std::string creator_id;
};

/// Creator metadata attributes in serialization order.
enum class Attribute : std::uint8_t { Screen, Display, Bio, Website, Location };

inline constexpr std::array<Attribute, 5> kAllAttributes = {
    Attribute::Screen, Attribute::Display, Attribute::Bio, Attribute::Website,
    Attribute::Location};

std::string_view attribute_name(Attribute a);
Attribute parse_attribute(std::string_view name);

/// Character bound of each attribute (screen 15, display 50, bio 160,
/// website 100, location 30).
std::size_t attribute_max_chars(Attribute a);

struct CreatorProfile {
    std::string creator_id;
    std::optional<std::string> screen_handle;
    std::optional<std::string> display_name;
    std::optional<std::string> bio;
    std::optional<std::string> website;
    std::optional<std::string> location;
    Timestamp snapshot_at = 0;

    const std::optional<std::string>& get(Attribute a) const;
    std::optional<std::string>& get(Attribute a);
};

struct TrainingPair {
    std::string article_id;
    std::string tweet_id;

    auto operator<=>(const TrainingPair&) const = default;
};

enum class SplitUnit { Article, Pair };

struct DatasetSplit {
    std::vector<TrainingPair> train;
    std::vector<TrainingPair> dev;
    std::vector<TrainingPair> test;
    std::uint64_t seed = 0;
};

struct SplitRatios {
    std::uint32_t train = 8;
    std::uint32_t dev = 1;
    std::uint32_t test = 1;
};

/// Raised by strip_embedded_tweets when nothing but embeds remain.
class DegenerateArticle : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-attribute fraction of shared creators whose value is byte-identical.
struct StabilityReport {
    std::size_t shared_creators = 0;
    std::array<double, 5> identical_fraction{};

    double fraction(Attribute a) const {
        return identical_fraction[static_cast<std::size_t>(a)];
    }
};

// Validation of single records; throws InvalidInput.
void validate(const Article& a);
void validate(const Tweet& t);
void validate(const CreatorProfile& p);

/// Articles, tweets and creator profiles with id lookups.
class Corpus {
public:
    Corpus() = default;
    Corpus(std::vector<Article> articles, std::vector<Tweet> tweets,
           std::vector<CreatorProfile> creators);

    const std::vector<Article>& articles() const { return articles_; }
    const std::vector<Tweet>& tweets() const { return tweets_; }
    const std::vector<CreatorProfile>& creators() const { return creators_; }

    const Article* find_article(std::string_view id) const;
    const Tweet* find_tweet(std::string_view id) const;
    const CreatorProfile* find_creator(std::string_view id) const;

    /// Positive pairs of every article whose embedded ids resolve to tweets,
    /// in article order then embed order.
    std::vector<TrainingPair> mine_pairs() const;

private:
    std::vector<Article> articles_;
    std::vector<Tweet> tweets_;
    std::vector<CreatorProfile> creators_;
    std::unordered_map<std::string, std::size_t> article_index_;
    std::unordered_map<std::string, std::size_t> tweet_index_;
    std::unordered_map<std::string, std::size_t> creator_index_;
};

/// Tweet ids from twitter-tweet blockquotes (data-tweet-id) and
/// twitter.com/<handle>/status/<digits> URLs, in first-occurrence order.
std::vector<std::string> extract_embedded_tweet_ids(std::string_view html);

/// Keeps articles with 1..20 embedded tweets.
std::vector<Article> filter_articles(std::span<const Article> articles);

/// Removes every occurrence of each embedded tweet's text from body.
std::string strip_embedded_tweets(std::string_view body, std::span<const Tweet> embedded);

DatasetSplit split_dataset(std::span<const TrainingPair> pairs, std::uint64_t seed,
                           SplitRatios ratios = {}, SplitUnit unit = SplitUnit::Article);

/// Tweet ids with created_at in [article_time - window_days*86400, article_time).
std::vector<std::string> build_candidate_pool(std::span<const Tweet> tweets,
                                              Timestamp article_time, int window_days = 7);

StabilityReport compare_profile_snapshots(std::span<const CreatorProfile> a,
                                          std::span<const CreatorProfile> b);

SplitUnit parse_split_unit(std::string_view name);
std::string_view split_unit_name(SplitUnit unit);

} // namespace tweetrec
