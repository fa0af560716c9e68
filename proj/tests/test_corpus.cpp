#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "tweetrec/corpus.hpp"
#include "tweetrec/experiment.hpp"
#include "tweetrec/io.hpp"

using namespace tweetrec;

namespace {

Article article(std::string id, std::size_t embeds, Timestamp at = 1'700'000'000) {
    Article a{std::move(id), "Title", "Body text.", at, {}, {}};
    for (std::size_t i = 0; i < embeds; ++i) a.embedded_tweet_ids.push_back(a.article_id + "-" + std::to_string(i));
    return a;
}

Tweet tweet(std::string id, std::string text, Timestamp at = 1'600'000'000, std::string creator = "c1") {
    return Tweet{std::move(id), std::move(text), at, std::move(creator)};
}

std::set<TrainingPair> as_set(const std::vector<TrainingPair>& v) { return {v.begin(), v.end()}; }

} // namespace

TEST_CASE("extract_embedded_tweet_ids finds status links") {
    CHECK(extract_embedded_tweet_ids(R"(<p>See <a href="https://twitter.com/jack/status/20">this</a></p>)") ==
          std::vector<std::string>{"20"});
}

TEST_CASE("extract_embedded_tweet_ids returns nothing without twitter markup") {
    CHECK(extract_embedded_tweet_ids("<html><body><p>No embeds at all.</p></body></html>").empty());
}

TEST_CASE("extract_embedded_tweet_ids deduplicates repeated links") {
    const std::string html = R"(<a href="https://twitter.com/jack/status/20">a</a> <a href="http://twitter.com/jack/status/20">b</a>)";
    CHECK(extract_embedded_tweet_ids(html) == std::vector<std::string>{"20"});
}

TEST_CASE("extract_embedded_tweet_ids keeps first-occurrence order across markup forms") {
    const std::string html =
        R"(<blockquote class="twitter-tweet" data-tweet-id="300"><p>x</p></blockquote>)"
        R"(<a href="https://twitter.com/b/status/100">l</a>)"
        R"(<blockquote class="twitter-tweet"><a href="https://twitter.com/a/status/200">l</a></blockquote>)"
        R"(<a href="https://twitter.com/b/status/100">again</a>)";
    CHECK(extract_embedded_tweet_ids(html) == std::vector<std::string>{"300", "100", "200"});
}

TEST_CASE("filter_articles applies the 1..20 embed rule") {
    const std::vector<Article> in = {article("none", 0), article("many", 21), article("max", 20), article("one", 1)};
    const auto out = filter_articles(in);
    REQUIRE(out.size() == 2);
    CHECK(out[0].article_id == "max");
    CHECK(out[1].article_id == "one");
    SUBCASE("idempotent") {
        const auto twice = filter_articles(out);
        REQUIRE(twice.size() == out.size());
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(twice[i].article_id == out[i].article_id);
    }
}

TEST_CASE("strip_embedded_tweets removes verbatim tweet text") {
    const Tweet t = tweet("1", "Breaking: the rally is on");
    const std::string body = "Intro paragraph. Breaking: the rally is on Closing paragraph.";
    const std::string out = strip_embedded_tweets(body, std::span(&t, 1));
    CHECK(out.find(t.text) == std::string::npos);
    CHECK(out == "Intro paragraph.  Closing paragraph.");
}

TEST_CASE("strip_embedded_tweets leaves bodies without embed text unchanged") {
    const Tweet t = tweet("1", "unrelated words");
    CHECK(strip_embedded_tweets("Plain body.", std::span(&t, 1)) == "Plain body.");
}

TEST_CASE("strip_embedded_tweets signals a degenerate article") {
    const Tweet t = tweet("1", "only the tweet");
    CHECK_THROWS_AS(strip_embedded_tweets("only the tweet", std::span(&t, 1)), DegenerateArticle);
}

TEST_CASE("strip_embedded_tweets output never contains an embedded text") {
    const std::vector<Tweet> ts = {tweet("1", "abab"), tweet("2", "cd")};
    const std::string out = strip_embedded_tweets("xx ababab cdcd yy abab", ts);
    for (const auto& t : ts) CHECK(out.find(t.text) == std::string::npos);
}

TEST_CASE("split_dataset on 10 articles gives 8/1/1") {
    std::vector<TrainingPair> pairs;
    for (int a = 0; a < 10; ++a)
        for (int t = 0; t < 2; ++t) pairs.push_back({"a" + std::to_string(a), "t" + std::to_string(a * 2 + t)});
    const DatasetSplit s = split_dataset(pairs, 42);
    auto articles = [](const std::vector<TrainingPair>& v) {
        std::set<std::string> ids;
        for (const auto& p : v) ids.insert(p.article_id);
        return ids;
    };
    CHECK(articles(s.train).size() == 8);
    CHECK(articles(s.dev).size() == 1);
    CHECK(articles(s.test).size() == 1);
    CHECK(s.train.size() == 16);
}

TEST_CASE("split_dataset is deterministic for a seed") {
    std::vector<TrainingPair> pairs;
    for (int i = 0; i < 30; ++i) pairs.push_back({"a" + std::to_string(i / 3), "t" + std::to_string(i)});
    const DatasetSplit a = split_dataset(pairs, 5);
    const DatasetSplit b = split_dataset(pairs, 5);
    CHECK(a.train == b.train);
    CHECK(a.dev == b.dev);
    CHECK(a.test == b.test);
}

TEST_CASE("split_dataset in pair mode splits 9 pairs 7/1/1") {
    std::vector<TrainingPair> pairs;
    for (int i = 0; i < 9; ++i) pairs.push_back({"a", "t" + std::to_string(i)});
    const DatasetSplit s = split_dataset(pairs, 1, {}, SplitUnit::Pair);
    CHECK(s.train.size() == 7);
    CHECK(s.dev.size() == 1);
    CHECK(s.test.size() == 1);
}

TEST_CASE("split_dataset partitions its input exactly") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<TrainingPair> pairs;
        const std::size_t n = 1 + rng.index(60);
        for (std::size_t i = 0; i < n; ++i)
            pairs.push_back({"a" + std::to_string(rng.index(12)), "t" + std::to_string(i)});
        for (SplitUnit unit : {SplitUnit::Article, SplitUnit::Pair}) {
            const DatasetSplit s = split_dataset(pairs, trial, {}, unit);
            const auto tr = as_set(s.train), dv = as_set(s.dev), te = as_set(s.test);
            std::set<TrainingPair> all = tr;
            all.insert(dv.begin(), dv.end());
            all.insert(te.begin(), te.end());
            CHECK(all == as_set(pairs));
            CHECK(tr.size() + dv.size() + te.size() == pairs.size());
            if (unit == SplitUnit::Article) {
                std::map<std::string, int> where;
                auto mark = [&](const std::vector<TrainingPair>& v, int tag) {
                    for (const auto& p : v) {
                        auto [it, inserted] = where.emplace(p.article_id, tag);
                        CHECK((inserted || it->second == tag));
                    }
                };
                mark(s.train, 0);
                mark(s.dev, 1);
                mark(s.test, 2);
            }
        }
    }
}

TEST_CASE("split_dataset rejects empty input") {
    CHECK_THROWS_AS(split_dataset(std::vector<TrainingPair>{}, 1), InvalidInput);
}

TEST_CASE("build_candidate_pool uses the half-open week before the article") {
    const Timestamp t = 1'700'000'000;
    const std::vector<Tweet> tweets = {tweet("three_days", "x", t - 3 * kSecondsPerDay),
                                       tweet("eight_days", "x", t - 8 * kSecondsPerDay),
                                       tweet("hour_after", "x", t + 3600), tweet("at_time", "x", t),
                                       tweet("window_edge", "x", t - 7 * kSecondsPerDay)};
    const auto pool = build_candidate_pool(tweets, t);
    CHECK(pool == std::vector<std::string>{"three_days", "window_edge"});
    for (const auto& id : pool) {
        auto it = std::find_if(tweets.begin(), tweets.end(), [&](const Tweet& tw) { return tw.tweet_id == id; });
        CHECK(it->created_at < t);
    }
    CHECK_THROWS_AS(build_candidate_pool(tweets, t, 0), InvalidInput);
}

TEST_CASE("compare_profile_snapshots reports per-attribute stability") {
    std::vector<CreatorProfile> a, b;
    for (int i = 0; i < 10; ++i) {
        CreatorProfile p{"c" + std::to_string(i), "h" + std::to_string(i), "Name", "bio " + std::to_string(i),
                         std::nullopt, "City", 1};
        a.push_back(p);
        if (i == 0) p.bio = "changed bio";
        p.snapshot_at = 2;
        b.push_back(p);
    }
    SUBCASE("identical snapshots") {
        const auto r = compare_profile_snapshots(a, a);
        CHECK(r.shared_creators == 10);
        for (Attribute attr : kAllAttributes) CHECK(r.fraction(attr) == 1.0);
    }
    SUBCASE("nine of ten bios identical") {
        const auto r = compare_profile_snapshots(a, b);
        CHECK(r.fraction(Attribute::Bio) == doctest::Approx(0.9).epsilon(1e-15));
        CHECK(r.fraction(Attribute::Screen) == 1.0);
    }
    SUBCASE("disjoint creators") {
        std::vector<CreatorProfile> other = {CreatorProfile{"zz", {}, {}, {}, {}, {}, 1}};
        CHECK_THROWS_AS(compare_profile_snapshots(a, other), InvalidInput);
    }
}

TEST_CASE("record validation enforces the documented bounds") {
    CHECK_THROWS_AS(validate(Tweet{"1", std::string(281, 'x'), 1, "c"}), InvalidInput);
    CHECK_NOTHROW(validate(Tweet{"1", std::string(280, 'x'), 1, "c"}));
    CreatorProfile p{"c", std::string(16, 'h'), {}, {}, {}, {}, 1};
    CHECK_THROWS_AS(validate(p), InvalidInput);
    p.screen_handle = std::string(15, 'h');
    CHECK_NOTHROW(validate(p));
    Article a = article("a", 1, 0);
    CHECK_THROWS_AS(validate(a), InvalidInput);
}

TEST_CASE("Corpus mines pairs in article then embed order") {
    std::vector<Article> arts = {article("a1", 2), article("a2", 1)};
    arts[0].embedded_tweet_ids = {"t2", "t1"};
    arts[1].embedded_tweet_ids = {"missing"};
    const Corpus c(arts, {tweet("t1", "x"), tweet("t2", "y")}, {});
    const auto pairs = c.mine_pairs();
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0] == TrainingPair{"a1", "t2"});
    CHECK(pairs[1] == TrainingPair{"a1", "t1"});
    CHECK_THROWS_AS(Corpus({article("a", 1), article("a", 1)}, {}, {}), InvalidInput);
}

TEST_CASE("ingest_corpus re-extracts embeds, filters and strips") {
    Article with_html = article("a1", 0);
    with_html.body = "Story text. quoted tweet words";
    with_html.raw_html = R"(<blockquote class="twitter-tweet"><a href="https://twitter.com/u/status/77">x</a></blockquote>)";
    Article only_embed = article("a2", 0);
    only_embed.embedded_tweet_ids = {"77"};
    only_embed.body = "quoted tweet words";
    Article no_embeds = article("a3", 0);
    IngestStats stats;
    const Corpus c = ingest_corpus({with_html, only_embed, no_embeds}, {tweet("77", "quoted tweet words")}, {}, &stats);
    CHECK(stats.articles_in == 3);
    CHECK(stats.filtered_out == 1);
    CHECK(stats.degenerate == 1);
    CHECK(stats.articles_kept == 1);
    REQUIRE(c.articles().size() == 1);
    CHECK(c.articles()[0].embedded_tweet_ids == std::vector<std::string>{"77"});
    CHECK(c.articles()[0].body.find("quoted tweet words") == std::string::npos);
    CHECK(c.articles()[0].raw_html.empty());
}

TEST_CASE("JSONL records round-trip") {
    Article a = article("a1", 2);
    a.raw_html = "<p>x</p>";
    const std::vector<Article> arts = {a};
    const auto back = parse_articles_jsonl(articles_to_jsonl(arts));
    REQUIRE(back.size() == 1);
    CHECK(back[0].embedded_tweet_ids == a.embedded_tweet_ids);
    CHECK(back[0].raw_html == a.raw_html);
    const std::vector<CreatorProfile> creators = {CreatorProfile{"c", "h", std::nullopt, "bio", {}, "X", 5}};
    const auto cb = parse_creators_jsonl(creators_to_jsonl(creators));
    REQUIRE(cb.size() == 1);
    CHECK(cb[0].bio == "bio");
    CHECK_FALSE(cb[0].display_name.has_value());
    DatasetSplit s{{{"a", "1"}}, {{"b", "2"}}, {{"c", "3"}}, 0};
    const DatasetSplit sb = parse_split_manifest(split_manifest_to_jsonl(s));
    CHECK(sb.train == s.train);
    CHECK(sb.dev == s.dev);
    CHECK(sb.test == s.test);
    CHECK_THROWS_AS(parse_tweets_jsonl("{\"tweet_id\": 5}"), InvalidInput);
}
