#include "tweetrec/synthetic.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <unordered_set>

#include "tweetrec/io.hpp"

namespace tweetrec {

namespace {

constexpr std::array<std::string_view, 14> kConsonants = {"b", "d", "f", "g", "k", "l", "m",
                                                          "n", "p", "r", "s", "t", "v", "z"};
constexpr std::array<std::string_view, 5> kVowels = {"a", "e", "i", "o", "u"};
constexpr Timestamp kEpoch = 1'600'000'000;

std::vector<std::string> all_syllables() {
    std::vector<std::string> out;
    for (auto c : kConsonants)
        for (auto v : kVowels) out.push_back(std::string(c) + std::string(v));
    return out;
}

std::string capitalized(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

class WordFactory {
public:
    explicit WordFactory(Rng& rng) : rng_(rng), syllables_(all_syllables()) {}

    std::string fresh(std::size_t syllables) {
        for (;;) {
            std::string w;
            for (std::size_t i = 0; i < syllables; ++i) w += syllables_[rng_.index(syllables_.size())];
            if (used_.insert(w).second) return w;
        }
    }

    std::vector<std::string> batch(std::size_t n, std::size_t syllables) {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < n; ++i) out.push_back(fresh(syllables));
        return out;
    }

    const std::vector<std::string>& syllables() const { return syllables_; }

private:
    Rng& rng_;
    std::vector<std::string> syllables_;
    std::unordered_set<std::string> used_;
};

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& pool) {
    return pool[rng.index(pool.size())];
}

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

std::string html_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

void SyntheticConfig::validate() const {
    if (num_topics == 0) throw InvalidInput("synthetic: num_topics must be > 0");
    if (words_per_topic < 3) throw InvalidInput("synthetic: words_per_topic must be >= 3");
    if (filler_words < 8) throw InvalidInput("synthetic: filler_words must be >= 8");
    if (num_articles == 0) throw InvalidInput("synthetic: num_articles must be > 0");
    if (embeds_per_article == 0 || embeds_per_article > kMaxEmbedsPerArticle)
        throw InvalidInput("synthetic: embeds_per_article must lie in 1..20");
    if (num_creators < 2 * num_topics)
        throw InvalidInput("synthetic: need at least one topical and one generic creator per topic");
    if (num_tweets < num_articles * embeds_per_article)
        throw InvalidInput("synthetic: num_tweets must cover every embedded tweet");
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    WordFactory words(rng);
    SyntheticCorpus out;

    for (std::size_t t = 0; t < cfg.num_topics; ++t) out.topic_words.push_back(words.batch(cfg.words_per_topic, 3));
    const auto filler = words.batch(cfg.filler_words, 3);
    const auto first_names = words.batch(40, 2);
    const auto last_names = words.batch(40, 3);
    const auto cities = words.batch(25, 3);

    auto topic_sample = [&](std::size_t topic, std::size_t n) {
        std::vector<std::string> pool = out.topic_words[topic];
        rng.shuffle(pool);
        pool.resize(std::min(n, pool.size()));
        return pool;
    };
    auto filler_sample = [&](std::size_t n) {
        std::vector<std::string> w;
        for (std::size_t i = 0; i < n; ++i) w.push_back(pick(rng, filler));
        return w;
    };

    // Creators.
    std::vector<std::vector<std::size_t>> creators_by_topic(cfg.num_topics);
    std::vector<std::size_t> generic_creators;
    for (std::size_t c = 0; c < cfg.num_creators; ++c) {
        const bool topical = c % 2 == 0;
        const std::size_t topic = topical ? (c / 2) % cfg.num_topics : kNoTopic;
        if (topical)
            creators_by_topic[topic].push_back(c);
        else
            generic_creators.push_back(c);
        out.creator_topics.push_back(topic);
        CreatorProfile p;
        p.creator_id = "c" + std::to_string(10000 + c);
        std::string handle = words.syllables()[rng.index(words.syllables().size())] +
                             words.syllables()[rng.index(words.syllables().size())];
        if (rng.uniform01() < 0.5) handle += "_" + words.syllables()[rng.index(words.syllables().size())];
        handle += std::to_string(10 + rng.index(90));
        p.screen_handle = handle;
        p.display_name = capitalized(pick(rng, first_names)) + " " + capitalized(pick(rng, last_names));
        auto bio = topical ? topic_sample(topic, 6) : filler_sample(6);
        for (auto& f : filler_sample(2)) bio.push_back(f);
        rng.shuffle(bio);
        p.bio = join_words(bio);
        if (rng.uniform01() < 0.7)
            p.website = "www." + words.syllables()[rng.index(words.syllables().size())] +
                        words.syllables()[rng.index(words.syllables().size())] + ".com";
        if (rng.uniform01() < 0.8) p.location = capitalized(pick(rng, cities));
        p.snapshot_at = kEpoch;
        out.creators.push_back(std::move(p));
    }

    std::size_t next_tweet = 0;
    auto new_tweet = [&](std::string text, std::size_t creator, Timestamp at) {
        Tweet t;
        t.tweet_id = std::to_string(1'000'000 + next_tweet++);
        t.text = std::move(text);
        t.created_at = at;
        t.creator_id = out.creators[creator].creator_id;
        out.tweets.push_back(std::move(t));
        return out.tweets.size() - 1;
    };
    auto topical_text = [&](std::size_t topic) {
        auto w = topic_sample(topic, 4);
        for (auto& f : filler_sample(4)) w.push_back(f);
        rng.shuffle(w);
        std::string text = join_words(w);
        const double r = rng.uniform01();
        const auto& tw = out.topic_words[topic];
        if (r < 0.25) {
            text += " #" + capitalized(pick(rng, tw)) + capitalized(pick(rng, tw));
        } else if (r < 0.35) {
            text += " #" + pick(rng, tw) + pick(rng, tw);
        }
        return text;
    };

    // Articles with their embedded tweets.
    const Timestamp horizon = kEpoch + 30 * kSecondsPerDay +
                              static_cast<Timestamp>(cfg.num_articles) * 7200;
    for (std::size_t a = 0; a < cfg.num_articles; ++a) {
        const std::size_t topic = rng.index(cfg.num_topics);
        out.article_topics.push_back(topic);
        Article art;
        art.article_id = "a" + std::to_string(10000 + a);
        art.published_at = kEpoch + 30 * kSecondsPerDay + static_cast<Timestamp>(a) * 7200;

        auto title = topic_sample(topic, 3);
        for (auto& f : filler_sample(2)) title.push_back(f);
        rng.shuffle(title);
        art.title = capitalized(join_words(title));

        std::vector<std::string> body;
        for (std::size_t i = 0; i < 16; ++i) body.push_back(pick(rng, out.topic_words[topic]));
        for (auto& f : filler_sample(12)) body.push_back(f);
        rng.shuffle(body);
        const std::string paragraph = capitalized(join_words(body)) + ".";

        std::string html = "<html><body><h1>" + html_escape(art.title) + "</h1><p>" + html_escape(paragraph) + "</p>";
        art.body = paragraph;
        for (std::size_t e = 0; e < cfg.embeds_per_article; ++e) {
            const Timestamp at = art.published_at - 1 - static_cast<Timestamp>(rng.index(6 * kSecondsPerDay));
            std::size_t creator;
            std::string text;
            if (e % 2 == 0) {
                creator = cfg.plant_bio ? pick(rng, generic_creators) : rng.index(cfg.num_creators);
                text = topical_text(topic);
            } else {
                const auto& own = creators_by_topic[topic];
                creator = cfg.plant_bio ? own[rng.index(own.size())] : rng.index(cfg.num_creators);
                text = join_words(filler_sample(8));
            }
            const Tweet& tw = out.tweets[new_tweet(std::move(text), creator, at)];
            const CreatorProfile& cp = out.creators[creator];
            art.embedded_tweet_ids.push_back(tw.tweet_id);
            art.body += " " + tw.text;
            html += "<blockquote class=\"twitter-tweet\"><p>" + html_escape(tw.text) + "</p>&mdash; " +
                    html_escape(*cp.display_name) + " (@" + *cp.screen_handle +
                    ") <a href=\"https://twitter.com/" + *cp.screen_handle + "/status/" + tw.tweet_id +
                    "\">link</a></blockquote>";
        }
        html += "</body></html>";
        art.raw_html = std::move(html);
        out.articles.push_back(std::move(art));
    }

    // Distractor tweets: half topical, half filler, random creators.
    while (out.tweets.size() < cfg.num_tweets) {
        const Timestamp at = kEpoch + static_cast<Timestamp>(rng.index(static_cast<std::uint64_t>(horizon - kEpoch)));
        const std::size_t creator = rng.index(cfg.num_creators);
        std::string text = rng.uniform01() < 0.5 ? topical_text(rng.index(cfg.num_topics))
                                                 : join_words(filler_sample(8));
        new_tweet(std::move(text), creator, at);
    }

    // Vocabulary: specials, characters, syllables, then whole words.
    std::vector<std::string> vocab = {std::string(Vocabulary::kPadding), std::string(Vocabulary::kUnknown)};
    for (char c = '!'; c <= '~'; ++c) {
        if ((c >= 'A' && c <= 'Z')) continue;
        vocab.emplace_back(1, c);
    }
    for (char c = '0'; c <= '9'; ++c) vocab.push_back("##" + std::string(1, c));
    for (char c = 'a'; c <= 'z'; ++c) vocab.push_back("##" + std::string(1, c));
    vocab.push_back("##_");
    for (const auto& s : words.syllables()) {
        vocab.push_back(s);
        vocab.push_back("##" + s);
    }
    for (auto a : kAllAttributes) vocab.emplace_back(attribute_name(a));
    for (const char* w : {"www", "com", "link"}) vocab.emplace_back(w);
    std::vector<const std::vector<std::string>*> lists = {&filler, &first_names, &last_names, &cities};
    for (const auto& tw : out.topic_words) lists.push_back(&tw);
    for (const auto* list : lists)
        for (const auto& w : *list) vocab.push_back(w);
    std::unordered_set<std::string> seen;
    for (auto& v : vocab)
        if (seen.insert(v).second) out.vocabulary.push_back(v);

    for (const auto* list : lists)
        for (const auto& w : *list) out.unigram_counts[w] = 1 + rng.index(1000);
    return out;
}

void write_synthetic_fixture(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "articles.jsonl", articles_to_jsonl(corpus.articles));
    write_file_atomic(dir / "tweets.jsonl", tweets_to_jsonl(corpus.tweets));
    write_file_atomic(dir / "creators.jsonl", creators_to_jsonl(corpus.creators));
    std::string vocab;
    for (const auto& v : corpus.vocabulary) vocab += v + "\n";
    write_file_atomic(dir / "vocab.txt", vocab);
    std::vector<std::pair<std::string, std::uint64_t>> counts(corpus.unigram_counts.begin(),
                                                              corpus.unigram_counts.end());
    std::sort(counts.begin(), counts.end());
    std::string dict;
    for (const auto& [w, c] : counts) dict += w + "\t" + std::to_string(c) + "\n";
    write_file_atomic(dir / "dictionary.tsv", dict);
}

} // namespace tweetrec
