#include "tweetrec/experiment.hpp"

#include <unordered_set>

#include <json.hpp>

namespace tweetrec {

Corpus ingest_corpus(std::vector<Article> articles, std::vector<Tweet> tweets,
                     std::vector<CreatorProfile> creators, IngestStats* stats) {
    IngestStats local;
    local.articles_in = articles.size();
    std::unordered_map<std::string, const Tweet*> tweet_by_id;
    for (const auto& t : tweets) tweet_by_id.emplace(t.tweet_id, &t);

    for (auto& a : articles)
        if (!a.raw_html.empty()) a.embedded_tweet_ids = extract_embedded_tweet_ids(a.raw_html);
    std::vector<Article> filtered = filter_articles(articles);
    local.filtered_out = articles.size() - filtered.size();

    std::vector<Article> kept;
    kept.reserve(filtered.size());
    for (auto& a : filtered) {
        std::vector<Tweet> embedded;
        for (const auto& id : a.embedded_tweet_ids)
            if (auto it = tweet_by_id.find(id); it != tweet_by_id.end()) embedded.push_back(*it->second);
        try {
            a.body = strip_embedded_tweets(a.body, embedded);
        } catch (const DegenerateArticle&) {
            ++local.degenerate;
            continue;
        }
        a.raw_html.clear();
        kept.push_back(std::move(a));
    }
    local.articles_kept = kept.size();
    if (stats) *stats = local;
    return Corpus(std::move(kept), std::move(tweets), std::move(creators));
}

TokenSequence news_tokens(const Article& article, const TextResources& res) {
    const std::string text = article.title + " " + article.body;
    return tokenize_for_role(expand_compound_tokens(text, *res.dict), res.vocab, Role::News);
}

TokenSequence tweet_tokens(const Tweet& tweet, const TextResources& res) {
    return tokenize_for_role(expand_compound_tokens(tweet.text, *res.dict), res.vocab, Role::Tweet);
}

TokenSequence creator_tokens(const CreatorProfile& profile, const AttributeSet& included,
                             const TextResources& res) {
    return tokenize_for_role(serialize_creator_context(profile, included), res.vocab, Role::Creator);
}

TokenSequence early_tokens(const Tweet& tweet, const CreatorProfile& profile, const AttributeSet& included,
                           const TextResources& res) {
    const std::string text =
        expand_compound_tokens(tweet.text, *res.dict) + " " + serialize_creator_context(profile, included);
    return tokenize_for_role(text, res.vocab, Role::EarlyFusion);
}

namespace {

/// Profiles and tweet -> creator links; the token maps are left empty.
PreparedCorpus prepared_skeleton(const Corpus& corpus, const AttributeSet& included) {
    PreparedCorpus p;
    p.included = included;
    std::unordered_set<std::string> seen;
    for (const auto& t : corpus.tweets()) {
        p.tweet_to_creator.emplace(t.tweet_id, t.creator_id);
        if (seen.insert(t.creator_id).second) {
            const CreatorProfile* found = corpus.find_creator(t.creator_id);
            p.profiles.push_back(found ? *found : CreatorProfile{t.creator_id, {}, {}, {}, {}, {}, 0});
        }
    }
    return p;
}

} // namespace

PreparedCorpus prepare_corpus(const Corpus& corpus, const TextResources& res, const AttributeSet& included) {
    if (!res.dict) throw InvalidInput("prepare_corpus: missing unigram dictionary");
    PreparedCorpus p = prepared_skeleton(corpus, included);
    for (const auto& a : corpus.articles()) p.news.emplace(a.article_id, news_tokens(a, res));
    for (const auto& profile : p.profiles) p.creator.emplace(profile.creator_id, creator_tokens(profile, included, res));
    std::unordered_map<std::string, const CreatorProfile*> profiles;
    for (const auto& profile : p.profiles) profiles.emplace(profile.creator_id, &profile);
    for (const auto& t : corpus.tweets()) {
        p.tweet.emplace(t.tweet_id, tweet_tokens(t, res));
        p.early.emplace(t.tweet_id, early_tokens(t, *profiles.at(t.creator_id), included, res));
    }
    return p;
}

std::string prepared_corpus_to_jsonl(const Corpus& corpus, const PreparedCorpus& prepared) {
    std::string out;
    auto line = [&out](std::string_view kind, const std::string& id, const TokenSequence& seq) {
        out += nlohmann::json{{"kind", kind}, {"id", id}, {"ids", seq.ids}}.dump() + "\n";
    };
    for (const auto& a : corpus.articles()) line("news", a.article_id, prepared.news.at(a.article_id));
    for (const auto& t : corpus.tweets()) {
        line("tweet", t.tweet_id, prepared.tweet.at(t.tweet_id));
        line("early", t.tweet_id, prepared.early.at(t.tweet_id));
    }
    for (const auto& p : prepared.profiles) line("creator", p.creator_id, prepared.creator.at(p.creator_id));
    return out;
}

PreparedCorpus parse_prepared_corpus(std::string_view text, const Corpus& corpus, const AttributeSet& included) {
    PreparedCorpus p = prepared_skeleton(corpus, included);
    const std::pair<std::string_view, std::pair<std::unordered_map<std::string, TokenSequence>*, Role>> targets[] = {
        {"news", {&p.news, Role::News}},
        {"tweet", {&p.tweet, Role::Tweet}},
        {"early", {&p.early, Role::EarlyFusion}},
        {"creator", {&p.creator, Role::Creator}},
    };
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        try {
            const auto j = nlohmann::json::parse(line);
            const auto kind = j.at("kind").get<std::string>();
            TokenSequence seq{j.at("ids").get<std::vector<TokenId>>(), Role::Tweet};
            bool known = false;
            for (const auto& [name, target] : targets) {
                if (name != kind) continue;
                seq.role = target.second;
                if (!target.first->emplace(j.at("id").get<std::string>(), std::move(seq)).second)
                    throw InvalidInput("duplicate " + kind + " sequence");
                known = true;
                break;
            }
            if (!known) throw InvalidInput("unknown sequence kind " + kind);
        } catch (const nlohmann::json::exception& e) {
            throw InvalidInput("token sequences line " + std::to_string(line_no) + ": " + e.what());
        } catch (const InvalidInput& e) {
            throw InvalidInput("token sequences line " + std::to_string(line_no) + ": " + e.what());
        }
    });
    for (const auto& a : corpus.articles())
        if (!p.news.contains(a.article_id)) throw InvalidInput("token sequences: missing article " + a.article_id);
    for (const auto& t : corpus.tweets())
        if (!p.tweet.contains(t.tweet_id) || !p.early.contains(t.tweet_id))
            throw InvalidInput("token sequences: missing tweet " + t.tweet_id);
    for (const auto& profile : p.profiles)
        if (!p.creator.contains(profile.creator_id))
            throw InvalidInput("token sequences: missing creator " + profile.creator_id);
    return p;
}

std::vector<TrainingExample> make_examples(const PreparedCorpus& prepared, std::span<const TrainingPair> pairs) {
    std::vector<TrainingExample> out;
    out.reserve(pairs.size());
    for (const auto& pair : pairs) {
        auto news = prepared.news.find(pair.article_id);
        if (news == prepared.news.end()) throw InvalidInput("make_examples: unknown article " + pair.article_id);
        auto tweet = prepared.tweet.find(pair.tweet_id);
        if (tweet == prepared.tweet.end()) throw InvalidInput("make_examples: unknown tweet " + pair.tweet_id);
        const auto& creator_id = prepared.tweet_to_creator.at(pair.tweet_id);
        out.push_back(TrainingExample{news->second, tweet->second, prepared.creator.at(creator_id),
                                      prepared.early.at(pair.tweet_id)});
    }
    return out;
}

CandidateEmbeddings embed_candidates(const RetrievalModel& model, const Corpus& corpus,
                                     const PreparedCorpus& prepared, const TextResources& res,
                                     CreatorEmbeddingCache& cache) {
    CandidateEmbeddings out;
    std::unordered_map<std::string, const CreatorProfile*> profiles;
    for (const auto& p : prepared.profiles) profiles.emplace(p.creator_id, &p);
    CreatorEmbeddingCache::Encoder creator_encoder;
    if (model.uses_creator_encoder())
        creator_encoder = [&model](const TokenSequence& seq) { return model.encode_creator(seq); };
    auto creator_embedding = [&](const std::string& creator_id) {
        return cache.get_or_compute(*profiles.at(creator_id), creator_encoder, res.vocab, prepared.included);
    };

    out.tweets.reserve(corpus.tweets().size());
    for (const auto& t : corpus.tweets()) {
        Embedding v;
        switch (model.kind) {
        case FusionKind::Base:
        case FusionKind::LateFusion: v = model.encode_tweet(prepared.tweet.at(t.tweet_id)); break;
        case FusionKind::EarlyFusion: v = model.encode_tweet(prepared.early.at(t.tweet_id)); break;
        case FusionKind::IntermediateFusion:
            v = fuse_intermediate(model.encode_tweet(prepared.tweet.at(t.tweet_id)), creator_embedding(t.creator_id),
                                  *model.fusion);
            break;
        }
        out.tweets.push_back({t.tweet_id, std::move(v)});
    }
    if (model.kind == FusionKind::LateFusion) {
        for (const auto& p : prepared.profiles) out.creators.push_back({p.creator_id, creator_embedding(p.creator_id)});
    }
    return out;
}

std::vector<EmbeddingRecord> embed_articles(const RetrievalModel& model, const PreparedCorpus& prepared,
                                            std::span<const std::string> article_ids) {
    std::vector<EmbeddingRecord> out;
    out.reserve(article_ids.size());
    for (const auto& id : article_ids) {
        auto it = prepared.news.find(id);
        if (it == prepared.news.end()) throw InvalidInput("embed_articles: unknown article " + id);
        out.push_back({id, model.encode_news(it->second)});
    }
    return out;
}

RetrievalIndexes build_indexes(const CandidateEmbeddings& embeddings,
                               const std::unordered_map<std::string, std::string>& tweet_to_creator) {
    RetrievalIndexes idx{build_dense_index(embeddings.tweets), std::nullopt, tweet_to_creator};
    if (!embeddings.creators.empty()) idx.creators = build_dense_index(embeddings.creators);
    return idx;
}

std::vector<std::size_t> windowed_positions(const DenseIndex& tweet_index, const Corpus& corpus,
                                            const Article& article, int window_days) {
    std::vector<std::size_t> positions;
    for (const auto& id : build_candidate_pool(corpus.tweets(), article.published_at, window_days)) {
        if (auto pos = tweet_index.position(id)) positions.push_back(*pos);
    }
    return positions;
}

RankedList retrieve(const RetrievalModel& model, const RetrievalIndexes& indexes, const EmbeddingRecord& news,
                    std::size_t k, std::optional<std::span<const std::size_t>> subset) {
    if (model.kind != FusionKind::LateFusion) return search_top_k(indexes.tweets, news.vector, k, news.id, subset);
    if (!indexes.creators) throw InvalidInput("late fusion retrieval needs a creator index");
    LateFusionConfig cfg = model.late;
    cfg.final_k = k;
    if (cfg.stage_depth < k) cfg.stage_depth = k;
    return late_fusion_retrieve(news.vector, indexes.tweets, *indexes.creators, indexes.tweet_to_creator, cfg,
                                news.id, subset);
}

std::vector<std::string> query_ids(std::span<const TrainingPair> pairs) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& p : pairs)
        if (seen.insert(p.article_id).second) out.push_back(p.article_id);
    return out;
}

} // namespace tweetrec
