#include "tweetrec/bm25.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace tweetrec {

namespace {

bool is_ascii_punct(char c) {
    return static_cast<unsigned char>(c) < 0x80 && std::ispunct(static_cast<unsigned char>(c)) != 0;
}

double idf(std::size_t num_docs, std::size_t df) {
    const double n = static_cast<double>(num_docs);
    const double f = static_cast<double>(df);
    return std::log((n - f + 0.5) / (f + 0.5) + 1.0);
}

double term_weight(const Bm25Params& p, double idf_value, double tf, double dl, double avgdl) {
    return idf_value * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * dl / avgdl));
}

} // namespace

std::vector<std::string> analyze_terms(std::string_view text, const UnigramDictionary& dict) {
    const std::string expanded = expand_compound_tokens(text, dict);
    std::vector<std::string> terms;
    std::size_t i = 0;
    while (i < expanded.size()) {
        while (i < expanded.size() && std::isspace(static_cast<unsigned char>(expanded[i]))) ++i;
        std::size_t j = i;
        while (j < expanded.size() && !std::isspace(static_cast<unsigned char>(expanded[j]))) ++j;
        std::size_t lo = i, hi = j;
        while (lo < hi && is_ascii_punct(expanded[lo])) ++lo;
        while (hi > lo && is_ascii_punct(expanded[hi - 1])) --hi;
        if (lo < hi) {
            std::string term = expanded.substr(lo, hi - lo);
            for (char& c : term)
                if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            terms.push_back(std::move(term));
        }
        i = j;
    }
    return terms;
}

const std::vector<Posting>* LexicalIndex::postings(std::string_view term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? nullptr : &it->second;
}

std::size_t LexicalIndex::doc_frequency(std::string_view term) const {
    const auto* p = postings(term);
    return p ? p->size() : 0;
}

std::optional<std::size_t> LexicalIndex::doc_position(std::string_view tweet_id) const {
    auto it = positions_.find(std::string(tweet_id));
    if (it == positions_.end()) return std::nullopt;
    return it->second;
}

void LexicalIndex::add_documents(std::span<const Tweet> tweets) {
    struct NewDoc {
        std::string id;
        std::map<std::string, std::uint32_t> tf;
        std::uint32_t length = 0;
    };
    std::vector<NewDoc> docs;
    for (const auto& t : tweets) {
        if (positions_.contains(t.tweet_id)) throw InvalidInput("lexical index: duplicate tweet id " + t.tweet_id);
        NewDoc d{t.tweet_id, {}, 0};
        for (auto& term : analyze_terms(t.text, *dict_)) {
            ++d.tf[term];
            ++d.length;
        }
        positions_.emplace(t.tweet_id, 0);
        docs.push_back(std::move(d));
    }

    // Merge old and new documents into one id-sorted numbering.
    std::vector<std::string> ids = doc_ids_;
    for (const auto& d : docs) ids.push_back(d.id);
    std::vector<std::uint32_t> order(ids.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return ids[a] < ids[b]; });
    std::vector<std::uint32_t> new_pos(ids.size());
    for (std::uint32_t p = 0; p < order.size(); ++p) new_pos[order[p]] = p;

    std::vector<std::uint32_t> lengths(ids.size());
    const std::size_t old_n = doc_ids_.size();
    for (std::size_t i = 0; i < old_n; ++i) lengths[new_pos[i]] = doc_lengths_[i];
    for (std::size_t i = 0; i < docs.size(); ++i) lengths[new_pos[old_n + i]] = docs[i].length;

    for (auto& [term, plist] : postings_)
        for (auto& p : plist) p.doc = new_pos[p.doc];
    for (std::size_t i = 0; i < docs.size(); ++i)
        for (const auto& [term, tf] : docs[i].tf)
            postings_[term].push_back({new_pos[old_n + i], tf});
    for (auto& [term, plist] : postings_)
        std::sort(plist.begin(), plist.end(), [](const Posting& a, const Posting& b) { return a.doc < b.doc; });

    doc_ids_.assign(ids.size(), {});
    for (std::size_t i = 0; i < ids.size(); ++i) doc_ids_[new_pos[i]] = std::move(ids[i]);
    doc_lengths_ = std::move(lengths);
    positions_.clear();
    for (std::size_t p = 0; p < doc_ids_.size(); ++p) positions_.emplace(doc_ids_[p], p);

    const double total = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), 0.0);
    avgdl_ = doc_ids_.empty() ? 0.0 : total / static_cast<double>(doc_ids_.size());
}

LexicalIndex LexicalIndex::extended(std::span<const Tweet> tweets) const {
    LexicalIndex copy = *this;
    copy.add_documents(tweets);
    return copy;
}

LexicalIndex build_lexical_index(std::span<const Tweet> tweets, std::shared_ptr<const UnigramDictionary> dict) {
    if (tweets.empty()) throw InvalidInput("build_lexical_index: no tweets");
    if (!dict) throw InvalidInput("build_lexical_index: missing dictionary");
    LexicalIndex index;
    index.dict_ = std::move(dict);
    index.add_documents(tweets);
    return index;
}

double bm25_score(const LexicalIndex& index, const Bm25Params& params,
                  std::span<const std::string> query_terms, std::string_view tweet_id) {
    params.validate();
    const auto pos = index.doc_position(tweet_id);
    if (!pos) throw InvalidInput("bm25_score: unknown tweet id " + std::string(tweet_id));
    const double dl = index.doc_lengths()[*pos];
    double score = 0.0;
    for (const auto& term : query_terms) {
        const auto* plist = index.postings(term);
        if (!plist) continue;
        auto it = std::lower_bound(plist->begin(), plist->end(), *pos,
                                   [](const Posting& p, std::size_t doc) { return p.doc < doc; });
        if (it == plist->end() || it->doc != *pos) continue;
        score += term_weight(params, idf(index.num_docs(), plist->size()), it->tf, dl, index.avgdl());
    }
    return score;
}

RankedList lexical_search(const LexicalIndex& index, const Bm25Params& params, const Article& article,
                          std::size_t k, std::optional<std::span<const std::size_t>> subset) {
    params.validate();
    const auto terms = analyze_terms(article.title, index.dictionary());
    std::vector<double> acc(index.num_docs(), 0.0);
    for (const auto& term : terms) {
        const auto* plist = index.postings(term);
        if (!plist) continue;
        const double w = idf(index.num_docs(), plist->size());
        for (const auto& p : *plist)
            acc[p.doc] += term_weight(params, w, p.tf, index.doc_lengths()[p.doc], index.avgdl());
    }
    std::vector<char> allowed;
    if (subset) {
        allowed.assign(index.num_docs(), 0);
        for (std::size_t pos : *subset) {
            if (pos >= allowed.size()) throw InvalidInput("candidate position outside lexical index");
            allowed[pos] = 1;
        }
    }
    std::vector<std::size_t> hits;
    for (std::size_t d = 0; d < acc.size(); ++d)
        if (acc[d] > 0.0 && (!subset || allowed[d])) hits.push_back(d);
    const auto& ids = index.doc_ids();
    auto better = [&](std::size_t a, std::size_t b) {
        if (acc[a] != acc[b]) return acc[a] > acc[b];
        return ids[a] < ids[b];
    };
    const std::size_t keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), better);
    RankedList list{article.article_id, {}, k};
    for (std::size_t i = 0; i < keep; ++i) list.items.push_back({ids[hits[i]], acc[hits[i]]});
    return list;
}

} // namespace tweetrec
