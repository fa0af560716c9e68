#include "tweetrec/io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tweetrec {

using nlohmann::json;

namespace {

json parse_line(std::string_view line, std::size_t line_no) {
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw InvalidInput("line " + std::to_string(line_no) + ": " + e.what());
    }
}

template <typename T>
T field(const json& j, const char* key, std::size_t line_no) {
    auto it = j.find(key);
    if (it == j.end())
        throw InvalidInput("line " + std::to_string(line_no) + ": missing field '" + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw InvalidInput("line " + std::to_string(line_no) + ": bad type for '" + key + "'");
    }
}

std::optional<std::string> optional_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

void put_optional(json& j, const char* key, const std::optional<std::string>& v) {
    if (v) j[key] = *v;
}

std::string dump_line(const json& j) { return j.dump() + "\n"; }

} // namespace

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<Article> parse_articles_jsonl(std::string_view text) {
    std::vector<Article> out;
    for_each_line(text, [&](std::string_view line, std::size_t n) {
        const json j = parse_line(line, n);
        Article a;
        a.article_id = field<std::string>(j, "article_id", n);
        a.title = j.value("title", "");
        a.body = j.value("body", "");
        a.published_at = field<Timestamp>(j, "published_at", n);
        if (auto it = j.find("embedded_tweet_ids"); it != j.end())
            a.embedded_tweet_ids = it->get<std::vector<std::string>>();
        a.raw_html = j.value("raw_html", "");
        validate(a);
        out.push_back(std::move(a));
    });
    return out;
}

std::vector<Tweet> parse_tweets_jsonl(std::string_view text) {
    std::vector<Tweet> out;
    for_each_line(text, [&](std::string_view line, std::size_t n) {
        const json j = parse_line(line, n);
        Tweet t;
        t.tweet_id = field<std::string>(j, "tweet_id", n);
        t.text = field<std::string>(j, "text", n);
        t.created_at = field<Timestamp>(j, "created_at", n);
        t.creator_id = field<std::string>(j, "creator_id", n);
        validate(t);
        out.push_back(std::move(t));
    });
    return out;
}

std::vector<CreatorProfile> parse_creators_jsonl(std::string_view text) {
    std::vector<CreatorProfile> out;
    for_each_line(text, [&](std::string_view line, std::size_t n) {
        const json j = parse_line(line, n);
        CreatorProfile p;
        p.creator_id = field<std::string>(j, "creator_id", n);
        p.screen_handle = optional_string(j, "screen_handle");
        p.display_name = optional_string(j, "display_name");
        p.bio = optional_string(j, "bio");
        p.website = optional_string(j, "website");
        p.location = optional_string(j, "location");
        p.snapshot_at = j.value("snapshot_at", Timestamp{0});
        validate(p);
        out.push_back(std::move(p));
    });
    return out;
}

std::string articles_to_jsonl(std::span<const Article> articles) {
    std::string out;
    for (const auto& a : articles) {
        json j = {{"article_id", a.article_id},
                  {"title", a.title},
                  {"body", a.body},
                  {"published_at", a.published_at},
                  {"embedded_tweet_ids", a.embedded_tweet_ids}};
        if (!a.raw_html.empty()) j["raw_html"] = a.raw_html;
        out += dump_line(j);
    }
    return out;
}

std::string tweets_to_jsonl(std::span<const Tweet> tweets) {
    std::string out;
    for (const auto& t : tweets) {
        out += dump_line({{"tweet_id", t.tweet_id},
                          {"text", t.text},
                          {"created_at", t.created_at},
                          {"creator_id", t.creator_id}});
    }
    return out;
}

std::string creators_to_jsonl(std::span<const CreatorProfile> creators) {
    std::string out;
    for (const auto& p : creators) {
        json j = {{"creator_id", p.creator_id}, {"snapshot_at", p.snapshot_at}};
        put_optional(j, "screen_handle", p.screen_handle);
        put_optional(j, "display_name", p.display_name);
        put_optional(j, "bio", p.bio);
        put_optional(j, "website", p.website);
        put_optional(j, "location", p.location);
        out += dump_line(j);
    }
    return out;
}

std::string pairs_to_jsonl(std::span<const TrainingPair> pairs) {
    std::string out;
    for (const auto& p : pairs)
        out += dump_line({{"article_id", p.article_id}, {"tweet_id", p.tweet_id}});
    return out;
}

std::vector<TrainingPair> parse_pairs_jsonl(std::string_view text) {
    std::vector<TrainingPair> out;
    for_each_line(text, [&](std::string_view line, std::size_t n) {
        const json j = parse_line(line, n);
        out.push_back({field<std::string>(j, "article_id", n), field<std::string>(j, "tweet_id", n)});
    });
    return out;
}

std::string split_manifest_to_jsonl(const DatasetSplit& split) {
    std::string out;
    auto emit = [&](const char* name, const std::vector<TrainingPair>& pairs) {
        for (const auto& p : pairs)
            out += dump_line(
                {{"split", name}, {"article_id", p.article_id}, {"tweet_id", p.tweet_id}});
    };
    emit("train", split.train);
    emit("dev", split.dev);
    emit("test", split.test);
    return out;
}

DatasetSplit parse_split_manifest(std::string_view text) {
    DatasetSplit split;
    for_each_line(text, [&](std::string_view line, std::size_t n) {
        const json j = parse_line(line, n);
        const auto name = field<std::string>(j, "split", n);
        TrainingPair p{field<std::string>(j, "article_id", n), field<std::string>(j, "tweet_id", n)};
        if (name == "train") split.train.push_back(std::move(p));
        else if (name == "dev") split.dev.push_back(std::move(p));
        else if (name == "test") split.test.push_back(std::move(p));
        else throw InvalidInput("line " + std::to_string(n) + ": unknown split '" + name + "'");
    });
    return split;
}

std::string qrels_to_tsv(const Qrels& qrels) {
    std::string out;
    for (const auto& [article, tweets] : qrels)
        for (const auto& t : tweets) out += article + "\t" + t + "\n";
    return out;
}

Qrels parse_qrels_tsv(std::string_view text) {
    Qrels qrels;
    for_each_line(text, [&](std::string_view line, std::size_t n) {
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos || tab == 0 || tab + 1 >= line.size())
            throw InvalidInput("qrels line " + std::to_string(n) + ": expected article_id<TAB>tweet_id");
        qrels[std::string(line.substr(0, tab))].insert(std::string(line.substr(tab + 1)));
    });
    return qrels;
}

Qrels qrels_from_pairs(std::span<const TrainingPair> pairs) {
    Qrels qrels;
    for (const auto& p : pairs) qrels[p.article_id].insert(p.tweet_id);
    return qrels;
}

std::string embeddings_to_jsonl(std::span<const EmbeddingRecord> records) {
    std::string out;
    for (const auto& r : records) {
        std::vector<double> v(r.vector.data(), r.vector.data() + r.vector.size());
        out += dump_line({{"id", r.id}, {"vector", v}});
    }
    return out;
}

std::vector<EmbeddingRecord> parse_embeddings_jsonl(std::string_view text) {
    std::vector<EmbeddingRecord> out;
    for_each_line(text, [&](std::string_view line, std::size_t n) {
        const json j = parse_line(line, n);
        const auto v = field<std::vector<double>>(j, "vector", n);
        EmbeddingRecord r{field<std::string>(j, "id", n), Eigen::VectorXd(static_cast<Eigen::Index>(v.size()))};
        for (std::size_t i = 0; i < v.size(); ++i) r.vector[static_cast<Eigen::Index>(i)] = v[i];
        out.push_back(std::move(r));
    });
    return out;
}

} // namespace tweetrec
