#include "tweetrec/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <unordered_set>

#include <json.hpp>

#include "tweetrec/experiment.hpp"
#include "tweetrec/io.hpp"
#include "tweetrec/model.hpp"
#include "tweetrec/retrieval.hpp"

namespace tweetrec {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view stage_name(Stage s) {
    static constexpr std::array<std::string_view, 7> names = {"ingest", "preprocess", "train",   "embed",
                                                              "index",  "retrieve",   "evaluate"};
    return names[static_cast<std::size_t>(s)];
}

Stage parse_stage(std::string_view name) {
    for (Stage s : kAllStages)
        if (stage_name(s) == name) return s;
    throw ConfigError("unknown stage '" + std::string(name) +
                      "' (expected ingest, preprocess, train, embed, index, retrieve or evaluate)");
}

std::vector<Stage> parse_stage_list(std::string_view list) {
    std::vector<bool> wanted(kAllStages.size(), false);
    std::size_t start = 0;
    while (start <= list.size()) {
        std::size_t end = list.find(',', start);
        if (end == std::string_view::npos) end = list.size();
        std::string_view item = list.substr(start, end - start);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        if (item == "all") {
            std::fill(wanted.begin(), wanted.end(), true);
        } else if (!item.empty()) {
            wanted[static_cast<std::size_t>(parse_stage(item))] = true;
        }
        start = end + 1;
    }
    std::vector<Stage> out;
    for (Stage s : kAllStages)
        if (wanted[static_cast<std::size_t>(s)]) out.push_back(s);
    if (out.empty()) throw ConfigError("empty stage list");
    return out;
}

MissingArtifact::MissingArtifact(Stage stage, std::filesystem::path path)
    : std::runtime_error(std::string(stage_name(stage)) + ": missing upstream artifact " + path.string()),
      stage_(stage),
      path_(std::move(path)) {}

// ---------------------------------------------------------------------------
// Configuration

namespace {

/// Walks one JSON object, type-checking fields and rejecting unknown keys.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
    }

    const json* find(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void read(const char* key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) fail(key, "a number");
            out = v->get<double>();
        }
    }

    template <typename Unsigned>
        requires std::is_unsigned_v<Unsigned>
    void read(const char* key, Unsigned& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) fail(key, "a non-negative integer");
            out = v->get<Unsigned>();
        }
    }

    void read(const char* key, int& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) fail(key, "an integer");
            out = v->get<int>();
        }
    }

    void read(const char* key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) fail(key, "a boolean");
            out = v->get<bool>();
        }
    }

    void read(const char* key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) fail(key, "a string");
            out = v->get<std::string>();
        }
    }

    std::string path(const char* key) const { return where_ + "." + key; }

    [[noreturn]] void fail(const char* key, const char* expected) const {
        throw ConfigError(path(key) + " must be " + expected);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.contains(key)) throw ConfigError("unknown config key " + where_ + "." + key);
    }

private:
    const json& j_;
    std::string where_;
    std::unordered_set<std::string> seen_;
};

template <typename Fn>
auto as_config_error(const std::string& where, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

void check_input_file(const fs::path& p, const char* name) {
    if (p.empty()) throw ConfigError(std::string("paths.") + name + " is required");
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) throw ConfigError(std::string("paths.") + name + ": no such file " + p.string());
}

} // namespace

void PipelineConfig::validate() const {
    check_input_file(paths.articles, "articles");
    check_input_file(paths.tweets, "tweets");
    check_input_file(paths.creators, "creators");
    check_input_file(paths.vocab, "vocab");
    check_input_file(paths.dictionary, "dictionary");
    if (paths.output_dir.empty()) throw ConfigError("paths.output_dir is required");
    {
        std::error_code ec;
        fs::path probe = fs::absolute(paths.output_dir, ec);
        if (fs::exists(probe, ec) && !fs::is_directory(probe, ec))
            throw ConfigError("paths.output_dir is not a directory: " + paths.output_dir.string());
        while (!probe.empty() && !fs::exists(probe, ec)) {
            if (probe == probe.parent_path()) break;
            probe = probe.parent_path();
        }
        if (!fs::is_directory(probe, ec))
            throw ConfigError("paths.output_dir cannot be created under " + probe.string());
    }
    if (dim < 2) throw ConfigError("model.dim must be >= 2");
    as_config_error("training", [&] { training.validate(); });
    if (late_alpha && !(*late_alpha >= 0.0 && *late_alpha <= 1.0))
        throw ConfigError("late_fusion.alpha must lie in [0, 1]");
    if (late_stage_depth < top_k) throw ConfigError("late_fusion.stage_depth must be >= candidates.top_k");
    if (alpha_grid.empty()) throw ConfigError("late_fusion.alpha_grid must not be empty");
    for (double a : alpha_grid)
        if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("late_fusion.alpha_grid values must lie in [0, 1]");
    as_config_error("bm25", [&] { bm25.validate(); });
    if (split_ratios.train == 0 || split_ratios.dev == 0 || split_ratios.test == 0)
        throw ConfigError("split.ratios must be positive");
    if (window_days < 1) throw ConfigError("candidates.window_days must be >= 1");
    if (top_k == 0) throw ConfigError("candidates.top_k must be > 0");
    if (ablation.eval_batch_size == 0) throw ConfigError("ablation.eval_batch_size must be > 0");
}

PipelineConfig parse_pipeline_config(std::string_view json_text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    PipelineConfig cfg;
    ObjectReader top(root, "config");

    if (const json* p = top.find("paths")) {
        ObjectReader r(*p, "paths");
        auto read_path = [&](const char* key, fs::path& out) {
            std::string s;
            r.read(key, s);
            if (s.empty()) return;
            out = fs::path(s);
            if (out.is_relative() && !base_dir.empty()) out = (base_dir / out).lexically_normal();
        };
        read_path("articles", cfg.paths.articles);
        read_path("tweets", cfg.paths.tweets);
        read_path("creators", cfg.paths.creators);
        read_path("vocab", cfg.paths.vocab);
        read_path("dictionary", cfg.paths.dictionary);
        read_path("output_dir", cfg.paths.output_dir);
        r.finish();
    }
    top.read("seed", cfg.seed);

    if (const json* p = top.find("model")) {
        ObjectReader r(*p, "model");
        std::string kind(fusion_kind_name(cfg.kind));
        r.read("kind", kind);
        cfg.kind = as_config_error("model.kind", [&] { return parse_fusion_kind(kind); });
        std::size_t dim = static_cast<std::size_t>(cfg.dim);
        r.read("dim", dim);
        cfg.dim = static_cast<Eigen::Index>(dim);
        r.finish();
    }

    if (const json* p = top.find("training")) {
        ObjectReader r(*p, "training");
        r.read("batch_size", cfg.training.batch_size);
        r.read("learning_rate", cfg.training.learning_rate);
        if (const json* v = r.find("embedding_learning_rate"); v && !v->is_null()) {
            if (!v->is_number()) r.fail("embedding_learning_rate", "a number or null");
            cfg.training.embedding_learning_rate = v->get<double>();
        }
        r.read("steps", cfg.training.steps);
        r.read("scale", cfg.training.scale);
        r.read("freeze_news", cfg.training.freeze_news);
        r.finish();
    }

    if (const json* p = top.find("late_fusion")) {
        ObjectReader r(*p, "late_fusion");
        if (const json* v = r.find("alpha")) {
            if (v->is_number()) {
                cfg.late_alpha = v->get<double>();
            } else if (!(v->is_string() && v->get<std::string>() == "tune")) {
                r.fail("alpha", "a number or \"tune\"");
            }
        }
        r.read("stage_depth", cfg.late_stage_depth);
        if (const json* v = r.find("alpha_grid")) {
            if (!v->is_array()) r.fail("alpha_grid", "an array of numbers");
            cfg.alpha_grid.clear();
            for (const auto& a : *v) {
                if (!a.is_number()) r.fail("alpha_grid", "an array of numbers");
                cfg.alpha_grid.push_back(a.get<double>());
            }
        }
        r.finish();
    }

    if (const json* p = top.find("bm25")) {
        ObjectReader r(*p, "bm25");
        r.read("enabled", cfg.bm25_enabled);
        r.read("k1", cfg.bm25.k1);
        r.read("b", cfg.bm25.b);
        r.finish();
    }

    if (const json* p = top.find("split")) {
        ObjectReader r(*p, "split");
        std::string unit(split_unit_name(cfg.split_unit));
        r.read("unit", unit);
        cfg.split_unit = as_config_error("split.unit", [&] { return parse_split_unit(unit); });
        if (const json* v = r.find("ratios")) {
            if (!v->is_array() || v->size() != 3) r.fail("ratios", "an array of three positive integers");
            for (const auto& x : *v)
                if (!x.is_number_unsigned()) r.fail("ratios", "an array of three positive integers");
            cfg.split_ratios = {(*v)[0].get<std::uint32_t>(), (*v)[1].get<std::uint32_t>(),
                                (*v)[2].get<std::uint32_t>()};
        }
        r.finish();
    }

    if (const json* p = top.find("candidates")) {
        ObjectReader r(*p, "candidates");
        r.read("window", cfg.candidate_window);
        r.read("window_days", cfg.window_days);
        r.read("top_k", cfg.top_k);
        r.finish();
    }

    if (const json* v = top.find("creator_attributes")) {
        if (!v->is_array()) top.fail("creator_attributes", "an array of attribute names");
        cfg.creator_attributes.clear();
        for (const auto& a : *v) {
            if (!a.is_string()) top.fail("creator_attributes", "an array of attribute names");
            cfg.creator_attributes.insert(
                as_config_error("creator_attributes", [&] { return parse_attribute(a.get<std::string>()); }));
        }
    }

    if (const json* p = top.find("ablation")) {
        ObjectReader r(*p, "ablation");
        std::string kind(fusion_kind_name(cfg.ablation.kind));
        r.read("kind", kind);
        cfg.ablation.kind = as_config_error("ablation.kind", [&] { return parse_fusion_kind(kind); });
        r.read("eval_batch_size", cfg.ablation.eval_batch_size);
        r.finish();
    }

    if (const json* p = top.find("cost")) {
        ObjectReader r(*p, "cost");
        r.read("n", cfg.cost_n);
        r.read("m", cfg.cost_m);
        r.finish();
    }
    top.finish();
    return cfg;
}

namespace {

ordered_json config_to_ordered_json(const PipelineConfig& cfg) {
    ordered_json j;
    j["paths"] = {{"articles", cfg.paths.articles.string()},     {"tweets", cfg.paths.tweets.string()},
                  {"creators", cfg.paths.creators.string()},     {"vocab", cfg.paths.vocab.string()},
                  {"dictionary", cfg.paths.dictionary.string()}, {"output_dir", cfg.paths.output_dir.string()}};
    j["seed"] = cfg.seed;
    j["model"] = {{"kind", fusion_kind_name(cfg.kind)}, {"dim", static_cast<std::size_t>(cfg.dim)}};
    ordered_json elr = nullptr;
    if (cfg.training.embedding_learning_rate) elr = *cfg.training.embedding_learning_rate;
    j["training"] = {{"batch_size", cfg.training.batch_size},
                     {"learning_rate", cfg.training.learning_rate},
                     {"embedding_learning_rate", elr},
                     {"steps", cfg.training.steps},
                     {"scale", cfg.training.scale},
                     {"freeze_news", cfg.training.freeze_news}};
    ordered_json alpha = "tune";
    if (cfg.late_alpha) alpha = *cfg.late_alpha;
    j["late_fusion"] = {{"alpha", alpha}, {"stage_depth", cfg.late_stage_depth}, {"alpha_grid", cfg.alpha_grid}};
    j["bm25"] = {{"enabled", cfg.bm25_enabled}, {"k1", cfg.bm25.k1}, {"b", cfg.bm25.b}};
    j["split"] = {{"unit", split_unit_name(cfg.split_unit)},
                  {"ratios", {cfg.split_ratios.train, cfg.split_ratios.dev, cfg.split_ratios.test}}};
    j["candidates"] = {{"window", cfg.candidate_window}, {"window_days", cfg.window_days}, {"top_k", cfg.top_k}};
    ordered_json attrs = ordered_json::array();
    for (Attribute a : cfg.creator_attributes) attrs.push_back(attribute_name(a));
    j["creator_attributes"] = attrs;
    j["ablation"] = {{"kind", fusion_kind_name(cfg.ablation.kind)}, {"eval_batch_size", cfg.ablation.eval_batch_size}};
    j["cost"] = {{"n", cfg.cost_n}, {"m", cfg.cost_m}};
    return j;
}

} // namespace

std::string pipeline_config_to_json(const PipelineConfig& cfg) { return config_to_ordered_json(cfg).dump(2) + "\n"; }

void apply_env_overrides(PipelineConfig& cfg, const EnvLookup& lookup) {
    const std::pair<const char*, fs::path*> overrides[] = {
        {"TWEETREC_ARTICLES", &cfg.paths.articles},     {"TWEETREC_TWEETS", &cfg.paths.tweets},
        {"TWEETREC_CREATORS", &cfg.paths.creators},     {"TWEETREC_VOCAB", &cfg.paths.vocab},
        {"TWEETREC_DICTIONARY", &cfg.paths.dictionary}, {"TWEETREC_OUTPUT_DIR", &cfg.paths.output_dir},
    };
    for (const auto& [name, target] : overrides) {
        if (auto value = lookup(name); value && !value->empty()) *target = fs::path(*value);
    }
}

void apply_env_overrides(PipelineConfig& cfg) {
    apply_env_overrides(cfg, [](const char* name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name)) return std::string(v);
        return std::nullopt;
    });
}

std::string config_hash(const PipelineConfig& cfg) {
    ordered_json j = config_to_ordered_json(cfg);
    j["paths"].erase("output_dir");
    return to_hex(fnv1a64(j.dump()));
}

std::filesystem::path artifact_path(const PipelineConfig& cfg, std::string_view stage, std::string_view suffix) {
    return cfg.paths.output_dir / (std::string(stage) + "-" + config_hash(cfg) + "." + std::string(suffix));
}

// ---------------------------------------------------------------------------
// Stages

namespace {

struct StageFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Runner {
public:
    Runner(const PipelineConfig& cfg, const PipelineOptions& options) : cfg_(cfg), options_(options) {}

    fs::path artifact(Stage producer, std::string_view suffix) const {
        return artifact_path(cfg_, stage_name(producer), suffix);
    }

    std::vector<fs::path> outputs(Stage s) const {
        std::vector<std::string_view> suffixes;
        switch (s) {
        case Stage::Ingest:
            suffixes = {"articles.jsonl", "tweets.jsonl", "creators.jsonl", "split.jsonl", "qrels-dev.tsv",
                        "qrels-test.tsv", "stats.json"};
            break;
        case Stage::Preprocess: suffixes = {"tokens.jsonl"}; break;
        case Stage::Train: suffixes = {"checkpoint.json", "log.jsonl"}; break;
        case Stage::Embed:
            suffixes = {"news.jsonl", "tweets.jsonl"};
            if (cfg_.kind == FusionKind::LateFusion) suffixes.push_back("creators.jsonl");
            break;
        case Stage::Index: suffixes = {"manifest.json"}; break;
        case Stage::Retrieve:
            if (cfg_.kind == FusionKind::LateFusion && !cfg_.late_alpha) suffixes.push_back("alpha.json");
            suffixes.push_back("test.run");
            if (cfg_.bm25_enabled) suffixes.push_back("bm25.test.run");
            break;
        case Stage::Evaluate: suffixes = {"report.json"}; break;
        }
        std::vector<fs::path> out;
        for (auto suffix : suffixes) out.push_back(artifact(s, suffix));
        return out;
    }

    void run(Stage s) {
        current_ = s;
        switch (s) {
        case Stage::Ingest: ingest(); break;
        case Stage::Preprocess: preprocess(); break;
        case Stage::Train: train_model(); break;
        case Stage::Embed: embed(); break;
        case Stage::Index: index(); break;
        case Stage::Retrieve: retrieve_runs(); break;
        case Stage::Evaluate: evaluate(); break;
        }
    }

    void log(const std::string& message) const {
        if (options_.log) *options_.log << "[" << stage_name(current_) << "] " << message << "\n";
    }

    void set_current(Stage s) { current_ = s; }

    std::string summary;

    // Upstream loading; a missing file raises MissingArtifact for the
    // consuming stage.
    std::string require(Stage producer, std::string_view suffix) const {
        const fs::path p = artifact(producer, suffix);
        if (!fs::exists(p)) throw MissingArtifact(current_, p);
        return read_file(p);
    }

    const Corpus& corpus() {
        if (!corpus_) {
            corpus_.emplace(parse_articles_jsonl(require(Stage::Ingest, "articles.jsonl")),
                            parse_tweets_jsonl(require(Stage::Ingest, "tweets.jsonl")),
                            parse_creators_jsonl(require(Stage::Ingest, "creators.jsonl")));
        }
        return *corpus_;
    }

    const DatasetSplit& split() {
        if (!split_) split_ = parse_split_manifest(require(Stage::Ingest, "split.jsonl"));
        return *split_;
    }

    const TextResources& resources() {
        if (!resources_) {
            resources_ = TextResources{
                Vocabulary::from_lines(read_file(cfg_.paths.vocab)),
                std::make_shared<UnigramDictionary>(UnigramDictionary::from_tsv(read_file(cfg_.paths.dictionary)))};
        }
        return *resources_;
    }

    const PreparedCorpus& prepared() {
        if (!prepared_) {
            const std::string text = require(Stage::Preprocess, "tokens.jsonl");
            prepared_ = parse_prepared_corpus(text, corpus(), cfg_.creator_attributes);
        }
        return *prepared_;
    }

    const RetrievalModel& model() {
        if (!model_) model_ = checkpoint_from_json(require(Stage::Train, "checkpoint.json"));
        if (model_->kind != cfg_.kind) throw StageFailure("checkpoint kind does not match model.kind");
        return *model_;
    }

    std::vector<EmbeddingRecord> embeddings(std::string_view suffix) const {
        return parse_embeddings_jsonl(require(Stage::Embed, suffix));
    }

    const RetrievalIndexes& indexes() {
        if (!indexes_) {
            CandidateEmbeddings cand{embeddings("tweets.jsonl"), {}};
            if (cfg_.kind == FusionKind::LateFusion) cand.creators = embeddings("creators.jsonl");
            std::unordered_map<std::string, std::string> tweet_to_creator;
            for (const auto& t : corpus().tweets()) tweet_to_creator.emplace(t.tweet_id, t.creator_id);
            indexes_ = build_indexes(cand, tweet_to_creator);
        }
        return *indexes_;
    }

    const std::unordered_map<std::string, EmbeddingRecord>& news_embeddings() {
        if (!news_) {
            news_.emplace();
            for (auto& r : embeddings("news.jsonl")) {
                std::string id = r.id;
                news_->emplace(std::move(id), std::move(r));
            }
        }
        return *news_;
    }

    std::vector<RankedList> dense_runs(const RetrievalModel& model, std::span<const TrainingPair> pairs) {
        const auto& idx = indexes();
        const auto& news = news_embeddings();
        std::vector<RankedList> runs;
        for (const auto& id : query_ids(pairs)) {
            auto it = news.find(id);
            if (it == news.end()) throw StageFailure("no news embedding for article " + id);
            if (cfg_.candidate_window) {
                const Article* article = corpus().find_article(id);
                if (!article) throw StageFailure("unknown article " + id);
                const auto subset = windowed_positions(idx.tweets, corpus(), *article, cfg_.window_days);
                runs.push_back(retrieve(model, idx, it->second, cfg_.top_k, std::span<const std::size_t>(subset)));
            } else {
                runs.push_back(retrieve(model, idx, it->second, cfg_.top_k));
            }
        }
        return runs;
    }

    GridSearchResult tune_alpha() {
        RetrievalModel late = model();
        if (late.kind != FusionKind::LateFusion) throw ConfigError("alpha tuning needs model.kind = late");
        const auto& dev = split().dev;
        if (dev.empty()) throw StageFailure("dev split is empty; set late_fusion.alpha explicitly");
        const Qrels dev_qrels = qrels_from_pairs(dev);
        return grid_search_late_weight(
            [&](double alpha) {
                late.late.alpha = alpha;
                return compute_metrics(dense_runs(late, dev), dev_qrels);
            },
            cfg_.alpha_grid);
    }

    static std::string curve_json(const GridSearchResult& g) {
        ordered_json curve = ordered_json::array();
        for (const auto& [alpha, mrr] : g.curve) curve.push_back({{"alpha", alpha}, {"dev_mrr", mrr}});
        return ordered_json{{"best_alpha", g.best_alpha}, {"best_dev_mrr", g.best_mrr}, {"curve", curve}}.dump(2) +
               "\n";
    }

private:
    void write(Stage s, std::string_view suffix, std::string_view contents) const {
        write_file_atomic(artifact(s, suffix), contents);
    }

    void ingest() {
        IngestStats stats;
        Corpus c = ingest_corpus(parse_articles_jsonl(read_file(cfg_.paths.articles)),
                                 parse_tweets_jsonl(read_file(cfg_.paths.tweets)),
                                 parse_creators_jsonl(read_file(cfg_.paths.creators)), &stats);
        const auto pairs = c.mine_pairs();
        if (pairs.empty()) throw StageFailure("no <article, embedded tweet> pairs after filtering");
        DatasetSplit s = split_dataset(pairs, cfg_.seed, cfg_.split_ratios, cfg_.split_unit);
        write(Stage::Ingest, "articles.jsonl", articles_to_jsonl(c.articles()));
        write(Stage::Ingest, "tweets.jsonl", tweets_to_jsonl(c.tweets()));
        write(Stage::Ingest, "creators.jsonl", creators_to_jsonl(c.creators()));
        write(Stage::Ingest, "split.jsonl", split_manifest_to_jsonl(s));
        write(Stage::Ingest, "qrels-dev.tsv", qrels_to_tsv(qrels_from_pairs(s.dev)));
        write(Stage::Ingest, "qrels-test.tsv", qrels_to_tsv(qrels_from_pairs(s.test)));
        const ordered_json j = {{"articles_in", stats.articles_in},
                                {"filtered_out", stats.filtered_out},
                                {"degenerate", stats.degenerate},
                                {"articles_kept", stats.articles_kept},
                                {"tweets", c.tweets().size()},
                                {"creators", c.creators().size()},
                                {"pairs", pairs.size()},
                                {"train_pairs", s.train.size()},
                                {"dev_pairs", s.dev.size()},
                                {"test_pairs", s.test.size()}};
        write(Stage::Ingest, "stats.json", j.dump(2) + "\n");
        log(std::to_string(stats.articles_kept) + " of " + std::to_string(stats.articles_in) + " articles kept, " +
            std::to_string(pairs.size()) + " pairs (" + std::to_string(s.train.size()) + "/" +
            std::to_string(s.dev.size()) + "/" + std::to_string(s.test.size()) + ")");
        corpus_.emplace(std::move(c));
        split_ = std::move(s);
    }

    void preprocess() {
        prepared_ = prepare_corpus(corpus(), resources(), cfg_.creator_attributes);
        write(Stage::Preprocess, "tokens.jsonl", prepared_corpus_to_jsonl(corpus(), *prepared_));
        log("tokenized " + std::to_string(corpus().articles().size()) + " articles and " +
            std::to_string(corpus().tweets().size()) + " tweets");
    }

    void train_model() {
        const auto& res = resources();
        const auto examples = make_examples(prepared(), split().train);
        if (examples.empty()) throw StageFailure("training split is empty");
        EncoderConfig ec{static_cast<TokenId>(res.vocab.size()), cfg_.dim, cfg_.seed};
        RetrievalModel m = RetrievalModel::initialize(cfg_.kind, ec, res.vocab.blank_id());
        m.late.alpha = cfg_.late_alpha.value_or(m.late.alpha);
        m.late.stage_depth = cfg_.late_stage_depth;
        m.late.final_k = cfg_.top_k;
        TrainConfig tc = cfg_.training;
        tc.seed = cfg_.seed;
        if (tc.batch_size > examples.size()) tc.batch_size = examples.size();
        const auto log_entries = tweetrec::train(m, examples, tc);
        write(Stage::Train, "log.jsonl", train_log_to_jsonl(log_entries));
        write(Stage::Train, "checkpoint.json", checkpoint_to_json(m));
        if (!log_entries.empty())
            log(std::string(fusion_kind_name(m.kind)) + ": " + std::to_string(log_entries.size()) +
                " steps, final batch loss " + format_fixed(log_entries.back().loss, 4));
        model_ = std::move(m);
    }

    void embed() {
        const auto& m = model();
        CreatorEmbeddingCache cache;
        const auto cand = embed_candidates(m, corpus(), prepared(), resources(), cache);
        std::vector<std::string> article_ids;
        for (const auto& a : corpus().articles()) article_ids.push_back(a.article_id);
        write(Stage::Embed, "news.jsonl", embeddings_to_jsonl(embed_articles(m, prepared(), article_ids)));
        write(Stage::Embed, "tweets.jsonl", embeddings_to_jsonl(cand.tweets));
        if (m.kind == FusionKind::LateFusion) write(Stage::Embed, "creators.jsonl", embeddings_to_jsonl(cand.creators));
        log(std::to_string(cand.tweets.size()) + " tweet vectors, " + std::to_string(cache.size()) +
            " creator encodings (" + std::to_string(cache.hits()) + " cache hits)");
    }

    void index() {
        const auto& idx = indexes();
        ordered_json j = {{"tweets", idx.tweets.size()}, {"dim", static_cast<std::size_t>(idx.tweets.dim())}};
        j["creators"] = idx.creators ? ordered_json(idx.creators->size()) : ordered_json(nullptr);
        if (cfg_.bm25_enabled) {
            const auto& lex = lexical();
            j["lexical"] = {{"documents", lex.num_docs()}, {"avgdl", lex.avgdl()}};
        }
        write(Stage::Index, "manifest.json", j.dump(2) + "\n");
        log(std::to_string(idx.tweets.size()) + " tweets indexed");
    }

    const LexicalIndex& lexical() {
        if (!lexical_) lexical_ = build_lexical_index(corpus().tweets(), resources().dict);
        return *lexical_;
    }

    void retrieve_runs() {
        require(Stage::Index, "manifest.json");
        RetrievalModel m = model();
        if (m.kind == FusionKind::LateFusion) {
            if (cfg_.late_alpha) {
                m.late.alpha = *cfg_.late_alpha;
            } else {
                const GridSearchResult g = tune_alpha();
                m.late.alpha = g.best_alpha;
                write(Stage::Retrieve, "alpha.json", curve_json(g));
                log("tuned alpha " + format_fixed(g.best_alpha, 2) + " (dev MRR " + format_fixed(g.best_mrr, 4) + ")");
            }
        }
        const auto& test = split().test;
        if (test.empty()) throw StageFailure("test split is empty");
        const auto runs = dense_runs(m, test);
        write(Stage::Retrieve, "test.run", emit_run_file(runs, fusion_kind_name(m.kind)));
        if (cfg_.bm25_enabled) {
            const auto& lex = lexical();
            std::vector<RankedList> bm25_runs;
            for (const auto& id : query_ids(test)) {
                const Article* article = corpus().find_article(id);
                if (!article) throw StageFailure("unknown article " + id);
                if (cfg_.candidate_window) {
                    std::vector<std::size_t> subset;
                    for (const auto& t :
                         build_candidate_pool(corpus().tweets(), article->published_at, cfg_.window_days))
                        if (auto pos = lex.doc_position(t)) subset.push_back(*pos);
                    bm25_runs.push_back(lexical_search(lex, cfg_.bm25, *article, cfg_.top_k,
                                                       std::span<const std::size_t>(subset)));
                } else {
                    bm25_runs.push_back(lexical_search(lex, cfg_.bm25, *article, cfg_.top_k));
                }
            }
            write(Stage::Retrieve, "bm25.test.run", emit_run_file(bm25_runs, "bm25"));
        }
        log(std::to_string(runs.size()) + " test queries retrieved");
    }

    /// One list per qrels query in qrels order; queries absent from the run
    /// file retrieved nothing.
    static std::vector<RankedList> aligned_runs(std::string_view run_text, const Qrels& qrels) {
        std::map<std::string, RankedList> by_query;
        for (auto& r : parse_run_file(run_text)) {
            if (!qrels.contains(r.query_id)) throw StageFailure("run query " + r.query_id + " is not in the qrels");
            std::string id = r.query_id;
            by_query.emplace(std::move(id), std::move(r));
        }
        std::vector<RankedList> out;
        for (const auto& [query, relevant] : qrels) {
            auto it = by_query.find(query);
            out.push_back(it != by_query.end() ? std::move(it->second) : RankedList{query, {}, 0});
        }
        return out;
    }

    void evaluate() {
        const Qrels qrels = parse_qrels_tsv(require(Stage::Ingest, "qrels-test.tsv"));
        const auto dense = aligned_runs(require(Stage::Retrieve, "test.run"), qrels);
        const MetricReport dense_report = compute_metrics(dense, qrels);
        ordered_json j = {{"config_hash", config_hash(cfg_)},
                          {"kind", fusion_kind_name(cfg_.kind)},
                          {"queries", qrels.size()},
                          {"dense", ordered_json::parse(metric_report_to_json(dense_report))}};
        summary = format_report_line(fusion_kind_name(cfg_.kind), dense_report);
        if (cfg_.bm25_enabled) {
            const auto bm25 = aligned_runs(require(Stage::Retrieve, "bm25.test.run"), qrels);
            const RunComparison cmp = compare_runs(dense, bm25, qrels, Metric::MRR);
            j["bm25"] = ordered_json::parse(metric_report_to_json(cmp.b));
            ordered_json deltas;
            for (Metric m : kAllMetrics) deltas[std::string(metric_name(m))] = cmp.deltas[static_cast<std::size_t>(m)];
            j["dense_vs_bm25"] = {{"metric", metric_name(cmp.metric)},
                                  {"deltas", deltas},
                                  {"t", cmp.test.t_statistic},
                                  {"df", cmp.test.degrees_of_freedom},
                                  {"p", cmp.test.p_value},
                                  {"significant", cmp.test.significant}};
            summary += format_report_line("bm25", cmp.b);
        }
        write(Stage::Evaluate, "report.json", j.dump(2) + "\n");
        log("report written");
    }

    static std::string format_report_line(std::string_view label, const MetricReport& r) {
        std::string line(label);
        line.resize(std::max<std::size_t>(line.size(), 13), ' ');
        for (Metric m : kAllMetrics) line += " " + std::string(metric_name(m)) + " " + format_fixed(r.mean(m), 4);
        return line + "\n";
    }

    const PipelineConfig& cfg_;
    const PipelineOptions& options_;
    Stage current_ = Stage::Ingest;
    std::optional<Corpus> corpus_;
    std::optional<DatasetSplit> split_;
    std::optional<TextResources> resources_;
    std::optional<PreparedCorpus> prepared_;
    std::optional<RetrievalModel> model_;
    std::optional<RetrievalIndexes> indexes_;
    std::optional<std::unordered_map<std::string, EmbeddingRecord>> news_;
    std::optional<LexicalIndex> lexical_;
};

bool all_exist(const std::vector<fs::path>& paths) {
    return std::all_of(paths.begin(), paths.end(), [](const fs::path& p) { return fs::exists(p); });
}

/// Validates, creates the output directory and runs body, mapping failures
/// to exit codes.
template <typename Body>
PipelineResult guarded(const PipelineConfig& cfg, std::string_view label, Body&& body) {
    PipelineResult result;
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        result.exit_code = kExitInvalidConfig;
        result.message = std::string("invalid config: ") + e.what();
        return result;
    }
    std::string stage(label);
    try {
        fs::create_directories(cfg.paths.output_dir);
        body(result, stage);
    } catch (const MissingArtifact& e) {
        result.exit_code = kExitMissingArtifact;
        result.failed_stage = std::string(stage_name(e.stage()));
        result.message = e.what();
    } catch (const ConfigError& e) {
        result.exit_code = kExitInvalidConfig;
        result.failed_stage = stage;
        result.message = stage + ": invalid config: " + e.what();
    } catch (const std::exception& e) {
        result.exit_code = kExitFailure;
        result.failed_stage = stage;
        result.message = stage + ": " + e.what();
    }
    return result;
}

} // namespace

PipelineResult execute_pipeline(const PipelineConfig& cfg, std::span<const Stage> stages,
                                const PipelineOptions& options) {
    return guarded(cfg, "pipeline", [&](PipelineResult& result, std::string& label) {
        Runner runner(cfg, options);
        for (Stage s : kAllStages) {
            if (std::find(stages.begin(), stages.end(), s) == stages.end()) continue;
            label = std::string(stage_name(s));
            runner.set_current(s);
            StageOutcome outcome{label, false, runner.outputs(s)};
            if (!options.force && all_exist(outcome.artifacts)) {
                outcome.skipped = true;
                runner.log("artifacts present, skipped");
            } else {
                runner.run(s);
            }
            result.stages.push_back(std::move(outcome));
        }
        result.summary = runner.summary;
    });
}

PipelineResult run_alpha_tuning(const PipelineConfig& cfg, const PipelineOptions& options) {
    return guarded(cfg, "tune-alpha", [&](PipelineResult& result, std::string&) {
        if (cfg.kind != FusionKind::LateFusion) throw ConfigError("tune-alpha needs model.kind = late");
        Runner runner(cfg, options);
        runner.set_current(Stage::Retrieve);
        const fs::path out = artifact_path(cfg, "tune", "json");
        StageOutcome outcome{"tune-alpha", false, {out}};
        if (!options.force && fs::exists(out)) {
            outcome.skipped = true;
            result.summary = read_file(out);
        } else {
            const GridSearchResult g = runner.tune_alpha();
            write_file_atomic(out, Runner::curve_json(g));
            for (const auto& [alpha, mrr] : g.curve)
                result.summary += "alpha " + format_fixed(alpha, 2) + "  dev MRR " + format_fixed(mrr, 4) + "\n";
            result.summary += "best alpha " + format_fixed(g.best_alpha, 2) + "\n";
        }
        result.stages.push_back(std::move(outcome));
    });
}

PipelineResult run_attribute_ablation(const PipelineConfig& cfg, const PipelineOptions& options) {
    return guarded(cfg, "ablate", [&](PipelineResult& result, std::string&) {
        Runner runner(cfg, options);
        runner.set_current(Stage::Train);
        const fs::path out = artifact_path(cfg, "ablate", "json");
        StageOutcome outcome{"ablate", false, {out}};
        if (!options.force && fs::exists(out)) {
            outcome.skipped = true;
            result.summary = read_file(out);
            result.stages.push_back(std::move(outcome));
            return;
        }
        const Corpus& corpus = runner.corpus();
        const DatasetSplit& split = runner.split();
        const TextResources& res = runner.resources();
        if (split.train.empty() || split.test.empty()) throw StageFailure("ablation needs train and test pairs");
        std::map<AttributeSet, PreparedCorpus> prepared;
        auto prepared_for = [&](const AttributeSet& included) -> const PreparedCorpus& {
            auto it = prepared.find(included);
            if (it == prepared.end()) it = prepared.emplace(included, prepare_corpus(corpus, res, included)).first;
            return it->second;
        };
        const std::vector<Attribute> attributes(cfg.creator_attributes.begin(), cfg.creator_attributes.end());
        const AblationReport report = run_ablation(
            attributes,
            [&](const AttributeSet& included) {
                const auto examples = make_examples(prepared_for(included), split.train);
                EncoderConfig ec{static_cast<TokenId>(res.vocab.size()), cfg.dim, cfg.seed};
                RetrievalModel m = RetrievalModel::initialize(cfg.ablation.kind, ec, res.vocab.blank_id());
                TrainConfig tc = cfg.training;
                tc.seed = cfg.seed;
                if (tc.batch_size > examples.size()) tc.batch_size = examples.size();
                tweetrec::train(m, examples, tc);
                if (options.log) *options.log << "[ablate] trained " << included.size() << "-attribute model\n";
                return m;
            },
            [&](const RetrievalModel& m, const AttributeSet& included) {
                const auto examples = make_examples(prepared_for(included), split.test);
                return evaluation_loss(m, examples, std::min(cfg.ablation.eval_batch_size, examples.size()),
                                       cfg.training.scale);
            });
        write_file_atomic(out, ablation_report_to_json(report));
        for (const auto& row : report.rows) {
            std::string line = row.label;
            line.resize(std::max<std::size_t>(line.size(), 13), ' ');
            result.summary += line + " " + (row.diverged ? "diverged: " + row.error : format_fixed(row.loss, 4)) + "\n";
        }
        result.stages.push_back(std::move(outcome));
    });
}

RunComparison compare_run_files(const std::filesystem::path& run_a, const std::filesystem::path& run_b,
                                const std::filesystem::path& qrels, Metric metric) {
    const auto a = parse_run_file(read_file(run_a));
    const auto b = parse_run_file(read_file(run_b));
    return compare_runs(a, b, parse_qrels_tsv(read_file(qrels)), metric);
}

std::string format_comparison(const RunComparison& cmp) {
    std::string out = "metric        run_a     run_b     delta\n";
    for (Metric m : kAllMetrics) {
        std::string name(metric_name(m));
        name.resize(8, ' ');
        out += name + "  " + format_fixed(cmp.a.mean(m), 4) + "    " + format_fixed(cmp.b.mean(m), 4) + "    " +
               (cmp.deltas[static_cast<std::size_t>(m)] >= 0 ? "+" : "") +
               format_fixed(cmp.deltas[static_cast<std::size_t>(m)], 4) +
               (m == cmp.metric && cmp.test.significant ? " *" : "") + "\n";
    }
    out += "paired t-test on " + std::string(metric_name(cmp.metric)) + ": t = " + format_fixed(cmp.test.t_statistic, 4) +
           ", df = " + std::to_string(cmp.test.degrees_of_freedom) + ", p = " + format_fixed(cmp.test.p_value, 4) +
           (cmp.test.significant ? " (significant at 0.05)" : " (not significant at 0.05)") + "\n";
    return out;
}

std::string format_cost_table(std::uint64_t n, std::uint64_t m) {
    std::string out = "n = " + std::to_string(n) + ", m = " + std::to_string(m) + "\n";
    out += "kind            cache miss    cache hit\n";
    for (FusionKind kind : {FusionKind::Base, FusionKind::EarlyFusion, FusionKind::IntermediateFusion,
                            FusionKind::LateFusion}) {
        const auto miss = estimate_encode_cost({kind, n, m, false});
        const auto hit = estimate_encode_cost({kind, n, m, true});
        char line[96];
        std::snprintf(line, sizeof(line), "%-14s %11llu  %11llu\n", std::string(fusion_kind_name(kind)).c_str(),
                      static_cast<unsigned long long>(miss), static_cast<unsigned long long>(hit));
        out += line;
    }
    return out;
}

} // namespace tweetrec
