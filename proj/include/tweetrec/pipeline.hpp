#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tweetrec/bm25.hpp"
#include "tweetrec/corpus.hpp"
#include "tweetrec/evaluation.hpp"
#include "tweetrec/fusion.hpp"
#include "tweetrec/textprep.hpp"
#include "tweetrec/training.hpp"

namespace tweetrec {

enum class Stage : std::uint8_t { Ingest, Preprocess, Train, Embed, Index, Retrieve, Evaluate };

inline constexpr std::array<Stage, 7> kAllStages = {Stage::Ingest,   Stage::Preprocess, Stage::Train,
                                                    Stage::Embed,    Stage::Index,      Stage::Retrieve,
                                                    Stage::Evaluate};

std::string_view stage_name(Stage s);
Stage parse_stage(std::string_view name);

/// Comma-separated stage names or "all"; result in pipeline order without
/// duplicates.
std::vector<Stage> parse_stage_list(std::string_view list);

struct PipelinePaths {
    std::filesystem::path articles;
    std::filesystem::path tweets;
    std::filesystem::path creators;
    std::filesystem::path vocab;
    std::filesystem::path dictionary;
    std::filesystem::path output_dir;
};

struct AblationSettings {
    FusionKind kind = FusionKind::EarlyFusion;
    /// Test batches are this size when averaging the in-batch loss.
    std::size_t eval_batch_size = 8;
};

struct PipelineConfig {
    PipelinePaths paths;
    /// Drives the split, parameter initialization and batch order.
    std::uint64_t seed = 7;
    FusionKind kind = FusionKind::Base;
    Eigen::Index dim = 64;
    TrainConfig training;
    /// Late Fusion weight; tuned on dev by grid search when unset.
    std::optional<double> late_alpha;
    std::size_t late_stage_depth = 20000;
    std::vector<double> alpha_grid = default_alpha_grid();
    bool bm25_enabled = true;
    Bm25Params bm25;
    SplitUnit split_unit = SplitUnit::Article;
    SplitRatios split_ratios;
    bool candidate_window = false;
    int window_days = 7;
    std::size_t top_k = 1000;
    AttributeSet creator_attributes = all_attributes();
    AblationSettings ablation;
    std::uint64_t cost_n = 128;
    std::uint64_t cost_m = 128;

    /// Throws ConfigError. Input files must exist and output_dir must be a
    /// directory or creatable under an existing directory.
    void validate() const;
};

/// Invalid configuration or command-line arguments.
class ConfigError : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

/// A stage found an upstream artifact missing.
class MissingArtifact : public std::runtime_error {
public:
    MissingArtifact(Stage stage, std::filesystem::path path);

    Stage stage() const { return stage_; }
    const std::filesystem::path& path() const { return path_; }

private:
    Stage stage_;
    std::filesystem::path path_;
};

/// Relative paths resolve against base_dir. Unknown keys are rejected.
PipelineConfig parse_pipeline_config(std::string_view json_text, const std::filesystem::path& base_dir = {});

/// Every field, fixed key order, paths as strings.
std::string pipeline_config_to_json(const PipelineConfig& cfg);

using EnvLookup = std::function<std::optional<std::string>(const char* name)>;

/// TWEETREC_ARTICLES, _TWEETS, _CREATORS, _VOCAB, _DICTIONARY and
/// _OUTPUT_DIR replace the matching path when set and non-empty.
void apply_env_overrides(PipelineConfig& cfg, const EnvLookup& lookup);
void apply_env_overrides(PipelineConfig& cfg);

/// Hex FNV-1a of the canonical JSON with output_dir left out.
std::string config_hash(const PipelineConfig& cfg);

/// <output_dir>/<stage>-<hash>.<suffix>
std::filesystem::path artifact_path(const PipelineConfig& cfg, std::string_view stage, std::string_view suffix);

enum ExitCode : int { kExitOk = 0, kExitInvalidConfig = 1, kExitMissingArtifact = 2, kExitFailure = 3 };

struct StageOutcome {
    std::string stage;
    bool skipped = false;
    std::vector<std::filesystem::path> artifacts;
};

struct PipelineResult {
    int exit_code = kExitOk;
    std::optional<std::string> failed_stage;
    std::string message;
    std::vector<StageOutcome> stages;
    /// Human-readable summary of the final step, if it produces one.
    std::string summary;

    bool ok() const { return exit_code == kExitOk; }
};

struct PipelineOptions {
    /// Recompute stages whose artifacts already exist.
    bool force = false;
    std::ostream* log = nullptr;
};

/// Runs the requested stages in pipeline order. A stage whose artifacts all
/// exist is skipped unless options.force. Upstream artifacts are read from
/// disk, so a stage may run alone once its inputs exist.
PipelineResult execute_pipeline(const PipelineConfig& cfg, std::span<const Stage> stages,
                                const PipelineOptions& options = {});

/// Grid search of the Late Fusion weight on dev queries; needs the train
/// and embed artifacts of a Late Fusion config. Writes tune-<hash>.json.
PipelineResult run_alpha_tuning(const PipelineConfig& cfg, const PipelineOptions& options = {});

/// Creator-attribute ablation with cfg.ablation.kind; needs the ingest
/// artifacts. Writes ablate-<hash>.json.
PipelineResult run_attribute_ablation(const PipelineConfig& cfg, const PipelineOptions& options = {});

/// Reads two run files and a qrels file and compares them on metric.
RunComparison compare_run_files(const std::filesystem::path& run_a, const std::filesystem::path& run_b,
                                const std::filesystem::path& qrels, Metric metric);

/// Mean metrics of both runs, deltas, t, df, p and a significance marker.
std::string format_comparison(const RunComparison& cmp);

/// Attention-cost estimates of every model kind at tweet length n and
/// context length m, with and without a creator-cache hit.
std::string format_cost_table(std::uint64_t n, std::uint64_t m);

} // namespace tweetrec
