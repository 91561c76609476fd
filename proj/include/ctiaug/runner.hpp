#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ctiaug/corpus.hpp"
#include "ctiaug/encoder.hpp"
#include "ctiaug/evaluator.hpp"
#include "ctiaug/selector.hpp"
#include "ctiaug/trainer.hpp"

namespace ctiaug {

/// First five primes.
inline const std::vector<std::uint64_t> kDefaultSeeds = {2, 3, 5, 7, 11};

// --- prepare --------------------------------------------------------------

struct PrepareOptions {
  std::filesystem::path raw_primary;
  std::filesystem::path raw_auxiliary;  // optional
  std::filesystem::path merge_map;      // optional
  std::size_t min_count = 3;
  SplitRatio ratio{};
  std::uint64_t seed = 2;
  std::filesystem::path out_stem;  // empty: nothing written
};

struct PrepareCounts {
  std::size_t raw = 0;
  std::size_t deduplicated = 0;
  std::size_t raw_classes = 0;
  std::size_t merged_classes = 0;
  std::size_t filtered = 0;
  std::size_t classes = 0;
  std::size_t train = 0, dev = 0, test = 0;
  std::size_t auxiliary_raw = 0;
  std::size_t auxiliary_deduplicated = 0;
  std::size_t auxiliary = 0;
  std::map<std::string, std::size_t> histogram;  // class -> primary size
};

struct PrepareResult {
  SplitBundle splits;
  Dataset auxiliary;
  PrepareCounts counts;
};

/// deduplicate -> merge_labels -> filter_min_class_size -> stratified_split on
/// the primary data. The auxiliary data is deduplicated, merged with the same
/// mapping and restricted to the surviving primary classes. Writes
/// <stem>.train/.dev/.test, <stem>.aux and <stem>.prepare.json when
/// out_stem is set.
PrepareResult cmd_prepare(const PrepareOptions& options);

// --- synth ----------------------------------------------------------------

/// Synthetic primary/auxiliary corpora with a style gap.
///
/// Every class owns a small signal vocabulary. Primary sentences mix signal
/// tokens, signal tokens of other classes, and shared primary style tokens.
/// An auxiliary sentence draws each token from the primary model with
/// probability 1 - s and otherwise from an auxiliary-only model (class tokens
/// that never occur in primary data plus auxiliary style tokens), where s is
/// drawn per sentence from [shift - spread, shift + spread] clipped to [0, 1].
/// vocabulary_shift = 0 makes both corpora identically distributed.
struct SynthSpec {
  std::vector<std::size_t> class_sizes;  // primary sentences per class
  std::size_t aux_min = 20;              // auxiliary sentences per class
  std::size_t aux_max = 45;
  double vocabulary_shift = 0.9;
  double shift_spread = 0.8;
  std::size_t signal_vocab = 15;
  std::size_t style_vocab = 400;
  std::size_t aux_style_vocab = 150;
  double signal_rate = 0.4;
  double noise_rate = 0.1;
  double aux_signal_rate = 0.05;  // auxiliary-only class tokens
  double aux_noise_rate = 0.45;  // other classes' primary signal tokens
  std::size_t min_tokens = 8;
  std::size_t max_tokens = 16;
  std::uint64_t seed = 2;

  /// 20 classes: seven of size 3 (one training sentence each after a 2:1:1
  /// split), a tail of small classes, and a few large ones.
  static SynthSpec tram_like();
};

struct SynthCorpus {
  Dataset primary;
  Dataset auxiliary;
};

SynthCorpus cmd_synth(const SynthSpec& spec);
void write_synth(const SynthCorpus& corpus, const std::filesystem::path& out_dir);

// --- run / grid -----------------------------------------------------------

struct EncoderSpec {
  EncoderKind kind = EncoderKind::hashed_tfidf;
  std::size_t dimension = 2048;
  NgramRange ngrams{1, 2};
  std::filesystem::path embedding_file;  // file_backed only
};

/// `strategy` is any plan strategy name or "primary_only".
struct ExperimentConfig {
  std::filesystem::path data;       // split stem: <data>.train/.dev/.test
  std::filesystem::path auxiliary;  // auxiliary dataset file
  EncoderSpec encoder;
  std::string strategy = "sim_minority";
  bool two_stage = true;
  std::size_t k = 10;
  ModelSpec model;
  TrainConfig train;
  std::vector<std::uint64_t> seeds = kDefaultSeeds;
  std::filesystem::path out;
  std::size_t jobs = 1;

  void validate() const;
};

/// Loaded splits, auxiliary pool and the encoder fitted on train + auxiliary.
/// Shared read-only by every run of a grid.
struct RunContext {
  SplitBundle splits;
  Dataset auxiliary;
  Encoder encoder;
};

RunContext load_context(const ExperimentConfig& cfg);
Encoder build_encoder(const EncoderSpec& spec, const Dataset& train, const Dataset& auxiliary);

struct SeedRun {
  EvalReport test;
  EvalReport dev;
  std::string plan_fingerprint;  // empty for primary_only
  std::size_t stage1_examples = 0;
  std::vector<StageRecord> stages;
};

/// One seed: plan, train (one or two stages), evaluate. Writes plan.jsonl,
/// model.bin, report.json and manifest.json under `dir` when non-empty; the
/// directory is only created once the run has succeeded.
SeedRun run_seed(const RunContext& ctx, const ExperimentConfig& cfg, const std::string& strategy,
                 bool two_stage, std::uint64_t seed, const std::filesystem::path& dir);

struct RunResult {
  std::vector<SeedRun> runs;
  SeedSummary summary;
};

/// All seeds of cfg.strategy. Writes <out>/seed-<s>/... and <out>/summary.json
/// plus <out>/summary.txt when cfg.out is set.
RunResult cmd_run(const ExperimentConfig& cfg);
RunResult cmd_run(const RunContext& ctx, const ExperimentConfig& cfg);

struct GridRow {
  std::string id;
  std::string strategy;
  bool two_stage = false;
  std::string label;
};

using GridSpec = std::vector<GridRow>;

/// Rows (1)-(6), the minority ablations (a)-(d) and all-class ablations (e)-(f).
GridSpec default_grid();
GridSpec main_grid();

struct GridRowResult {
  GridRow row;
  std::vector<SeedRun> runs;
  std::optional<SeedSummary> summary;
  std::string error;  // set when the row failed
};

struct GridResult {
  std::vector<GridRowResult> rows;
  const GridRowResult& row(const std::string& id) const;
};

/// Every row x seed, run on a bounded worker pool of cfg.jobs threads. A
/// failing row records its error; other rows still complete.
GridResult cmd_grid(const GridSpec& grid, const ExperimentConfig& cfg);
GridResult cmd_grid(const GridSpec& grid, const RunContext& ctx, const ExperimentConfig& cfg);

/// Fixed-width table: row, mean micro/macro (percent, one decimal) and std.
std::string render_grid(const GridResult& result);
std::string render_run(const std::string& strategy, bool two_stage, const RunResult& result);

/// Renders the table stored in a run or grid output directory.
std::string cmd_report(const std::filesystem::path& dir);

}  // namespace ctiaug
