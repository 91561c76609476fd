#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "ctiaug/error.hpp"
#include "ctiaug/runner.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace ctiaug;
using ctiaug::testing::TempDir;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = CTIAUG_FIXTURES;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

SynthSpec small_spec() {
  SynthSpec s;
  s.class_sizes = {3, 4, 6, 10, 16};
  s.aux_min = 6;
  s.aux_max = 12;
  return s;
}

/// Synthesizes and prepares a small corpus under `dir`; returns a config
/// pointing at it.
ExperimentConfig small_experiment(const TempDir& dir) {
  write_synth(cmd_synth(small_spec()), dir / "raw");
  PrepareOptions p;
  p.raw_primary = dir / "raw/primary.jsonl";
  p.raw_auxiliary = dir / "raw/auxiliary.jsonl";
  p.out_stem = dir / "data/split";
  cmd_prepare(p);
  ExperimentConfig cfg;
  cfg.data = dir / "data/split";
  cfg.auxiliary = dir / "data/split.aux";
  cfg.encoder.dimension = 256;
  cfg.train.epochs_per_stage = 4;
  cfg.train.base_lr = 5e-2;
  cfg.train.warmup_steps = 5;
  cfg.seeds = {2, 3};
  return cfg;
}

}  // namespace

TEST(Prepare, FixtureCountsMatchExpected) {
  TempDir dir("prep");
  PrepareOptions p;
  p.raw_primary = kFixtures / "raw_primary.jsonl";
  p.raw_auxiliary = kFixtures / "raw_auxiliary.jsonl";
  p.merge_map = kFixtures / "merge_map.jsonl";
  p.out_stem = dir / "split";
  const auto r = cmd_prepare(p);
  const json want = json::parse(slurp(kFixtures / "expected_prepare.json"));
  const auto& c = r.counts;
  EXPECT_EQ(c.raw, want["raw"]);
  EXPECT_EQ(c.deduplicated, want["deduplicated"]);
  EXPECT_EQ(c.raw_classes, want["raw_classes"]);
  EXPECT_EQ(c.merged_classes, want["merged_classes"]);
  EXPECT_EQ(c.filtered, want["filtered"]);
  EXPECT_EQ(c.classes, want["classes"]);
  EXPECT_EQ(c.train, want["train"]);
  EXPECT_EQ(c.dev, want["dev"]);
  EXPECT_EQ(c.test, want["test"]);
  EXPECT_EQ(c.auxiliary_raw, want["auxiliary_raw"]);
  EXPECT_EQ(c.auxiliary_deduplicated, want["auxiliary_deduplicated"]);
  EXPECT_EQ(c.auxiliary, want["auxiliary"]);
  std::size_t size3 = 0;
  for (const auto& [label, n] : c.histogram) size3 += n == 3;
  EXPECT_EQ(size3, want["classes_of_size_3"]);
  EXPECT_EQ(json(c.histogram), want["histogram"]);

  for (const char* suffix : {".train", ".dev", ".test", ".aux", ".prepare.json"})
    EXPECT_TRUE(fs::exists(dir.path() / (std::string("split") + suffix))) << suffix;
  const auto back = load_split(dir / "split");
  EXPECT_EQ(back.train.fingerprint(), r.splits.train.fingerprint());
  for (const auto& s : r.auxiliary) EXPECT_TRUE(r.splits.train.has_label(s.label));
}

TEST(Prepare, SplitIsDeterministicPerSeed) {
  PrepareOptions p;
  p.raw_primary = kFixtures / "raw_primary.jsonl";
  p.merge_map = kFixtures / "merge_map.jsonl";
  const auto a = cmd_prepare(p);
  const auto b = cmd_prepare(p);
  EXPECT_EQ(a.splits.train.fingerprint(), b.splits.train.fingerprint());
  EXPECT_EQ(a.splits.test.fingerprint(), b.splits.test.fingerprint());
}

TEST(Synth, TramLikeHistogram) {
  const auto spec = SynthSpec::tram_like();
  EXPECT_EQ(spec.class_sizes, (std::vector<std::size_t>{3, 3, 3, 3, 3, 3, 3, 4, 4, 5, 6, 8, 10, 14,
                                                        20, 30, 45, 60, 90, 120}));
  const auto corpus = cmd_synth(spec);
  const auto hist = class_histogram(corpus.primary);
  ASSERT_EQ(hist.size(), 20u);
  std::vector<std::size_t> sizes;
  for (const auto& label : corpus.primary.labels()) sizes.push_back(hist.at(label));
  EXPECT_EQ(sizes, spec.class_sizes);
  for (const auto& label : corpus.primary.labels()) {
    const auto n = corpus.auxiliary.members_of(label).size();
    EXPECT_GE(n, spec.aux_min);
    EXPECT_LE(n, spec.aux_max);
  }
  EXPECT_EQ(deduplicate(corpus.primary).size(), corpus.primary.size());
  EXPECT_EQ(deduplicate(corpus.auxiliary).size(), corpus.auxiliary.size());

  PrepareOptions p;
  TempDir dir("synth");
  write_synth(corpus, dir.path());
  p.raw_primary = dir / "primary.jsonl";
  const auto prepared = cmd_prepare(p);
  std::size_t single = 0;
  for (const auto& m : prepared.splits.train.members()) single += m.size() == 1;
  EXPECT_EQ(single, 7u);
}

TEST(Synth, DeterministicAndSeedSensitive) {
  auto spec = small_spec();
  const auto a = cmd_synth(spec);
  const auto b = cmd_synth(spec);
  EXPECT_EQ(a.primary.fingerprint(), b.primary.fingerprint());
  EXPECT_EQ(a.auxiliary.fingerprint(), b.auxiliary.fingerprint());
  spec.seed = 3;
  EXPECT_NE(cmd_synth(spec).primary.fingerprint(), a.primary.fingerprint());
}

TEST(Synth, PrimaryIndependentOfAuxiliaryParameters) {
  auto spec = small_spec();
  const auto a = cmd_synth(spec);
  spec.vocabulary_shift = 0.2;
  spec.aux_max = 20;
  EXPECT_EQ(cmd_synth(spec).primary.fingerprint(), a.primary.fingerprint());
}

TEST(Synth, ZeroShiftUsesOnlyPrimaryVocabulary) {
  auto spec = small_spec();
  spec.vocabulary_shift = 0.0;
  const auto corpus = cmd_synth(spec);
  for (const auto& s : corpus.auxiliary) {
    std::istringstream in(s.text);
    for (std::string t; in >> t;) {
      EXPECT_EQ(t.find('d'), std::string::npos) << t;
      EXPECT_NE(t[0], 'm') << t;
    }
  }
}

TEST(Synth, RejectsBadSpecs) {
  auto spec = small_spec();
  spec.class_sizes = {3, 4};
  EXPECT_THROW(cmd_synth(spec), ValidationError);
  spec = small_spec();
  spec.aux_min = 9;
  spec.aux_max = 2;
  EXPECT_THROW(cmd_synth(spec), ValidationError);
  spec = small_spec();
  spec.vocabulary_shift = 1.5;
  EXPECT_THROW(cmd_synth(spec), ValidationError);
  spec = small_spec();
  spec.signal_rate = 0.95;
  EXPECT_THROW(cmd_synth(spec), ValidationError);
}

TEST(Run, PrimaryOnlyWritesNoPlan) {
  TempDir dir("run");
  auto cfg = small_experiment(dir);
  cfg.strategy = "primary_only";
  cfg.two_stage = false;
  cfg.out = dir / "out";
  const auto r = cmd_run(cfg);
  ASSERT_EQ(r.runs.size(), 2u);
  EXPECT_TRUE(r.runs[0].plan_fingerprint.empty());
  for (const char* f : {"model.bin", "report.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir.path() / "out/seed-2" / f)) << f;
  EXPECT_FALSE(fs::exists(dir.path() / "out/seed-2/plan.jsonl"));
  EXPECT_TRUE(fs::exists(dir.path() / "out/summary.json"));
  EXPECT_TRUE(fs::exists(dir.path() / "out/summary.txt"));
  const json manifest = json::parse(slurp(dir.path() / "out/seed-2/manifest.json"));
  EXPECT_EQ(manifest["test_evaluations"], 1);
  EXPECT_TRUE(manifest["plan_fingerprint"].is_null());
  EXPECT_EQ(manifest["stages"].size(), 1u);
}

TEST(Run, RerunIsByteIdentical) {
  TempDir dir("run");
  auto cfg = small_experiment(dir);
  cfg.strategy = "sim_minority";
  cfg.out = dir / "a";
  cmd_run(cfg);
  cfg.out = dir / "b";
  cfg.jobs = 2;
  cmd_run(cfg);
  for (const char* f : {"plan.jsonl", "model.bin", "report.json", "manifest.json"})
    EXPECT_EQ(slurp(dir.path() / "a/seed-3" / f), slurp(dir.path() / "b/seed-3" / f)) << f;
  EXPECT_EQ(slurp(dir.path() / "a/summary.json"), slurp(dir.path() / "b/summary.json"));
}

TEST(Run, RowTwoEqualsTwoStageTrain) {
  TempDir dir("run");
  auto cfg = small_experiment(dir);
  const auto ctx = load_context(cfg);
  cfg.out = dir / "out";
  run_seed(ctx, cfg, "primary_only", true, 5, dir / "row2");
  auto train = cfg.train;
  train.seed = 5;
  const auto direct = two_stage_train(cfg.model, ctx.splits.train, ctx.splits.train, ctx.encoder,
                                      train, ctx.splits.train.labels());
  const auto loaded = read_model(dir / "row2/model.bin");
  EXPECT_TRUE(std::ranges::equal(loaded.model.parameters(), direct.model.parameters()));
}

TEST(Run, RowTwoEqualsRowOneWithDoubledEpochs) {
  TempDir dir("run");
  auto cfg = small_experiment(dir);
  const auto ctx = load_context(cfg);
  run_seed(ctx, cfg, "primary_only", true, 3, dir / "row2");
  cfg.train.epochs_per_stage *= 2;
  run_seed(ctx, cfg, "primary_only", false, 3, dir / "row1");
  const auto a = read_model(dir / "row2/model.bin");
  const auto b = read_model(dir / "row1/model.bin");
  EXPECT_TRUE(std::ranges::equal(a.model.parameters(), b.model.parameters()));
  EXPECT_EQ(a.model.step_counter(), b.model.step_counter());
}

TEST(Run, FailedRunLeavesNoDirectory) {
  TempDir dir("run");
  auto cfg = small_experiment(dir);
  const auto ctx = load_context(cfg);
  cfg.train.base_lr = 1e300;
  cfg.train.warmup_steps = 1;
  EXPECT_ANY_THROW(run_seed(ctx, cfg, "rand_all", true, 2, dir / "bad"));
  EXPECT_FALSE(fs::exists(dir / "bad"));
  EXPECT_FALSE(fs::exists(dir.path() / "bad.partial"));
}

TEST(Run, ConfigValidation) {
  ExperimentConfig cfg;
  cfg.strategy = "bogus";
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.k = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.seeds = {2, 2};
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.seeds.clear();
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Grid, MainRowsProduceThirtyRuns) {
  TempDir dir("grid");
  auto cfg = small_experiment(dir);
  cfg.seeds = kDefaultSeeds;
  cfg.out = dir / "grid";
  cfg.jobs = 2;
  const auto result = cmd_grid(main_grid(), cfg);
  ASSERT_EQ(result.rows.size(), 6u);
  std::size_t runs = 0;
  for (const auto& row : result.rows) {
    EXPECT_TRUE(row.error.empty()) << row.error;
    runs += row.runs.size();
  }
  EXPECT_EQ(runs, 30u);
  for (const char* f : {"grid.json", "grid.jsonl", "grid.txt"})
    EXPECT_TRUE(fs::exists(dir.path() / "grid" / f)) << f;
  EXPECT_TRUE(fs::exists(dir.path() / "grid/row-6/seed-11/model.bin"));

  const auto table = render_grid(result);
  EXPECT_NE(table.find(kMacroConvention), std::string::npos);
  EXPECT_NE(table.find("D^P+D^A_sim -> D^P"), std::string::npos);
  EXPECT_EQ(cmd_report(dir / "grid"), table);

  std::size_t lines = 0;
  std::istringstream in(slurp(dir.path() / "grid/grid.jsonl"));
  for (std::string l; std::getline(in, l);) lines += !l.empty();
  EXPECT_EQ(lines, 36u);
}

TEST(Grid, FailingRowIsRecordedAndOthersComplete) {
  TempDir dir("grid");
  auto cfg = small_experiment(dir);
  auto ctx = load_context(cfg);
  // Embeddings cover the primary splits only, so similarity rows cannot
  // encode auxiliary sentences.
  std::vector<std::pair<std::string, Vector>> rows;
  std::uint64_t n = 0;
  for (const Dataset* d : {&ctx.splits.train, &ctx.splits.dev, &ctx.splits.test}) {
    for (const auto& s : *d) {
      ++n;
      rows.push_back({s.id, {1.0, static_cast<double>(n % 7), static_cast<double>(n % 3)}});
    }
  }
  ctx.encoder = Encoder::from_vectors(rows, 3);
  cfg.out = dir / "grid";
  GridSpec grid{{"1", "primary_only", false, "ok"}, {"x", "sim_all", false, "bad"}};
  const auto result = cmd_grid(grid, ctx, cfg);
  EXPECT_TRUE(result.row("1").error.empty());
  EXPECT_TRUE(result.row("1").summary.has_value());
  EXPECT_FALSE(result.row("x").error.empty());
  EXPECT_FALSE(result.row("x").summary.has_value());
  EXPECT_TRUE(fs::exists(dir.path() / "grid/row-1/seed-2/model.bin"));
  EXPECT_FALSE(fs::exists(dir.path() / "grid/row-x/seed-2"));
  EXPECT_FALSE(fs::exists(dir.path() / "grid/row-x/seed-2.partial"));
}

TEST(Grid, RejectsBadRowsUpFront) {
  TempDir dir("grid");
  auto cfg = small_experiment(dir);
  GridSpec unknown{{"1", "primary_only", false, "ok"}, {"x", "no_such_strategy", false, "bad"}};
  EXPECT_THROW(cmd_grid(unknown, cfg), ValidationError);
  GridSpec dup{{"1", "primary_only", false, "a"}, {"1", "primary_only", true, "b"}};
  EXPECT_THROW(cmd_grid(dup, cfg), ValidationError);
}

TEST(Report, RendersRunSummary) {
  TempDir dir("report");
  auto cfg = small_experiment(dir);
  cfg.strategy = "oversample_same";
  cfg.out = dir / "run";
  const auto r = cmd_run(cfg);
  EXPECT_EQ(cmd_report(dir / "run"), render_run(cfg.strategy, cfg.two_stage, r));
  EXPECT_THROW(cmd_report(dir.path()), ValidationError);
}
