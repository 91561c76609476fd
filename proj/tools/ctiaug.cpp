// ctiaug: prepare / synth / select / run / grid / report.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctiaug/error.hpp"
#include "ctiaug/runner.hpp"

namespace fs = std::filesystem;
using namespace ctiaug;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Options {
  fs::path out;
  std::uint64_t seed = 2;
  std::vector<std::uint64_t> seeds = kDefaultSeeds;
  std::size_t jobs = 1;

  PrepareOptions prepare;
  std::vector<unsigned> ratio{2, 1, 1};

  SynthSpec synth = SynthSpec::tram_like();

  ExperimentConfig experiment;
  std::string encoder = "hashed_tfidf";
  std::string arch = "linear";
  int ngram_lo = 1, ngram_hi = 2;
  bool no_shuffle = false;
  std::vector<std::string> rows;
};

void add_experiment_options(CLI::App* cmd, Options& o, bool with_strategy) {
  auto& e = o.experiment;
  cmd->add_option("--data", e.data, "prepared split stem (<stem>.train/.dev/.test)")->required();
  cmd->add_option("--aux", e.auxiliary, "auxiliary dataset (JSONL)");
  cmd->add_option("--encoder", o.encoder, "hashed_tfidf | file_backed")->capture_default_str();
  cmd->add_option("--dimension", e.encoder.dimension, "feature dimension")->capture_default_str();
  cmd->add_option("--ngram-lo", o.ngram_lo)->capture_default_str();
  cmd->add_option("--ngram-hi", o.ngram_hi)->capture_default_str();
  cmd->add_option("--embeddings", e.encoder.embedding_file, "embedding file for file_backed");
  cmd->add_option("--k", e.k, "minority threshold / per-class budget")->capture_default_str();
  if (with_strategy) {
    cmd->add_option("--strategy", e.strategy, "plan strategy or primary_only")->capture_default_str();
    cmd->add_option("--two-stage", e.two_stage, "continue on D^P after stage 1")->capture_default_str();
  }
  cmd->add_option("--arch", o.arch, "linear | mlp1")->capture_default_str();
  cmd->add_option("--hidden", e.model.hidden_dim, "mlp1 hidden width")->capture_default_str();
  cmd->add_option("--epochs", e.train.epochs_per_stage, "epochs per stage")->capture_default_str();
  cmd->add_option("--batch-size", e.train.batch_size)->capture_default_str();
  cmd->add_option("--lr", e.train.base_lr, "peak learning rate")->capture_default_str();
  cmd->add_option("--warmup-steps", e.train.warmup_steps)->capture_default_str();
  cmd->add_option("--beta1", e.train.beta1)->capture_default_str();
  cmd->add_option("--beta2", e.train.beta2)->capture_default_str();
  cmd->add_option("--eps", e.train.eps)->capture_default_str();
  cmd->add_option("--weight-decay", e.train.weight_decay)->capture_default_str();
  cmd->add_flag("--reset-stage2", e.train.reset_stage2, "reset Adam moments and schedule for stage 2");
  cmd->add_flag("--no-shuffle", o.no_shuffle, "keep dataset order within epochs");
}

void finish_experiment(Options& o) {
  auto& e = o.experiment;
  e.encoder.kind = parse_encoder_kind(o.encoder);
  e.encoder.ngrams = {o.ngram_lo, o.ngram_hi};
  e.model.arch = parse_architecture(o.arch);
  e.train.shuffle = !o.no_shuffle;
  e.seeds = o.seeds;
  e.out = o.out;
  e.jobs = o.jobs;
}

int run_prepare(Options& o) {
  if (o.ratio.size() != 3) throw ValidationError("--ratio takes three integers");
  o.prepare.ratio = {o.ratio[0], o.ratio[1], o.ratio[2]};
  o.prepare.seed = o.seed;
  if (!o.out.empty()) o.prepare.out_stem = o.out / "split";
  const auto result = cmd_prepare(o.prepare);
  const auto& c = result.counts;
  std::printf("primary: %zu raw, %zu after dedup, %zu classes after merge, %zu sentences / %zu classes after filter\n",
              c.raw, c.deduplicated, c.merged_classes, c.filtered, c.classes);
  std::printf("splits: train %zu, dev %zu, test %zu\n", c.train, c.dev, c.test);
  if (!o.prepare.raw_auxiliary.empty())
    std::printf("auxiliary: %zu raw, %zu after dedup, %zu kept\n", c.auxiliary_raw,
                c.auxiliary_deduplicated, c.auxiliary);
  return kExitOk;
}

int run_synth(Options& o) {
  if (o.out.empty()) throw ValidationError("synth needs --out");
  o.synth.seed = o.seed;
  const auto corpus = cmd_synth(o.synth);
  write_synth(corpus, o.out);
  std::printf("primary: %zu sentences, %zu classes; auxiliary: %zu sentences\n",
              corpus.primary.size(), corpus.primary.labels().size(), corpus.auxiliary.size());
  return kExitOk;
}

int run_select(Options& o) {
  finish_experiment(o);
  auto& e = o.experiment;
  if (e.strategy == "primary_only") throw ValidationError("primary_only has no plan");
  const auto strategy = parse_strategy(e.strategy);
  const auto ctx = load_context(e);
  const auto plan = build_plan(strategy, ctx.splits.train, ctx.auxiliary, e.k, o.seed, &ctx.encoder);
  for (const auto& n : plan.notices) std::fprintf(stderr, "note: %s\n", n.c_str());
  if (o.out.empty()) {
    std::ostringstream text;
    for (const auto& s : plan.selected) text << s.label << '\t' << s.id << '\n';
    std::cout << text.str();
  } else {
    write_plan(plan, o.out / "plan.jsonl");
  }
  std::fprintf(stderr, "%zu selections, fingerprint %s\n", plan.selected.size(),
               plan_fingerprint(plan).c_str());
  return kExitOk;
}

int run_run(Options& o) {
  finish_experiment(o);
  const auto result = cmd_run(o.experiment);
  std::cout << render_run(o.experiment.strategy, o.experiment.two_stage, result);
  return kExitOk;
}

int run_grid(Options& o) {
  finish_experiment(o);
  GridSpec grid;
  if (o.rows.empty()) {
    grid = default_grid();
  } else {
    const std::set<std::string> wanted(o.rows.begin(), o.rows.end());
    for (const auto& row : default_grid()) {
      if (wanted.contains(row.id)) grid.push_back(row);
    }
    if (grid.size() != wanted.size()) throw ValidationError("unknown id in --rows");
  }
  const auto result = cmd_grid(grid, o.experiment);
  std::cout << render_grid(result);
  for (const auto& row : result.rows) {
    if (!row.error.empty()) return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Auxiliary-data augmentation experiments for sentence classification"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file whose keys are the flag names");
  app.set_help_all_flag("--help-all");

  Options o;
  app.add_option("--out", o.out, "output directory")->configurable();
  app.add_option("--seed", o.seed, "seed for prepare, synth and select")->capture_default_str();
  app.add_option("--seeds", o.seeds, "training seeds")->capture_default_str();
  app.add_option("--jobs", o.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  auto* prepare = app.add_subcommand("prepare", "dedup, merge, filter and split raw data");
  prepare->fallthrough();
  prepare->add_option("--raw-primary", o.prepare.raw_primary)->required()->check(CLI::ExistingFile);
  prepare->add_option("--raw-aux", o.prepare.raw_auxiliary)->check(CLI::ExistingFile);
  prepare->add_option("--merge-map", o.prepare.merge_map)->check(CLI::ExistingFile);
  prepare->add_option("--min-count", o.prepare.min_count)->capture_default_str();
  prepare->add_option("--ratio", o.ratio, "train dev test weights")->expected(3)->capture_default_str();

  auto* synth = app.add_subcommand("synth", "generate a synthetic primary/auxiliary corpus");
  synth->fallthrough();
  auto& s = o.synth;
  synth->add_option("--class-sizes", s.class_sizes, "primary sentences per class")->capture_default_str();
  synth->add_option("--aux-min", s.aux_min)->capture_default_str();
  synth->add_option("--aux-max", s.aux_max)->capture_default_str();
  synth->add_option("--vocabulary-shift", s.vocabulary_shift)->capture_default_str();
  synth->add_option("--shift-spread", s.shift_spread)->capture_default_str();
  synth->add_option("--signal-vocab", s.signal_vocab)->capture_default_str();
  synth->add_option("--style-vocab", s.style_vocab)->capture_default_str();
  synth->add_option("--aux-style-vocab", s.aux_style_vocab)->capture_default_str();
  synth->add_option("--signal-rate", s.signal_rate)->capture_default_str();
  synth->add_option("--noise-rate", s.noise_rate)->capture_default_str();
  synth->add_option("--aux-signal-rate", s.aux_signal_rate)->capture_default_str();
  synth->add_option("--aux-noise-rate", s.aux_noise_rate)->capture_default_str();
  synth->add_option("--min-tokens", s.min_tokens)->capture_default_str();
  synth->add_option("--max-tokens", s.max_tokens)->capture_default_str();

  auto* select = app.add_subcommand("select", "build an augmentation plan");
  select->fallthrough();
  add_experiment_options(select, o, true);

  auto* run = app.add_subcommand("run", "train and evaluate one strategy over all seeds");
  run->fallthrough();
  add_experiment_options(run, o, true);

  auto* grid = app.add_subcommand("grid", "run the comparison grid");
  grid->fallthrough();
  add_experiment_options(grid, o, false);
  grid->add_option("--rows", o.rows, "subset of row ids, e.g. 1 2 3");

  fs::path report_dir;
  auto* report = app.add_subcommand("report", "render the table stored in a run/grid directory");
  report->add_option("dir", report_dir)->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*prepare) return run_prepare(o);
    if (*synth) return run_synth(o);
    if (*select) return run_select(o);
    if (*run) return run_run(o);
    if (*grid) return run_grid(o);
    if (*report) {
      std::cout << cmd_report(report_dir);
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
