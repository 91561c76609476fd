#include "ctiaug/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "config_json.hpp"
#include "ctiaug/error.hpp"
#include "ctiaug/random.hpp"
#include "jsonl.hpp"

namespace ctiaug {

namespace fs = std::filesystem;
using detail::json;

namespace {

fs::path with_suffix(const fs::path& stem, const std::string& suffix) {
  return fs::path(stem.string() + suffix);
}

void write_json(const fs::path& path, const json& value) {
  auto out = detail::open_for_write(path);
  out << value.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = detail::open_for_write(path);
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

/// Runs fn(0..n-1) on up to `jobs` threads. fn must not throw.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
  };
  const std::size_t threads = std::min(std::max<std::size_t>(jobs, 1), n);
  if (threads <= 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
}

}  // namespace

// --- prepare --------------------------------------------------------------

PrepareResult cmd_prepare(const PrepareOptions& options) {
  PrepareResult result;
  PrepareCounts& counts = result.counts;
  const LabelMapping mapping =
      options.merge_map.empty() ? LabelMapping{} : load_label_mapping(options.merge_map);

  const Dataset raw = load_dataset(options.raw_primary, Source::primary);
  counts.raw = raw.size();
  counts.raw_classes = raw.labels().size();
  const Dataset deduped = deduplicate(raw);
  counts.deduplicated = deduped.size();
  const Dataset merged = merge_labels(deduped, mapping);
  counts.merged_classes = merged.labels().size();
  const Dataset filtered = filter_min_class_size(merged, options.min_count);
  counts.filtered = filtered.size();
  counts.classes = filtered.labels().size();
  counts.histogram = class_histogram(filtered);

  result.splits = stratified_split(filtered, options.ratio, options.seed);
  counts.train = result.splits.train.size();
  counts.dev = result.splits.dev.size();
  counts.test = result.splits.test.size();

  if (!options.raw_auxiliary.empty()) {
    const Dataset aux_raw = load_dataset(options.raw_auxiliary, Source::auxiliary);
    counts.auxiliary_raw = aux_raw.size();
    const Dataset aux_merged = merge_labels(deduplicate(aux_raw), mapping);
    counts.auxiliary_deduplicated = aux_merged.size();
    std::vector<Sentence> kept;
    for (const auto& s : aux_merged) {
      if (filtered.has_label(s.label)) kept.push_back(s);
    }
    result.auxiliary = Dataset(std::move(kept), Source::auxiliary, filtered.labels());
    counts.auxiliary = result.auxiliary.size();
  }

  if (!options.out_stem.empty()) {
    write_split(result.splits, options.out_stem, options.ratio, options.seed);
    if (!options.raw_auxiliary.empty())
      write_dataset(result.auxiliary, with_suffix(options.out_stem, ".aux"));
    json manifest = {
        {"seed", options.seed},
        {"ratio", {options.ratio.train, options.ratio.dev, options.ratio.test}},
        {"min_count", options.min_count},
        {"primary",
         {{"raw", counts.raw},
          {"raw_classes", counts.raw_classes},
          {"deduplicated", counts.deduplicated},
          {"merged_classes", counts.merged_classes},
          {"filtered", counts.filtered},
          {"classes", counts.classes},
          {"splits", {counts.train, counts.dev, counts.test}}}},
        {"auxiliary",
         {{"raw", counts.auxiliary_raw},
          {"deduplicated", counts.auxiliary_deduplicated},
          {"kept", counts.auxiliary}}},
        {"histogram", counts.histogram},
    };
    write_json(with_suffix(options.out_stem, ".prepare.json"), manifest);
  }
  return result;
}

// --- synth ----------------------------------------------------------------

SynthSpec SynthSpec::tram_like() {
  SynthSpec spec;
  spec.class_sizes = {3, 3, 3, 3, 3, 3, 3, 4, 4, 5, 6, 8, 10, 14, 20, 30, 45, 60, 90, 120};
  return spec;
}

namespace {

std::string numbered(char prefix, std::size_t cls, char kind, std::size_t j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%02zu%c%02zu", prefix, cls, kind, j);
  return buf;
}

std::string style_token(char prefix, std::size_t j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%04zu", prefix, j);
  return buf;
}

/// Index drawn from a cumulative weight table.
std::size_t zipf_index(Rng& rng, const std::vector<double>& cumulative) {
  const double u = rng.uniform01() * cumulative.back();
  return static_cast<std::size_t>(
      std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
}

}  // namespace

SynthCorpus cmd_synth(const SynthSpec& spec) {
  const std::size_t classes = spec.class_sizes.size();
  if (classes < 5) throw ValidationError("synth needs at least 5 classes");
  if (std::find(spec.class_sizes.begin(), spec.class_sizes.end(), 0) != spec.class_sizes.end())
    throw ValidationError("synth class sizes must be positive");
  if (spec.aux_min > spec.aux_max) throw ValidationError("aux_min must be <= aux_max");
  if (spec.min_tokens < 1 || spec.min_tokens > spec.max_tokens)
    throw ValidationError("token range must satisfy 1 <= min <= max");
  if (spec.vocabulary_shift < 0.0 || spec.vocabulary_shift > 1.0 || spec.shift_spread < 0.0 ||
      spec.shift_spread > 1.0)
    throw ValidationError("vocabulary_shift and shift_spread must be in [0, 1]");
  if (spec.signal_rate < 0.0 || spec.noise_rate < 0.0 || spec.aux_signal_rate < 0.0 ||
      spec.aux_noise_rate < 0.0 || spec.signal_rate + spec.noise_rate > 1.0 ||
      spec.aux_signal_rate + spec.aux_noise_rate > 1.0)
    throw ValidationError("token rates must be non-negative and sum to at most 1");
  if (spec.signal_vocab < 1 || spec.style_vocab < 1 || spec.aux_style_vocab < 1)
    throw ValidationError("vocabulary sizes must be positive");

  std::vector<double> zipf(spec.signal_vocab);
  for (std::size_t j = 0; j < spec.signal_vocab; ++j)
    zipf[j] = (j ? zipf[j - 1] : 0.0) + 1.0 / static_cast<double>(j + 1);

  auto other_signal = [&](Rng& rng, std::size_t c) {
    auto other = rng.uniform_index(classes - 1);
    if (other >= c) ++other;
    return numbered('c', other, 't', zipf_index(rng, zipf));
  };
  auto primary_token = [&](Rng& rng, std::size_t c) {
    const double u = rng.uniform01();
    if (u < spec.signal_rate) return numbered('c', c, 't', zipf_index(rng, zipf));
    if (u < spec.signal_rate + spec.noise_rate) return other_signal(rng, c);
    return style_token('s', rng.uniform_index(spec.style_vocab));
  };
  // Auxiliary noise follows the primary signal-token marginal, which is
  // proportional to class size.
  std::vector<double> size_cdf(classes);
  for (std::size_t c = 0; c < classes; ++c)
    size_cdf[c] = (c ? size_cdf[c - 1] : 0.0) + static_cast<double>(spec.class_sizes[c]);
  auto popular_signal = [&](Rng& rng, std::size_t c) {
    std::size_t other;
    do {
      other = zipf_index(rng, size_cdf);
    } while (other == c);
    return numbered('c', other, 't', zipf_index(rng, zipf));
  };
  auto auxiliary_token = [&](Rng& rng, std::size_t c) {
    const double u = rng.uniform01();
    if (u < spec.aux_signal_rate) return numbered('c', c, 'd', zipf_index(rng, zipf));
    if (u < spec.aux_signal_rate + spec.aux_noise_rate) return popular_signal(rng, c);
    return style_token('m', rng.uniform_index(spec.aux_style_vocab));
  };
  auto length = [&](Rng& rng) {
    return spec.min_tokens + rng.uniform_index(spec.max_tokens - spec.min_tokens + 1);
  };
  auto label_of = [](std::size_t c) {
    char label[16];
    std::snprintf(label, sizeof label, "T%04zu", 1001 + c);
    return std::string(label);
  };

  std::vector<Sentence> primary, auxiliary;
  std::set<std::string> seen;  // unique texts overall, so dedup is a no-op
  auto emit = [&](std::vector<Sentence>& out, char prefix, Source source,
                  const std::string& label, auto&& make_text) {
    std::string text;
    do {
      text = make_text();
    } while (!seen.insert(text).second);
    char id[32];
    std::snprintf(id, sizeof id, "%c%05zu", prefix, out.size() + 1);
    out.push_back({id, std::move(text), label, source, {}});
  };

  // Separate streams: auxiliary parameters never perturb the primary corpus.
  Rng prng(derive_seed(spec.seed, "primary"));
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < spec.class_sizes[c]; ++i) {
      emit(primary, 'p', Source::primary, label_of(c), [&] {
        std::string text;
        for (std::size_t t = 0, n = length(prng); t < n; ++t)
          text += (t ? " " : "") + primary_token(prng, c);
        return text;
      });
    }
  }
  Rng arng(derive_seed(spec.seed, "auxiliary"));
  const double lo = spec.vocabulary_shift * (1.0 - spec.shift_spread);
  const double hi = std::min(1.0, spec.vocabulary_shift * (1.0 + spec.shift_spread));
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t count = spec.aux_min + arng.uniform_index(spec.aux_max - spec.aux_min + 1);
    for (std::size_t i = 0; i < count; ++i) {
      emit(auxiliary, 'a', Source::auxiliary, label_of(c), [&] {
        const double shift = arng.uniform(lo, hi);
        std::string text;
        for (std::size_t t = 0, n = length(arng); t < n; ++t) {
          const bool shifted = arng.uniform01() < shift;
          text += (t ? " " : "") + (shifted ? auxiliary_token(arng, c) : primary_token(arng, c));
        }
        return text;
      });
    }
  }
  return SynthCorpus{Dataset(std::move(primary), Source::primary),
                     Dataset(std::move(auxiliary), Source::auxiliary)};
}

void write_synth(const SynthCorpus& corpus, const fs::path& out_dir) {
  write_dataset(corpus.primary, out_dir / "primary.jsonl");
  write_dataset(corpus.auxiliary, out_dir / "auxiliary.jsonl");
}

// --- run ------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (strategy != "primary_only") parse_strategy(strategy);
  if (k < 1) throw ValidationError("k must be >= 1");
  if (seeds.empty()) throw ValidationError("at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ValidationError("seeds must be distinct");
  train.validate();
}

Encoder build_encoder(const EncoderSpec& spec, const Dataset& train, const Dataset& auxiliary) {
  if (spec.kind == EncoderKind::file_backed) {
    if (spec.embedding_file.empty())
      throw ValidationError("file_backed encoder needs an embedding file");
    return load_embedding_file(spec.embedding_file, spec.dimension);
  }
  // Fit on primary train + auxiliary so both styles share one feature space.
  std::vector<Sentence> corpus;
  corpus.reserve(train.size() + auxiliary.size());
  for (const auto& s : train) corpus.push_back({"p:" + s.id, s.text, s.label, s.source, {}});
  for (const auto& s : auxiliary)
    corpus.push_back({"a:" + s.id, s.text, s.label, s.source, {}});
  return Encoder::fit_hashed(Dataset(std::move(corpus), Source::mixed), spec.dimension,
                             spec.ngrams);
}

RunContext load_context(const ExperimentConfig& cfg) {
  if (cfg.data.empty()) throw ValidationError("no prepared data stem given");
  SplitBundle splits = load_split(cfg.data);
  Dataset auxiliary = cfg.auxiliary.empty()
                          ? Dataset{}
                          : load_dataset(cfg.auxiliary, Source::auxiliary);
  Encoder encoder = build_encoder(cfg.encoder, splits.train, auxiliary);
  return RunContext{std::move(splits), std::move(auxiliary), std::move(encoder)};
}

namespace {

json report_json(const EvalReport& r) {
  json per_class = json::array();
  for (const auto& c : r.per_class) {
    per_class.push_back({{"label", c.label},
                         {"precision", c.precision},
                         {"recall", c.recall},
                         {"f1", c.f1},
                         {"support", c.support}});
  }
  return {{"seed", r.seed},
          {"micro_f1", r.micro_f1},
          {"macro_f1", r.macro_f1},
          {"n_examples", r.n_examples},
          {"n_classes", r.n_classes},
          {"per_class", per_class}};
}

json summary_json(const SeedSummary& s) {
  auto metric = [](const MetricSummary& m) {
    return json{{"mean", m.mean}, {"std", m.stddev ? json(*m.stddev) : json(nullptr)}};
  };
  return {{"micro_f1", metric(s.micro)}, {"macro_f1", metric(s.macro)}, {"seeds", s.seeds}};
}

EvalReport evaluate_split(const Model& model, const Encoder& encoder, const Dataset& split,
                          std::uint64_t seed) {
  std::vector<std::string> golds, preds;
  for (const auto& s : split) {
    golds.push_back(s.label);
    preds.push_back(predict(model, encoder, s).label);
  }
  return evaluate(golds, preds, model.classes(), seed);
}

/// Creates `dir` atomically: content goes to a sibling staging directory that
/// is renamed into place on success and removed on failure.
class StagedDir {
 public:
  explicit StagedDir(fs::path dir) : dir_(std::move(dir)) {
    if (dir_.empty()) return;
    staging_ = dir_;
    staging_ += ".partial";
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;
  ~StagedDir() {
    if (!staging_.empty() && !committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }
  bool enabled() const { return !dir_.empty(); }
  fs::path path(const std::string& name) const { return staging_ / name; }
  void commit() {
    if (dir_.empty()) return;
    fs::remove_all(dir_);
    fs::rename(staging_, dir_);
    committed_ = true;
  }

 private:
  fs::path dir_;
  fs::path staging_;
  bool committed_ = false;
};

}  // namespace

SeedRun run_seed(const RunContext& ctx, const ExperimentConfig& cfg, const std::string& strategy,
                 bool two_stage, std::uint64_t seed, const fs::path& dir) {
  StagedDir out(dir);
  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = seed;

  const Dataset& dp = ctx.splits.train;
  Dataset stage1 = dp;
  SeedRun run;
  std::optional<AugmentationPlan> plan;
  if (strategy != "primary_only") {
    plan = build_plan(parse_strategy(strategy), dp, ctx.auxiliary, cfg.k, seed, &ctx.encoder);
    const bool from_primary = draws_from_primary(plan->strategy);
    stage1 = apply_plan(dp, from_primary ? dp : ctx.auxiliary, *plan);
    run.plan_fingerprint = plan_fingerprint(*plan);
    if (out.enabled()) write_plan(*plan, out.path("plan.jsonl"));
  }
  run.stage1_examples = stage1.size();

  Model model = [&] {
    if (two_stage) {
      TrainResult trained =
          two_stage_train(cfg.model, stage1, dp, ctx.encoder, train_cfg, dp.labels());
      run.stages = std::move(trained.stages);
      return std::move(trained.model);
    }
    Model m = init_model(cfg.model, ctx.encoder.dimension(), dp.labels(), seed);
    StageRecord record{stage1.fingerprint(), stage1.size(), train_cfg.epochs_per_stage, 1, 0};
    m = train_stage(std::move(m), stage1, ctx.encoder, train_cfg);
    record.last_step = m.step_counter();
    run.stages.push_back(std::move(record));
    return m;
  }();

  // Dev is evaluated for the record only; no model selection happens, and
  // the test split is read exactly once, here.
  run.dev = evaluate_split(model, ctx.encoder, ctx.splits.dev, seed);
  run.test = evaluate_split(model, ctx.encoder, ctx.splits.test, seed);

  if (out.enabled()) {
    write_model(model, out.path("model.bin"), ctx.encoder.fingerprint(), train_cfg);
    json report = report_json(run.test);
    report["split"] = "test";
    report["macro_convention"] = kMacroConvention;
    report["dev"] = report_json(run.dev);
    write_json(out.path("report.json"), report);

    json stages = json::array();
    for (const auto& s : run.stages) {
      stages.push_back({{"dataset_fingerprint", s.dataset_fingerprint},
                        {"examples", s.examples},
                        {"epochs", s.epochs},
                        {"first_step", s.first_step},
                        {"last_step", s.last_step}});
    }
    json manifest = {
        {"strategy", strategy},
        {"two_stage", two_stage},
        {"k", cfg.k},
        {"seed", seed},
        {"plan_fingerprint", plan ? json(run.plan_fingerprint) : json(nullptr)},
        {"encoder", {{"kind", to_string(ctx.encoder.kind())},
                     {"dimension", ctx.encoder.dimension()},
                     {"fingerprint", ctx.encoder.fingerprint()}}},
        {"model", {{"architecture", to_string(cfg.model.arch)},
                   {"hidden_dim", model.hidden_dim()}}},
        {"config", train_config_to_json(train_cfg)},
        {"stages", stages},
        {"steps", model.step_counter()},
        {"dev_split", "evaluated for the record; no model selection (fixed epochs)"},
        {"test_evaluations", 1},
    };
    write_json(out.path("manifest.json"), manifest);
    out.commit();
  }
  return run;
}

RunResult cmd_run(const RunContext& ctx, const ExperimentConfig& cfg) {
  cfg.validate();
  RunResult result;
  result.runs.resize(cfg.seeds.size());
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
    try {
      const auto seed = cfg.seeds[i];
      const fs::path dir = cfg.out.empty() ? fs::path{} : cfg.out / ("seed-" + std::to_string(seed));
      result.runs[i] = run_seed(ctx, cfg, cfg.strategy, cfg.two_stage, seed, dir);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<EvalReport> reports;
  for (const auto& r : result.runs) reports.push_back(r.test);
  result.summary = summarize_seeds(reports);

  if (!cfg.out.empty()) {
    json runs = json::array();
    for (const auto& r : result.runs)
      runs.push_back({{"seed", r.test.seed}, {"micro_f1", r.test.micro_f1}, {"macro_f1", r.test.macro_f1}});
    write_json(cfg.out / "summary.json", {{"strategy", cfg.strategy},
                                          {"two_stage", cfg.two_stage},
                                          {"macro_convention", kMacroConvention},
                                          {"runs", runs},
                                          {"summary", summary_json(result.summary)}});
    write_text(cfg.out / "summary.txt", render_run(cfg.strategy, cfg.two_stage, result));
  }
  return result;
}

RunResult cmd_run(const ExperimentConfig& cfg) {
  cfg.validate();
  return cmd_run(load_context(cfg), cfg);
}

// --- grid -----------------------------------------------------------------

GridSpec main_grid() {
  return {
      {"1", "primary_only", false, "D^P (baseline 1)"},
      {"2", "primary_only", true, "D^P -> D^P"},
      {"3", "all_auxiliary", false, "D^P+D^A (baseline 2)"},
      {"4", "all_auxiliary", true, "D^P+D^A -> D^P"},
      {"5", "sim_minority", false, "D^P+D^A_sim"},
      {"6", "sim_minority", true, "D^P+D^A_sim -> D^P"},
  };
}

GridSpec default_grid() {
  GridSpec grid = main_grid();
  const GridSpec ablations = {
      {"a", "oversample_same", true, "D^P+D^P_same -> D^P"},
      {"b", "oversample_swap", true, "D^P+D^P_swap -> D^P"},
      {"c", "rand_minority", true, "D^P+D^A_rand -> D^P"},
      {"d", "sim_minority", true, "D^P+D^A_sim -> D^P"},
      {"e", "rand_all", true, "D^P+D^A_randall -> D^P"},
      {"f", "sim_all", true, "D^P+D^A_simall -> D^P"},
  };
  grid.insert(grid.end(), ablations.begin(), ablations.end());
  return grid;
}

const GridRowResult& GridResult::row(const std::string& id) const {
  for (const auto& r : rows) {
    if (r.row.id == id) return r;
  }
  throw ValidationError("grid has no row `" + id + "`");
}

namespace {

json grid_row_json(const GridRowResult& r) {
  json runs = json::array();
  for (const auto& run : r.runs)
    runs.push_back({{"seed", run.test.seed}, {"micro_f1", run.test.micro_f1}, {"macro_f1", run.test.macro_f1}});
  json row = {{"row", r.row.id},
              {"label", r.row.label},
              {"strategy", r.row.strategy},
              {"two_stage", r.row.two_stage},
              {"runs", runs}};
  row["summary"] = r.summary ? summary_json(*r.summary) : json(nullptr);
  row["error"] = r.error.empty() ? json(nullptr) : json(r.error);
  return row;
}

}  // namespace

GridResult cmd_grid(const GridSpec& grid, const RunContext& ctx, const ExperimentConfig& cfg) {
  cfg.validate();
  std::set<std::string> ids;
  for (const auto& row : grid) {
    if (!ids.insert(row.id).second) throw ValidationError("duplicate grid row `" + row.id + "`");
    if (row.strategy != "primary_only") parse_strategy(row.strategy);
  }

  GridResult result;
  for (const auto& row : grid) result.rows.push_back({row, std::vector<SeedRun>(cfg.seeds.size()), {}, {}});
  std::vector<std::string> errors(grid.size() * cfg.seeds.size());
  parallel_for(errors.size(), cfg.jobs, [&](std::size_t task) {
    const std::size_t r = task / cfg.seeds.size(), s = task % cfg.seeds.size();
    const auto& row = grid[r];
    const auto seed = cfg.seeds[s];
    try {
      const fs::path dir = cfg.out.empty()
                               ? fs::path{}
                               : cfg.out / ("row-" + row.id) / ("seed-" + std::to_string(seed));
      result.rows[r].runs[s] = run_seed(ctx, cfg, row.strategy, row.two_stage, seed, dir);
    } catch (const std::exception& e) {
      errors[task] = "seed " + std::to_string(seed) + ": " + e.what();
    }
  });

  for (std::size_t r = 0; r < grid.size(); ++r) {
    auto& row = result.rows[r];
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
      const auto& e = errors[r * cfg.seeds.size() + s];
      if (!e.empty() && row.error.empty()) row.error = e;
    }
    if (!row.error.empty()) {
      row.runs.clear();
      continue;
    }
    std::vector<EvalReport> reports;
    for (const auto& run : row.runs) reports.push_back(run.test);
    row.summary = summarize_seeds(reports);
  }

  if (!cfg.out.empty()) {
    json rows = json::array();
    std::string records;
    for (const auto& r : result.rows) {
      rows.push_back(grid_row_json(r));
      for (const auto& run : r.runs) {
        records += json{{"row", r.row.id}, {"seed", run.test.seed},
                        {"micro_f1", run.test.micro_f1}, {"macro_f1", run.test.macro_f1}}
                       .dump() + "\n";
      }
      json summary = {{"row", r.row.id}, {"summary", r.summary ? summary_json(*r.summary) : json(nullptr)}};
      if (!r.error.empty()) summary["error"] = r.error;
      records += summary.dump() + "\n";
    }
    write_json(cfg.out / "grid.json",
               {{"macro_convention", kMacroConvention}, {"seeds", cfg.seeds}, {"rows", rows}});
    write_text(cfg.out / "grid.jsonl", records);
    write_text(cfg.out / "grid.txt", render_grid(result));
  }
  return result;
}

GridResult cmd_grid(const GridSpec& grid, const ExperimentConfig& cfg) {
  cfg.validate();
  return cmd_grid(grid, load_context(cfg), cfg);
}

// --- rendering ------------------------------------------------------------

namespace {

std::string cell(const MetricSummary& m) {
  std::string s = format_percent(m.mean);
  if (m.stddev) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " (%.3f)", *m.stddev);
    s += buf;
  }
  return s;
}

std::string table_row(const std::string& id, const std::string& label, const std::string& micro,
                      const std::string& macro) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-5s %-28s %-16s %-16s\n", id.c_str(), label.c_str(),
                micro.c_str(), macro.c_str());
  return buf;
}

std::string table_header() {
  return std::string("# ") + kMacroConvention + "\n" +
         table_row("row", "model", "micro (std)", "macro (std)") + std::string(68, '-') + "\n";
}

}  // namespace

std::string render_grid(const GridResult& result) {
  std::string out = table_header();
  for (const auto& r : result.rows) {
    const std::string id = "(" + r.row.id + ")";
    if (!r.summary) {
      out += table_row(id, r.row.label, "failed", r.error);
      continue;
    }
    out += table_row(id, r.row.label, cell(r.summary->micro), cell(r.summary->macro));
  }
  return out;
}

std::string render_run(const std::string& strategy, bool two_stage, const RunResult& result) {
  std::string out = table_header();
  for (const auto& run : result.runs) {
    out += table_row("seed", std::to_string(run.test.seed), format_percent(run.test.micro_f1),
                     format_percent(run.test.macro_f1));
  }
  out += table_row("mean", strategy + (two_stage ? " -> D^P" : ""), cell(result.summary.micro),
                   cell(result.summary.macro));
  return out;
}

std::string cmd_report(const fs::path& dir) {
  auto metric = [](const json& j) {
    MetricSummary m;
    m.mean = j.at("mean").get<double>();
    if (!j.at("std").is_null()) m.stddev = j.at("std").get<double>();
    return m;
  };
  auto summary = [&](const json& j) {
    SeedSummary s;
    s.micro = metric(j.at("micro_f1"));
    s.macro = metric(j.at("macro_f1"));
    s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    return s;
  };
  try {
    if (fs::exists(dir / "grid.json")) {
      const json grid = read_json(dir / "grid.json");
      GridResult result;
      for (const auto& row : grid.at("rows")) {
        GridRowResult r;
        r.row = {row.at("row").get<std::string>(), row.at("strategy").get<std::string>(),
                 row.at("two_stage").get<bool>(), row.at("label").get<std::string>()};
        if (!row.at("summary").is_null()) r.summary = summary(row.at("summary"));
        if (!row.at("error").is_null()) r.error = row.at("error").get<std::string>();
        result.rows.push_back(std::move(r));
      }
      return render_grid(result);
    }
    if (fs::exists(dir / "summary.json")) {
      const json run = read_json(dir / "summary.json");
      RunResult result;
      for (const auto& r : run.at("runs")) {
        SeedRun s;
        s.test.seed = r.at("seed").get<std::uint64_t>();
        s.test.micro_f1 = r.at("micro_f1").get<double>();
        s.test.macro_f1 = r.at("macro_f1").get<double>();
        result.runs.push_back(std::move(s));
      }
      result.summary = summary(run.at("summary"));
      return render_run(run.at("strategy").get<std::string>(), run.at("two_stage").get<bool>(),
                        result);
    }
  } catch (const json::exception& e) {
    throw ValidationError(dir.string() + ": malformed results (" + e.what() + ")");
  }
  throw ValidationError(dir.string() + " holds neither grid.json nor summary.json");
}

}  // namespace ctiaug
