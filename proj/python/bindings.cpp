#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ctiaug/error.hpp"
#include "ctiaug/runner.hpp"

namespace py = pybind11;
using namespace ctiaug;

namespace {

Dataset make_dataset(std::vector<Sentence> sentences, const std::string& source,
                     std::vector<std::string> label_order) {
  return Dataset(std::move(sentences), parse_source(source), label_order);
}

py::dict eval_dict(const EvalReport& r) {
  py::dict d;
  d["seed"] = r.seed;
  d["micro_f1"] = r.micro_f1;
  d["macro_f1"] = r.macro_f1;
  d["n_examples"] = r.n_examples;
  py::list per_class;
  for (const auto& c : r.per_class) {
    py::dict row;
    row["label"] = c.label;
    row["precision"] = c.precision;
    row["recall"] = c.recall;
    row["f1"] = c.f1;
    row["support"] = c.support;
    per_class.append(row);
  }
  d["per_class"] = per_class;
  return d;
}

py::dict summary_dict(const SeedSummary& s) {
  py::dict d;
  d["micro_mean"] = s.micro.mean;
  d["micro_std"] = s.micro.stddev ? py::cast(*s.micro.stddev) : py::none();
  d["macro_mean"] = s.macro.mean;
  d["macro_std"] = s.macro.stddev ? py::cast(*s.macro.stddev) : py::none();
  d["seeds"] = s.seeds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Auxiliary-data augmentation for sentence classification";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  // corpus
  py::class_<Sentence>(m, "Sentence")
      .def(py::init([](std::string id, std::string text, std::string label, const std::string& source,
                       std::string origin_id) {
             return Sentence{std::move(id), std::move(text), std::move(label), parse_source(source),
                             std::move(origin_id)};
           }),
           py::arg("id"), py::arg("text"), py::arg("label"), py::arg("source") = "primary",
           py::arg("origin_id") = "")
      .def_readwrite("id", &Sentence::id)
      .def_readwrite("text", &Sentence::text)
      .def_readwrite("label", &Sentence::label)
      .def_property_readonly("source", [](const Sentence& s) { return std::string(to_string(s.source)); })
      .def_readwrite("origin_id", &Sentence::origin_id)
      .def("__repr__", [](const Sentence& s) { return "<Sentence " + s.id + " " + s.label + ">"; });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("sentences"), py::arg("source") = "primary",
           py::arg("label_order") = std::vector<std::string>{})
      .def_property_readonly("sentences", &Dataset::sentences)
      .def_property_readonly("labels", &Dataset::labels)
      .def_property_readonly("source", [](const Dataset& d) { return std::string(to_string(d.source())); })
      .def("fingerprint", &Dataset::fingerprint)
      .def("members_of", [](const Dataset& d, const std::string& label) {
        auto span = d.members_of(label);
        return std::vector<std::size_t>(span.begin(), span.end());
      })
      .def("__len__", &Dataset::size);

  py::class_<SplitRatio>(m, "SplitRatio")
      .def(py::init<unsigned, unsigned, unsigned>(), py::arg("train") = 2, py::arg("dev") = 1,
           py::arg("test") = 1)
      .def_readwrite("train", &SplitRatio::train)
      .def_readwrite("dev", &SplitRatio::dev)
      .def_readwrite("test", &SplitRatio::test);

  py::class_<SplitBundle>(m, "SplitBundle")
      .def_readonly("train", &SplitBundle::train)
      .def_readonly("dev", &SplitBundle::dev)
      .def_readonly("test", &SplitBundle::test);

  m.def("normalize", &normalize, py::arg("text"));
  m.def("load_dataset", [](const std::filesystem::path& p, const std::string& source) {
    return load_dataset(p, parse_source(source));
  }, py::arg("path"), py::arg("source") = "primary");
  m.def("write_dataset", &write_dataset, py::arg("dataset"), py::arg("path"));
  m.def("deduplicate", &deduplicate, py::arg("dataset"));
  m.def("merge_labels", &merge_labels, py::arg("dataset"), py::arg("mapping"));
  m.def("filter_min_class_size", &filter_min_class_size, py::arg("dataset"), py::arg("min_count"));
  m.def("split_sizes", &split_sizes, py::arg("n"), py::arg("ratio") = SplitRatio{});
  m.def("stratified_split", &stratified_split, py::arg("dataset"), py::arg("ratio") = SplitRatio{},
        py::arg("seed") = 2);

  // encoder
  py::class_<Encoder>(m, "Encoder")
      .def_static("fit_hashed", [](const Dataset& corpus, std::size_t dimension, int lo, int hi) {
        return Encoder::fit_hashed(corpus, dimension, NgramRange{lo, hi});
      }, py::arg("corpus"), py::arg("dimension") = 2048, py::arg("ngram_lo") = 1, py::arg("ngram_hi") = 2)
      .def_static("load", &load_embedding_file, py::arg("path"), py::arg("dimension"))
      .def_property_readonly("dimension", &Encoder::dimension)
      .def("encode", &Encoder::encode, py::arg("sentence"))
      .def("fingerprint", &Encoder::fingerprint);
  m.def("cosine", [](const std::vector<double>& a, const std::vector<double>& b) { return cosine(a, b); });

  // selector
  py::class_<Selection>(m, "Selection")
      .def_readonly("id", &Selection::id)
      .def_readonly("label", &Selection::label)
      .def_readonly("score", &Selection::score)
      .def_readonly("origin_id", &Selection::origin_id);
  py::class_<AugmentationPlan>(m, "AugmentationPlan")
      .def_property_readonly("strategy", [](const AugmentationPlan& p) { return std::string(to_string(p.strategy)); })
      .def_readonly("k", &AugmentationPlan::k)
      .def_readonly("seed", &AugmentationPlan::seed)
      .def_readonly("selected", &AugmentationPlan::selected)
      .def_readonly("notices", &AugmentationPlan::notices)
      .def("fingerprint", &plan_fingerprint)
      .def("__eq__", [](const AugmentationPlan& a, const AugmentationPlan& b) { return a == b; });
  m.def("build_plan", [](const std::string& strategy, const Dataset& primary, const Dataset& auxiliary,
                         std::size_t k, std::uint64_t seed, const Encoder* encoder) {
    return build_plan(parse_strategy(strategy), primary, auxiliary, k, seed, encoder);
  }, py::arg("strategy"), py::arg("primary"), py::arg("auxiliary"), py::arg("k") = 10,
     py::arg("seed") = 2, py::arg("encoder") = nullptr);
  m.def("apply_plan", &apply_plan, py::arg("primary"), py::arg("pool"), py::arg("plan"));
  m.def("write_plan", &write_plan, py::arg("plan"), py::arg("path"));
  m.def("read_plan", &read_plan, py::arg("path"));

  // trainer
  m.def("lr_at", [](double base_lr, std::uint64_t warmup, std::uint64_t step) {
    return lr_at(Schedule{base_lr, warmup}, step);
  }, py::arg("base_lr"), py::arg("warmup_steps"), py::arg("step"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs_per_stage", &TrainConfig::epochs_per_stage)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("base_lr", &TrainConfig::base_lr)
      .def_readwrite("warmup_steps", &TrainConfig::warmup_steps)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("shuffle", &TrainConfig::shuffle)
      .def_readwrite("reset_stage2", &TrainConfig::reset_stage2);

  py::class_<Model>(m, "Model")
      .def_property_readonly("classes", &Model::classes)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def_property_readonly("steps", &Model::step_counter)
      .def("parameters", [](const Model& model) {
        auto p = model.parameters();
        return std::vector<double>(p.begin(), p.end());
      })
      .def("predict", [](const Model& model, const Encoder& enc, const Sentence& s) {
        return predict(model, enc, s).label;
      });
  m.def("two_stage_train", [](const Dataset& stage1, const Dataset& stage2, const Encoder& enc,
                              const TrainConfig& cfg, const std::string& arch, std::size_t hidden) {
    return two_stage_train(ModelSpec{parse_architecture(arch), hidden}, stage1, stage2, enc, cfg).model;
  }, py::arg("stage1"), py::arg("stage2"), py::arg("encoder"), py::arg("config") = TrainConfig{},
     py::arg("arch") = "linear", py::arg("hidden_dim") = 256);
  m.def("write_model", &write_model, py::arg("model"), py::arg("path"),
        py::arg("encoder_fingerprint"), py::arg("config"));

  // evaluator
  m.def("evaluate", [](const std::vector<std::string>& golds, const std::vector<std::string>& preds,
                       const std::vector<std::string>& catalog) {
    return eval_dict(evaluate(golds, preds, catalog, 0));
  }, py::arg("golds"), py::arg("preds"), py::arg("catalog"));

  // runner
  py::class_<SynthSpec>(m, "SynthSpec")
      .def(py::init(&SynthSpec::tram_like))
      .def_readwrite("class_sizes", &SynthSpec::class_sizes)
      .def_readwrite("aux_min", &SynthSpec::aux_min)
      .def_readwrite("aux_max", &SynthSpec::aux_max)
      .def_readwrite("vocabulary_shift", &SynthSpec::vocabulary_shift)
      .def_readwrite("shift_spread", &SynthSpec::shift_spread)
      .def_readwrite("signal_rate", &SynthSpec::signal_rate)
      .def_readwrite("noise_rate", &SynthSpec::noise_rate)
      .def_readwrite("aux_signal_rate", &SynthSpec::aux_signal_rate)
      .def_readwrite("aux_noise_rate", &SynthSpec::aux_noise_rate)
      .def_readwrite("seed", &SynthSpec::seed);
  m.def("synth", [](const SynthSpec& spec) {
    auto corpus = cmd_synth(spec);
    return py::make_tuple(std::move(corpus.primary), std::move(corpus.auxiliary));
  }, py::arg("spec") = SynthSpec::tram_like());
  m.def("write_synth", [](const SynthSpec& spec, const std::filesystem::path& out) {
    write_synth(cmd_synth(spec), out);
  }, py::arg("spec"), py::arg("out_dir"));

  m.def("prepare", [](const std::filesystem::path& raw_primary, const std::filesystem::path& raw_auxiliary,
                      const std::filesystem::path& merge_map, std::size_t min_count, std::uint64_t seed,
                      const std::filesystem::path& out_stem) {
    PrepareOptions o;
    o.raw_primary = raw_primary;
    o.raw_auxiliary = raw_auxiliary;
    o.merge_map = merge_map;
    o.min_count = min_count;
    o.seed = seed;
    o.out_stem = out_stem;
    const auto r = cmd_prepare(o);
    py::dict counts;
    counts["raw"] = r.counts.raw;
    counts["deduplicated"] = r.counts.deduplicated;
    counts["classes"] = r.counts.classes;
    counts["train"] = r.counts.train;
    counts["dev"] = r.counts.dev;
    counts["test"] = r.counts.test;
    counts["auxiliary"] = r.counts.auxiliary;
    counts["histogram"] = r.counts.histogram;
    return counts;
  }, py::arg("raw_primary"), py::arg("raw_auxiliary") = std::filesystem::path{},
     py::arg("merge_map") = std::filesystem::path{}, py::arg("min_count") = 3, py::arg("seed") = 2,
     py::arg("out_stem") = std::filesystem::path{});

  auto config = [](const std::filesystem::path& data, const std::filesystem::path& aux,
                   const std::string& strategy, bool two_stage, std::size_t k,
                   std::vector<std::uint64_t> seeds, const TrainConfig& train,
                   const std::filesystem::path& out, std::size_t jobs) {
    ExperimentConfig cfg;
    cfg.data = data;
    cfg.auxiliary = aux;
    cfg.strategy = strategy;
    cfg.two_stage = two_stage;
    cfg.k = k;
    cfg.seeds = std::move(seeds);
    cfg.train = train;
    cfg.out = out;
    cfg.jobs = jobs;
    return cfg;
  };

  m.def("run", [config](const std::filesystem::path& data, const std::filesystem::path& aux,
                        const std::string& strategy, bool two_stage, std::size_t k,
                        std::vector<std::uint64_t> seeds, const TrainConfig& train,
                        const std::filesystem::path& out, std::size_t jobs) {
    const auto cfg = config(data, aux, strategy, two_stage, k, std::move(seeds), train, out, jobs);
    RunResult r;
    {
      py::gil_scoped_release release;
      r = cmd_run(cfg);
    }
    py::dict d;
    py::list runs;
    for (const auto& run : r.runs) runs.append(eval_dict(run.test));
    d["runs"] = runs;
    d["summary"] = summary_dict(r.summary);
    return d;
  }, py::arg("data"), py::arg("auxiliary") = std::filesystem::path{}, py::arg("strategy") = "sim_minority",
     py::arg("two_stage") = true, py::arg("k") = 10, py::arg("seeds") = kDefaultSeeds,
     py::arg("train") = TrainConfig{}, py::arg("out") = std::filesystem::path{}, py::arg("jobs") = 1);

  m.def("grid", [config](const std::filesystem::path& data, const std::filesystem::path& aux,
                         std::vector<std::string> rows, std::size_t k, std::vector<std::uint64_t> seeds,
                         const TrainConfig& train, const std::filesystem::path& out, std::size_t jobs) {
    const auto cfg = config(data, aux, "sim_minority", true, k, std::move(seeds), train, out, jobs);
    GridSpec grid;
    for (const auto& row : default_grid()) {
      if (rows.empty() || std::find(rows.begin(), rows.end(), row.id) != rows.end()) grid.push_back(row);
    }
    GridResult r;
    {
      py::gil_scoped_release release;
      r = cmd_grid(grid, cfg);
    }
    py::dict d;
    for (const auto& row : r.rows) {
      py::dict entry;
      entry["label"] = row.row.label;
      entry["summary"] = row.summary ? py::object(summary_dict(*row.summary)) : py::none();
      entry["error"] = row.error;
      d[py::str(row.row.id)] = entry;
    }
    return py::make_tuple(d, render_grid(r));
  }, py::arg("data"), py::arg("auxiliary") = std::filesystem::path{},
     py::arg("rows") = std::vector<std::string>{}, py::arg("k") = 10, py::arg("seeds") = kDefaultSeeds,
     py::arg("train") = TrainConfig{}, py::arg("out") = std::filesystem::path{}, py::arg("jobs") = 1);

  m.def("report", &cmd_report, py::arg("dir"));
}
