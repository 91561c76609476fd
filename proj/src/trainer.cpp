#include "ctiaug/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "ctiaug/error.hpp"
#include "ctiaug/random.hpp"
#include "config_json.hpp"
#include "jsonl.hpp"

namespace ctiaug {

namespace fs = std::filesystem;
using detail::json;

void TrainConfig::validate() const {
  if (epochs_per_stage < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ValidationError("lr must be > 0");
  if (warmup_steps < 1) throw ValidationError("warmup_steps must be >= 1");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ValidationError("beta1 must be in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ValidationError("beta2 must be in (0, 1)");
  if (!(eps > 0.0)) throw ValidationError("eps must be > 0");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be >= 0");
}

double lr_at(const Schedule& schedule, std::uint64_t step) {
  if (step < 1) throw ValidationError("schedule step must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(schedule.warmup_steps);
  return schedule.base_lr * std::min(s / w, std::sqrt(w / s));
}

std::string_view to_string(Architecture arch) {
  return arch == Architecture::linear ? "linear" : "mlp1";
}

Architecture parse_architecture(std::string_view name) {
  if (name == "linear") return Architecture::linear;
  if (name == "mlp1") return Architecture::mlp1;
  throw ValidationError("unknown architecture `" + std::string(name) + "`");
}

SparseRow to_sparse(std::span<const double> dense) {
  SparseRow row;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) {
      row.index.push_back(static_cast<std::uint32_t>(i));
      row.value.push_back(dense[i]);
    }
  }
  return row;
}

Model::Model(ModelSpec spec, std::size_t input_dim, std::vector<std::string> classes)
    : spec_(spec), input_dim_(input_dim), classes_(std::move(classes)) {
  if (input_dim_ == 0 || classes_.empty())
    throw ValidationError("model needs a positive input dimension and at least one class");
  if (spec_.arch == Architecture::mlp1 && spec_.hidden_dim == 0)
    throw ValidationError("mlp1 needs a positive hidden dimension");
  const std::size_t c = classes_.size();
  const std::size_t count =
      spec_.arch == Architecture::linear
          ? c * input_dim_ + c
          : spec_.hidden_dim * input_dim_ + spec_.hidden_dim + c * spec_.hidden_dim + c;
  params_.assign(count, 0.0);
  opt_.first_moment.assign(count, 0.0);
  opt_.second_moment.assign(count, 0.0);
}

std::size_t Model::class_index(std::string_view label) const {
  auto it = std::find(classes_.begin(), classes_.end(), label);
  if (it == classes_.end())
    throw ValidationError("label `" + std::string(label) + "` is not a model class");
  return static_cast<std::size_t>(it - classes_.begin());
}

bool Model::is_weight(std::size_t i) const {
  const std::size_t c = classes_.size();
  if (spec_.arch == Architecture::linear) return i < c * input_dim_;
  const std::size_t h = spec_.hidden_dim;
  const std::size_t w1 = h * input_dim_;
  const std::size_t w2_begin = w1 + h;
  return i < w1 || (i >= w2_begin && i < w2_begin + c * h);
}

namespace {

void affine_sparse(std::span<const double> weights, std::span<const double> bias,
                   std::size_t in_dim, const SparseRow& x, std::vector<double>& out) {
  out.assign(bias.begin(), bias.end());
  for (std::size_t r = 0; r < out.size(); ++r) {
    const double* w = weights.data() + r * in_dim;
    double acc = out[r];
    for (std::size_t j = 0; j < x.index.size(); ++j) acc += w[x.index[j]] * x.value[j];
    out[r] = acc;
  }
}

void affine_dense(std::span<const double> weights, std::span<const double> bias,
                  std::span<const double> x, std::vector<double>& out) {
  out.assign(bias.begin(), bias.end());
  for (std::size_t r = 0; r < out.size(); ++r) {
    const double* w = weights.data() + r * x.size();
    double acc = out[r];
    for (std::size_t j = 0; j < x.size(); ++j) acc += w[j] * x[j];
    out[r] = acc;
  }
}

struct Layout {
  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;
};

Layout layout(const Model& m) {
  const std::size_t d = m.input_dim(), h = m.hidden_dim(), c = m.num_classes();
  if (m.arch() == Architecture::linear) return {0, c * d, 0, 0};
  return {0, h * d, h * d + h, h * d + h + c * h};
}

/// Hidden pre-activations (mlp1 only) and logits.
struct Forward {
  std::vector<double> hidden_pre;
  std::vector<double> hidden;
  std::vector<double> logits;
};

void forward(const Model& m, const SparseRow& x, Forward& f) {
  const auto p = m.parameters();
  const auto l = layout(m);
  const std::size_t d = m.input_dim(), c = m.num_classes();
  if (m.arch() == Architecture::linear) {
    affine_sparse(p.subspan(l.w1, c * d), p.subspan(l.b1, c), d, x, f.logits);
    return;
  }
  const std::size_t h = m.hidden_dim();
  affine_sparse(p.subspan(l.w1, h * d), p.subspan(l.b1, h), d, x, f.hidden_pre);
  f.hidden.resize(h);
  for (std::size_t i = 0; i < h; ++i) f.hidden[i] = std::max(0.0, f.hidden_pre[i]);
  affine_dense(p.subspan(l.w2, c * h), p.subspan(l.b2, c), f.hidden, f.logits);
}

double log_sum_exp(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

}  // namespace

std::vector<double> Model::logits(const SparseRow& x) const {
  Forward f;
  forward(*this, x, f);
  return f.logits;
}

Model init_model(ModelSpec spec, std::size_t input_dim, std::vector<std::string> classes,
                 std::uint64_t seed) {
  Model m(spec, input_dim, std::move(classes));
  Rng rng(derive_seed(seed, "init"));
  auto p = m.parameters();
  auto fill = [&](std::size_t offset, std::size_t fan_in, std::size_t fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < fan_in * fan_out; ++i) p[offset + i] = rng.uniform(-a, a);
  };
  const auto l = layout(m);
  if (spec.arch == Architecture::linear) {
    fill(l.w1, input_dim, m.num_classes());
  } else {
    fill(l.w1, input_dim, m.hidden_dim());
    fill(l.w2, m.hidden_dim(), m.num_classes());
  }
  return m;
}

Model init_model(Architecture arch, std::size_t input_dim, std::size_t num_classes,
                 std::uint64_t seed) {
  std::vector<std::string> classes;
  for (std::size_t i = 0; i < num_classes; ++i) classes.push_back("class" + std::to_string(i));
  return init_model(ModelSpec{arch, 256}, input_dim, std::move(classes), seed);
}

double batch_loss_gradient(const Model& model, std::span<const SparseRow> rows,
                           std::span<const std::size_t> labels, std::vector<double>* grad) {
  if (rows.size() != labels.size() || rows.empty())
    throw ValidationError("batch needs equal, nonzero numbers of rows and labels");
  const std::size_t d = model.input_dim(), h = model.hidden_dim(), c = model.num_classes();
  const auto p = model.parameters();
  const auto l = layout(model);
  if (grad) grad->assign(model.parameter_count(), 0.0);

  const double inv_n = 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  Forward f;
  std::vector<double> dz(c), dh(h);
  for (std::size_t n = 0; n < rows.size(); ++n) {
    const SparseRow& x = rows[n];
    const std::size_t y = labels[n];
    forward(model, x, f);
    const double lse = log_sum_exp(f.logits);
    loss += lse - f.logits[y];
    if (!grad) continue;

    for (std::size_t k = 0; k < c; ++k) dz[k] = std::exp(f.logits[k] - lse) * inv_n;
    dz[y] -= inv_n;
    double* g = grad->data();
    if (model.arch() == Architecture::linear) {
      for (std::size_t k = 0; k < c; ++k) {
        double* gw = g + l.w1 + k * d;
        for (std::size_t j = 0; j < x.index.size(); ++j) gw[x.index[j]] += dz[k] * x.value[j];
        g[l.b1 + k] += dz[k];
      }
      continue;
    }
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t k = 0; k < c; ++k) {
      double* gw = g + l.w2 + k * h;
      const double* w = p.data() + l.w2 + k * h;
      for (std::size_t i = 0; i < h; ++i) {
        gw[i] += dz[k] * f.hidden[i];
        dh[i] += w[i] * dz[k];
      }
      g[l.b2 + k] += dz[k];
    }
    for (std::size_t i = 0; i < h; ++i) {
      if (f.hidden_pre[i] <= 0.0) continue;
      double* gw = g + l.w1 + i * d;
      for (std::size_t j = 0; j < x.index.size(); ++j) gw[x.index[j]] += dh[i] * x.value[j];
      g[l.b1 + i] += dh[i];
    }
  }
  return loss * inv_n;
}

void adam_update(Model& model, std::span<const double> grad, double lr,
                 const TrainConfig& cfg) {
  auto& opt = model.optimizer();
  auto p = model.parameters();
  if (grad.size() != p.size()) throw ValidationError("gradient size mismatch");
  const double t = static_cast<double>(opt.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = lr * cfg.weight_decay;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double& m = opt.first_moment[i];
    double& v = opt.second_moment[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad[i];
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad[i] * grad[i];
    p[i] -= lr * (m / bias1) / (std::sqrt(v / bias2) + cfg.eps);
    if (decay != 0.0 && model.is_weight(i)) p[i] -= decay * p[i];
  }
}

Featurized featurize(const Dataset& data, const Encoder& encoder, const Model& model) {
  if (encoder.dimension() != model.input_dim())
    throw ValidationError("encoder dimension " + std::to_string(encoder.dimension()) +
                          " does not match model input " + std::to_string(model.input_dim()));
  Featurized out;
  out.ids.reserve(data.size());
  out.rows.reserve(data.size());
  out.labels.reserve(data.size());
  for (const auto& s : data) {
    out.ids.push_back(s.id);
    out.rows.push_back(to_sparse(encoder.encode(s)));
    out.labels.push_back(model.class_index(s.label));
  }
  return out;
}

namespace {

[[noreturn]] void numeric_failure(const std::string& what, const Model& model,
                                  const Featurized& data, std::span<const std::size_t> batch) {
  std::string ids;
  for (std::size_t i = 0; i < batch.size() && i < 8; ++i) ids += (i ? "," : "") + data.ids[batch[i]];
  if (batch.size() > 8) ids += ",...";
  throw NumericError(what + " at step " + std::to_string(model.step_counter()) +
                     " (batch: " + ids + ")");
}

}  // namespace

Model train_stage(Model model, const Featurized& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.rows.empty()) throw ValidationError("cannot train on an empty dataset");
  const Schedule schedule{cfg.base_lr, cfg.warmup_steps};
  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, "shuffle");

  std::vector<std::size_t> order(data.rows.size());
  std::vector<SparseRow> batch_rows;
  std::vector<std::size_t> batch_labels;
  std::vector<double> grad;
  auto& opt = model.optimizer();
  for (std::size_t epoch = 0; epoch < cfg.epochs_per_stage; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg.shuffle) {
      Rng rng(derive_seed(shuffle_seed, opt.epoch));
      rng.shuffle(order);
    }
    ++opt.epoch;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      batch_rows.clear();
      batch_labels.clear();
      for (auto i : batch) {
        batch_rows.push_back(data.rows[i]);
        batch_labels.push_back(data.labels[i]);
      }
      ++opt.step;
      const double loss = batch_loss_gradient(model, batch_rows, batch_labels, &grad);
      if (!std::isfinite(loss)) numeric_failure("non-finite loss", model, data, batch);
      adam_update(model, grad, lr_at(schedule, opt.step), cfg);
      for (double v : model.parameters()) {
        if (!std::isfinite(v)) numeric_failure("non-finite parameter", model, data, batch);
      }
    }
  }
  return model;
}

Model train_stage(Model model, const Dataset& data, const Encoder& encoder,
                  const TrainConfig& cfg) {
  const Featurized features = featurize(data, encoder, model);
  return train_stage(std::move(model), features, cfg);
}

TrainResult two_stage_train(ModelSpec spec, const Dataset& stage1_data,
                            const Dataset& stage2_data, const Encoder& encoder,
                            const TrainConfig& cfg, std::vector<std::string> classes) {
  cfg.validate();
  if (stage2_data.empty()) throw ValidationError("stage 2 data is empty");
  if (classes.empty()) {
    classes = stage2_data.labels();
    for (const auto& label : stage1_data.labels()) {
      if (!stage2_data.has_label(label)) classes.push_back(label);
    }
  }
  TrainResult result{init_model(spec, encoder.dimension(), std::move(classes), cfg.seed), {}};
  auto run = [&](const Dataset& data) {
    StageRecord record{data.fingerprint(), data.size(), cfg.epochs_per_stage,
                       result.model.step_counter() + 1, 0};
    result.model = train_stage(std::move(result.model), data, encoder, cfg);
    record.last_step = result.model.step_counter();
    result.stages.push_back(std::move(record));
  };
  run(stage1_data);
  if (cfg.reset_stage2) {
    auto& opt = result.model.optimizer();
    std::fill(opt.first_moment.begin(), opt.first_moment.end(), 0.0);
    std::fill(opt.second_moment.begin(), opt.second_moment.end(), 0.0);
    opt.step = 0;
  }
  run(stage2_data);
  return result;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += out[i] = std::exp(logits[i] - top);
  for (double& v : out) v /= sum;
  return out;
}

Prediction predict(const Model& model, const SparseRow& features) {
  Prediction p;
  p.scores = softmax(model.logits(features));
  const auto best = std::max_element(p.scores.begin(), p.scores.end());
  p.label = model.classes()[static_cast<std::size_t>(best - p.scores.begin())];
  return p;
}

Prediction predict(const Model& model, const Encoder& encoder, const Sentence& sentence) {
  if (encoder.dimension() != model.input_dim())
    throw ValidationError("encoder dimension does not match model input");
  return predict(model, to_sparse(encoder.encode(sentence)));
}

namespace {

constexpr std::string_view kModelMagic = "ctiaug-model v1\n";

json config_json(const TrainConfig& cfg) {
  return {{"epochs_per_stage", cfg.epochs_per_stage}, {"batch_size", cfg.batch_size},
          {"base_lr", cfg.base_lr},                   {"warmup_steps", cfg.warmup_steps},
          {"beta1", cfg.beta1},                       {"beta2", cfg.beta2},
          {"eps", cfg.eps},                           {"weight_decay", cfg.weight_decay},
          {"seed", cfg.seed},                         {"shuffle", cfg.shuffle},
          {"reset_stage2", cfg.reset_stage2}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.epochs_per_stage = j.at("epochs_per_stage").get<std::size_t>();
  cfg.batch_size = j.at("batch_size").get<std::size_t>();
  cfg.base_lr = j.at("base_lr").get<double>();
  cfg.warmup_steps = j.at("warmup_steps").get<std::uint64_t>();
  cfg.beta1 = j.at("beta1").get<double>();
  cfg.beta2 = j.at("beta2").get<double>();
  cfg.eps = j.at("eps").get<double>();
  cfg.weight_decay = j.at("weight_decay").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.shuffle = j.at("shuffle").get<bool>();
  cfg.reset_stage2 = j.at("reset_stage2").get<bool>();
  return cfg;
}

void put_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffU);
  out.write(bytes, 8);
}

double get_le(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

json train_config_to_json(const TrainConfig& cfg) { return config_json(cfg); }

void write_model(const Model& model, const fs::path& path,
                 const std::string& encoder_fingerprint, const TrainConfig& cfg) {
  json header = {{"architecture", to_string(model.arch())},
                 {"input_dim", model.input_dim()},
                 {"hidden_dim", model.hidden_dim()},
                 {"classes", model.classes()},
                 {"encoder", encoder_fingerprint},
                 {"config", config_json(cfg)},
                 {"steps", model.step_counter()},
                 {"parameters", model.parameter_count()}};
  auto out = detail::open_for_write(path);
  out << kModelMagic << header.dump() << '\n';
  for (double v : model.parameters()) put_le(out, v);
  if (!out) throw ValidationError("failed writing " + path.string());
}

LoadedModel read_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string magic, header_line;
  std::getline(in, magic);
  if (magic + "\n" != kModelMagic) throw ValidationError(path.string() + ": not a model file");
  std::getline(in, header_line);
  json header;
  try {
    header = json::parse(header_line);
    const auto arch = parse_architecture(header.at("architecture").get<std::string>());
    const auto hidden = header.at("hidden_dim").get<std::size_t>();
    Model model(ModelSpec{arch, arch == Architecture::mlp1 ? hidden : 256},
                header.at("input_dim").get<std::size_t>(),
                header.at("classes").get<std::vector<std::string>>());
    const auto count = header.at("parameters").get<std::size_t>();
    if (count != model.parameter_count())
      throw ValidationError(path.string() + ": parameter count does not match header shape");
    std::vector<unsigned char> raw(count * 8);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
      throw ValidationError(path.string() + ": truncated parameter block");
    auto p = model.parameters();
    for (std::size_t i = 0; i < count; ++i) p[i] = get_le(raw.data() + 8 * i);
    model.optimizer().step = header.at("steps").get<std::uint64_t>();
    return LoadedModel{std::move(model), header.at("encoder").get<std::string>(),
                       config_from_json(header.at("config"))};
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": bad model header (" + e.what() + ")");
  }
}

}  // namespace ctiaug
