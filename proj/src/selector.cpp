#include "ctiaug/selector.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "ctiaug/error.hpp"
#include "ctiaug/hashing.hpp"
#include "ctiaug/random.hpp"
#include "jsonl.hpp"

namespace ctiaug {

namespace fs = std::filesystem;
using detail::json;

namespace {

constexpr std::pair<Strategy, std::string_view> kStrategyNames[] = {
    {Strategy::none, "none"},
    {Strategy::sim_minority, "sim_minority"},
    {Strategy::rand_minority, "rand_minority"},
    {Strategy::sim_all, "sim_all"},
    {Strategy::rand_all, "rand_all"},
    {Strategy::oversample_same, "oversample_same"},
    {Strategy::oversample_swap, "oversample_swap"},
    {Strategy::all_auxiliary, "all_auxiliary"},
};

struct ClassPool {
  std::string label;
  std::vector<std::size_t> primary;     // indices into the primary dataset
  std::vector<std::size_t> candidates;  // indices into the auxiliary dataset
};

std::vector<ClassPool> class_pools(const Dataset& primary, const Dataset& auxiliary) {
  std::set<std::string> primary_texts;
  for (const auto& s : primary) primary_texts.insert(normalize(s.text));

  std::vector<ClassPool> pools;
  for (std::size_t c = 0; c < primary.labels().size(); ++c) {
    ClassPool pool{primary.labels()[c], primary.members()[c], {}};
    for (auto i : auxiliary.members_of(pool.label)) {
      if (!primary_texts.contains(normalize(auxiliary.sentences()[i].text)))
        pool.candidates.push_back(i);
    }
    pools.push_back(std::move(pool));
  }
  return pools;
}

/// How many auxiliary sentences class `pool` may receive.
std::size_t quota(const ClassPool& pool, std::size_t k, bool minority_only) {
  if (!minority_only) return k;
  return pool.primary.size() >= k ? 0 : k - pool.primary.size();
}

void note_skip(AugmentationPlan& plan, const ClassPool& pool) {
  plan.notices.push_back("class `" + pool.label +
                         "` has no auxiliary candidates; skipped");
}

AugmentationPlan select_by_similarity(Strategy strategy, const Dataset& primary,
                                      const Dataset& auxiliary, std::size_t k,
                                      const Encoder& encoder, bool minority_only) {
  if (k < 1) throw ValidationError("k must be >= 1");
  AugmentationPlan plan{strategy, k, 0, encoder.fingerprint(), {}, {}};
  for (const auto& pool : class_pools(primary, auxiliary)) {
    const std::size_t want = quota(pool, k, minority_only);
    if (want == 0) continue;
    if (pool.candidates.empty()) {
      note_skip(plan, pool);
      continue;
    }
    std::vector<Vector> members;
    members.reserve(pool.primary.size());
    for (auto i : pool.primary) members.push_back(encoder.encode(primary.sentences()[i]));

    struct Scored {
      double score;
      const Sentence* sentence;
    };
    std::vector<Scored> scored;
    for (auto i : pool.candidates) {
      const Sentence& aux = auxiliary.sentences()[i];
      const Vector v = encoder.encode(aux);
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& m : members) best = std::max(best, cosine(v, m));
      scored.push_back({best, &aux});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.sentence->id < b.sentence->id;
    });
    const std::size_t take = std::min(want, scored.size());
    for (std::size_t j = 0; j < take; ++j)
      plan.selected.push_back({scored[j].sentence->id, pool.label, scored[j].score, {}});
  }
  return plan;
}

AugmentationPlan select_randomly(Strategy strategy, const Dataset& primary,
                                 const Dataset& auxiliary, std::size_t k,
                                 std::uint64_t seed, bool minority_only) {
  if (k < 1) throw ValidationError("k must be >= 1");
  AugmentationPlan plan{strategy, k, seed, {}, {}, {}};
  for (const auto& pool : class_pools(primary, auxiliary)) {
    const std::size_t want = quota(pool, k, minority_only);
    if (want == 0) continue;
    if (pool.candidates.empty()) {
      note_skip(plan, pool);
      continue;
    }
    std::vector<std::size_t> order = pool.candidates;
    Rng rng(derive_seed(seed, pool.label));
    rng.shuffle(order);
    const std::size_t take = std::min(want, order.size());
    for (std::size_t j = 0; j < take; ++j)
      plan.selected.push_back({auxiliary.sentences()[order[j]].id, pool.label, {}, {}});
  }
  return plan;
}

AugmentationPlan oversample(Strategy strategy, const Dataset& primary, std::size_t k,
                            std::uint64_t seed) {
  if (k < 1) throw ValidationError("k must be >= 1");
  AugmentationPlan plan{strategy, k, seed, {}, {}, {}};
  for (std::size_t c = 0; c < primary.labels().size(); ++c) {
    const auto& members = primary.members()[c];
    if (members.empty() || members.size() >= k) continue;
    const auto& label = primary.labels()[c];
    Rng rng(derive_seed(seed, label));
    for (std::size_t j = 1; j <= k - members.size(); ++j) {
      const Sentence& origin = primary.sentences()[members[rng.uniform_index(members.size())]];
      plan.selected.push_back(
          {origin.id + "#copy" + std::to_string(j), label, {}, origin.id});
    }
  }
  return plan;
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  for (std::string t; in >> t;) tokens.push_back(std::move(t));
  return tokens;
}

}  // namespace

std::string_view to_string(Strategy strategy) {
  for (const auto& [s, name] : kStrategyNames) {
    if (s == strategy) return name;
  }
  return "none";
}

Strategy parse_strategy(std::string_view name) {
  for (const auto& [s, n] : kStrategyNames) {
    if (n == name) return s;
  }
  throw ValidationError("unknown strategy `" + std::string(name) + "`");
}

bool draws_from_primary(Strategy strategy) {
  return strategy == Strategy::oversample_same || strategy == Strategy::oversample_swap;
}

bool is_random(Strategy strategy) {
  return strategy == Strategy::rand_minority || strategy == Strategy::rand_all ||
         draws_from_primary(strategy);
}

double similarity_to_class(const Sentence& aux, std::span<const Sentence> primary_class,
                           const Encoder& encoder) {
  if (primary_class.empty())
    throw ValidationError("similarity against an empty class");
  const Vector v = encoder.encode(aux);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : primary_class) best = std::max(best, cosine(v, encoder.encode(p)));
  return best;
}

AugmentationPlan select_sim_minority(const Dataset& primary, const Dataset& auxiliary,
                                     std::size_t k, const Encoder& encoder) {
  return select_by_similarity(Strategy::sim_minority, primary, auxiliary, k, encoder, true);
}

AugmentationPlan select_rand_minority(const Dataset& primary, const Dataset& auxiliary,
                                      std::size_t k, std::uint64_t seed) {
  return select_randomly(Strategy::rand_minority, primary, auxiliary, k, seed, true);
}

AugmentationPlan select_sim_all(const Dataset& primary, const Dataset& auxiliary,
                                std::size_t k, const Encoder& encoder) {
  return select_by_similarity(Strategy::sim_all, primary, auxiliary, k, encoder, false);
}

AugmentationPlan select_rand_all(const Dataset& primary, const Dataset& auxiliary,
                                 std::size_t k, std::uint64_t seed) {
  return select_randomly(Strategy::rand_all, primary, auxiliary, k, seed, false);
}

AugmentationPlan select_all_auxiliary(const Dataset& primary, const Dataset& auxiliary) {
  AugmentationPlan plan{Strategy::all_auxiliary, 1, 0, {}, {}, {}};
  for (const auto& label : primary.labels()) {
    const auto members = auxiliary.members_of(label);
    if (members.empty()) plan.notices.push_back("class `" + label + "` has no auxiliary data");
    for (auto i : members) plan.selected.push_back({auxiliary.sentences()[i].id, label, {}, {}});
  }
  for (const auto& label : auxiliary.labels()) {
    if (!primary.has_label(label))
      plan.notices.push_back("auxiliary class `" + label + "` is not a primary class; skipped");
  }
  return plan;
}

AugmentationPlan oversample_same(const Dataset& primary, std::size_t k, std::uint64_t seed) {
  return oversample(Strategy::oversample_same, primary, k, seed);
}

AugmentationPlan oversample_swap(const Dataset& primary, std::size_t k, std::uint64_t seed) {
  return oversample(Strategy::oversample_swap, primary, k, seed);
}

AugmentationPlan plan_none() { return AugmentationPlan{}; }

AugmentationPlan build_plan(Strategy strategy, const Dataset& primary,
                            const Dataset& auxiliary, std::size_t k, std::uint64_t seed,
                            const Encoder* encoder) {
  auto need_encoder = [&]() -> const Encoder& {
    if (encoder == nullptr)
      throw ValidationError(std::string(to_string(strategy)) + " needs an encoder");
    return *encoder;
  };
  switch (strategy) {
    case Strategy::none: return plan_none();
    case Strategy::sim_minority: return select_sim_minority(primary, auxiliary, k, need_encoder());
    case Strategy::rand_minority: return select_rand_minority(primary, auxiliary, k, seed);
    case Strategy::sim_all: return select_sim_all(primary, auxiliary, k, need_encoder());
    case Strategy::rand_all: return select_rand_all(primary, auxiliary, k, seed);
    case Strategy::oversample_same: return oversample_same(primary, k, seed);
    case Strategy::oversample_swap: return oversample_swap(primary, k, seed);
    case Strategy::all_auxiliary: return select_all_auxiliary(primary, auxiliary);
  }
  return plan_none();
}

std::string swap_tokens(std::string_view text, std::uint64_t seed) {
  auto tokens = whitespace_tokens(text);
  const std::size_t n = tokens.size();
  if (n < 2) return std::string(text);
  const auto swaps = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.1 * n)));
  Rng rng(seed);
  for (std::size_t s = 0; s < swaps; ++s) {
    const auto i = rng.uniform_index(n);
    auto j = rng.uniform_index(n - 1);
    if (j >= i) ++j;
    std::swap(tokens[i], tokens[j]);
  }
  std::string out = tokens[0];
  for (std::size_t i = 1; i < n; ++i) out += ' ' + tokens[i];
  return out;
}

Dataset apply_plan(const Dataset& primary_train, const Dataset& pool,
                   const AugmentationPlan& plan) {
  if (plan.strategy == Strategy::none) return primary_train;

  std::vector<Sentence> added;
  added.reserve(plan.selected.size());
  for (const auto& sel : plan.selected) {
    if (!primary_train.has_label(sel.label))
      throw ValidationError("plan class `" + sel.label + "` is not a primary class");
    if (draws_from_primary(plan.strategy)) {
      const Sentence* origin = primary_train.find(sel.origin_id);
      if (origin == nullptr)
        throw ValidationError("plan copy `" + sel.id + "` refers to unknown sentence `" +
                              sel.origin_id + "`");
      if (origin->label != sel.label)
        throw ValidationError("plan copy `" + sel.id + "` changes class");
      Sentence copy = *origin;
      copy.id = sel.id;
      copy.origin_id = origin->id;
      if (plan.strategy == Strategy::oversample_swap)
        copy.text = swap_tokens(origin->text, derive_seed(plan.seed, sel.id));
      added.push_back(std::move(copy));
    } else {
      const Sentence* s = pool.find(sel.id);
      if (s == nullptr) throw ValidationError("plan id `" + sel.id + "` not found in pool");
      if (s->label != sel.label)
        throw ValidationError("plan id `" + sel.id + "` has class `" + s->label +
                              "`, plan says `" + sel.label + "`");
      added.push_back(*s);
    }
  }
  std::stable_sort(added.begin(), added.end(), [&](const Sentence& a, const Sentence& b) {
    const auto ca = primary_train.label_index(a.label);
    const auto cb = primary_train.label_index(b.label);
    if (ca != cb) return ca < cb;
    return a.id < b.id;
  });

  std::vector<Sentence> out = primary_train.sentences();
  out.insert(out.end(), std::make_move_iterator(added.begin()),
             std::make_move_iterator(added.end()));
  return Dataset(std::move(out), Source::mixed, primary_train.labels());
}

namespace {

json plan_header(const AugmentationPlan& plan) {
  return {{"strategy", to_string(plan.strategy)},
          {"k", plan.k},
          {"seed", plan.seed},
          {"encoder", plan.encoder_fingerprint.empty() ? json(nullptr)
                                                       : json(plan.encoder_fingerprint)}};
}

json selection_record(const Selection& sel) {
  return {{"class", sel.label},
          {"id", sel.id},
          {"score", sel.score ? json(*sel.score) : json(nullptr)},
          {"origin_id", sel.origin_id.empty() ? json(nullptr) : json(sel.origin_id)}};
}

}  // namespace

void write_plan(const AugmentationPlan& plan, const fs::path& path) {
  auto out = detail::open_for_write(path);
  out << plan_header(plan).dump() << '\n';
  for (const auto& sel : plan.selected) out << selection_record(sel).dump() << '\n';
}

AugmentationPlan read_plan(const fs::path& path) {
  AugmentationPlan plan;
  bool have_header = false;
  detail::for_each_record(path, [&](const json& record, std::size_t line_no) {
    const auto where = path.string() + ":" + std::to_string(line_no);
    try {
      if (!have_header) {
        plan.strategy = parse_strategy(record.at("strategy").get<std::string>());
        plan.k = record.at("k").get<std::size_t>();
        plan.seed = record.at("seed").get<std::uint64_t>();
        const auto& enc = record.at("encoder");
        if (!enc.is_null()) plan.encoder_fingerprint = enc.get<std::string>();
        have_header = true;
        return;
      }
      Selection sel;
      sel.label = record.at("class").get<std::string>();
      sel.id = record.at("id").get<std::string>();
      if (const auto& score = record.at("score"); !score.is_null())
        sel.score = score.get<double>();
      if (auto it = record.find("origin_id"); it != record.end() && !it->is_null())
        sel.origin_id = it->get<std::string>();
      plan.selected.push_back(std::move(sel));
    } catch (const json::exception& e) {
      throw ValidationError(where + ": bad plan record (" + e.what() + ")");
    }
  });
  if (!have_header) throw ValidationError(path.string() + ": empty plan file");
  return plan;
}

std::string plan_fingerprint(const AugmentationPlan& plan) {
  Fingerprint fp;
  fp.add(plan_header(plan).dump());
  for (const auto& sel : plan.selected) fp.add(selection_record(sel).dump());
  return fp.hex();
}

}  // namespace ctiaug
