#include "ctiaug/corpus.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "ctiaug/error.hpp"
#include "ctiaug/hashing.hpp"
#include "ctiaug/random.hpp"
#include "jsonl.hpp"

namespace ctiaug {

namespace fs = std::filesystem;
using detail::json;

std::string_view to_string(Source source) {
  switch (source) {
    case Source::primary: return "primary";
    case Source::auxiliary: return "auxiliary";
    case Source::mixed: return "mixed";
  }
  return "mixed";
}

Source parse_source(std::string_view name) {
  if (name == "primary") return Source::primary;
  if (name == "auxiliary") return Source::auxiliary;
  if (name == "mixed") return Source::mixed;
  throw ValidationError("unknown source tag `" + std::string(name) + "`");
}

Dataset::Dataset(std::vector<Sentence> sentences, Source source,
                 std::span<const std::string> label_order)
    : sentences_(std::move(sentences)), source_(source) {
  std::set<std::string, std::less<>> observed;
  for (std::size_t i = 0; i < sentences_.size(); ++i) {
    const Sentence& s = sentences_[i];
    if (s.id.empty()) throw ValidationError("sentence with empty id");
    if (normalize(s.text).empty())
      throw ValidationError("sentence `" + s.id + "` has empty text");
    if (s.label.empty())
      throw ValidationError("sentence `" + s.id + "` has empty label");
    if (!id_index_.emplace(s.id, i).second)
      throw ValidationError("duplicate sentence id `" + s.id + "`");
    observed.insert(s.label);
  }
  for (const auto& label : label_order) {
    if (observed.contains(label) && !label_index_.contains(label)) {
      label_index_.emplace(label, labels_.size());
      labels_.push_back(label);
    }
  }
  for (const auto& s : sentences_) {
    if (!label_index_.contains(s.label)) {
      label_index_.emplace(s.label, labels_.size());
      labels_.push_back(s.label);
    }
  }
  members_.resize(labels_.size());
  for (std::size_t i = 0; i < sentences_.size(); ++i)
    members_[label_index_.at(sentences_[i].label)].push_back(i);
}

const Sentence* Dataset::find(std::string_view id) const {
  auto it = id_index_.find(std::string(id));
  return it == id_index_.end() ? nullptr : &sentences_[it->second];
}

bool Dataset::has_label(std::string_view label) const {
  return label_index_.contains(std::string(label));
}

std::size_t Dataset::label_index(std::string_view label) const {
  auto it = label_index_.find(std::string(label));
  if (it == label_index_.end())
    throw ValidationError("label `" + std::string(label) + "` not in catalog");
  return it->second;
}

std::span<const std::size_t> Dataset::members_of(std::string_view label) const {
  auto it = label_index_.find(std::string(label));
  if (it == label_index_.end()) return {};
  return members_[it->second];
}

std::string Dataset::fingerprint() const {
  Fingerprint fp;
  fp.add(to_string(source_)).add(static_cast<std::uint64_t>(labels_.size()));
  for (const auto& label : labels_) fp.add(label);
  fp.add(static_cast<std::uint64_t>(sentences_.size()));
  for (const auto& s : sentences_)
    fp.add(s.id).add(s.text).add(s.label).add(to_string(s.source)).add(s.origin_id);
  return fp.hex();
}

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    const bool space = ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' ||
                       ch == '\v' || ch == '\f';
    if (space) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(ch >= 'A' && ch <= 'Z' ? static_cast<char>(ch - 'A' + 'a') : ch);
  }
  return out;
}

Dataset load_dataset(const fs::path& path, Source source) {
  std::vector<Sentence> sentences;
  std::set<std::string, std::less<>> ids;
  detail::for_each_record(path, [&](const json& record, std::size_t line_no) {
    Sentence s;
    s.text = detail::require_string(record, "text", path, line_no);
    s.label = detail::require_string(record, "label", path, line_no);
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (auto it = record.find("id"); it != record.end() && !it->is_null()) {
      if (!it->is_string()) throw ValidationError(where + ": `id` must be a string");
      s.id = it->get<std::string>();
    } else {
      s.id = std::string(to_string(source)) + "-line-" + std::to_string(line_no);
    }
    if (s.id.empty()) throw ValidationError(where + ": empty id");
    if (normalize(s.text).empty()) throw ValidationError(where + ": empty text");
    if (s.label.empty()) throw ValidationError(where + ": empty label");
    if (!ids.insert(s.id).second)
      throw ValidationError(where + ": duplicate id `" + s.id + "`");
    s.source = source;
    sentences.push_back(std::move(s));
  });
  if (sentences.empty()) throw ValidationError(path.string() + ": empty dataset file");
  return Dataset(std::move(sentences), source);
}

void write_dataset(const Dataset& dataset, const fs::path& path) {
  auto out = detail::open_for_write(path);
  for (const auto& s : dataset) {
    json record = {{"id", s.id}, {"text", s.text}, {"label", s.label}};
    if (dataset.source() == Source::mixed) record["source"] = to_string(s.source);
    if (!s.origin_id.empty()) record["origin_id"] = s.origin_id;
    out << record.dump() << '\n';
  }
}

Dataset deduplicate(const Dataset& dataset) {
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<Sentence> kept;
  for (const auto& s : dataset) {
    if (seen.emplace(normalize(s.text), s.label).second) kept.push_back(s);
  }
  return Dataset(std::move(kept), dataset.source(), dataset.labels());
}

LabelMapping load_label_mapping(const fs::path& path) {
  LabelMapping mapping;
  detail::for_each_record(path, [&](const json& record, std::size_t line_no) {
    auto from = detail::require_string(record, "from", path, line_no);
    auto to = detail::require_string(record, "to", path, line_no);
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (to.empty()) throw ValidationError(where + ": empty `to` label");
    auto [it, inserted] = mapping.emplace(from, to);
    if (!inserted && it->second != to)
      throw ValidationError(where + ": conflicting mapping for `" + from + "`");
  });
  return mapping;
}

Dataset merge_labels(const Dataset& dataset, const LabelMapping& mapping) {
  auto relabel = [&](const std::string& label) -> const std::string& {
    auto it = mapping.find(label);
    return it == mapping.end() ? label : it->second;
  };
  std::vector<std::string> order;
  for (const auto& label : dataset.labels()) order.push_back(relabel(label));
  std::vector<Sentence> out = dataset.sentences();
  for (auto& s : out) s.label = relabel(s.label);
  return Dataset(std::move(out), dataset.source(), order);
}

Dataset filter_min_class_size(const Dataset& dataset, std::size_t min_count) {
  if (min_count < 1) throw ValidationError("min_count must be >= 1");
  std::vector<Sentence> kept;
  for (const auto& s : dataset) {
    if (dataset.members_of(s.label).size() >= min_count) kept.push_back(s);
  }
  return Dataset(std::move(kept), dataset.source(), dataset.labels());
}

std::array<std::size_t, 3> split_sizes(std::size_t n, SplitRatio ratio) {
  const std::array<std::size_t, 3> weights{ratio.train, ratio.dev, ratio.test};
  const std::size_t total = weights[0] + weights[1] + weights[2];
  if (total == 0) throw ValidationError("split ratio must have a positive weight");
  std::array<std::size_t, 3> sizes{};
  std::array<std::size_t, 3> remainders{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    sizes[i] = n * weights[i] / total;
    remainders[i] = n * weights[i] % total;
    assigned += sizes[i];
  }
  // Leftover units go to the largest remainders; stable sort keeps
  // train > dev > test on ties.
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainders[a] > remainders[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[order[i % 3]];

  if (n >= 3) {
    for (int i = 0; i < 3; ++i) {
      if (sizes[i] > 0) continue;
      auto donor = std::max_element(sizes.begin(), sizes.end());
      --*donor;
      ++sizes[i];
    }
  }
  return sizes;
}

SplitBundle stratified_split(const Dataset& dataset, SplitRatio ratio,
                             std::uint64_t seed) {
  // 0 = train, 1 = dev, 2 = test, per sentence index.
  std::vector<int> assignment(dataset.size(), -1);
  for (std::size_t c = 0; c < dataset.labels().size(); ++c) {
    const auto& label = dataset.labels()[c];
    std::vector<std::size_t> members = dataset.members()[c];
    if (members.size() < 3)
      throw ValidationError("class `" + label + "` has " +
                            std::to_string(members.size()) +
                            " members; stratified split needs at least 3");
    Rng rng(derive_seed(seed, label));
    rng.shuffle(members);

    auto remaining = split_sizes(members.size(), ratio);
    std::size_t next = 0;
    for (int split = 0; split < 3 && next < members.size(); ++split) {
      if (remaining[split] == 0) continue;
      assignment[members[next++]] = split;
      --remaining[split];
    }
    for (int split = 0; split < 3; ++split) {
      for (; remaining[split] > 0; --remaining[split])
        assignment[members[next++]] = split;
    }
  }

  std::array<std::vector<Sentence>, 3> parts;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    parts[assignment[i]].push_back(dataset.sentences()[i]);
  return SplitBundle{Dataset(std::move(parts[0]), dataset.source(), dataset.labels()),
                     Dataset(std::move(parts[1]), dataset.source(), dataset.labels()),
                     Dataset(std::move(parts[2]), dataset.source(), dataset.labels())};
}

std::map<std::string, std::size_t> class_histogram(const Dataset& dataset) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : dataset) ++counts[s.label];
  return counts;
}

namespace {

fs::path with_suffix(const fs::path& stem, const std::string& suffix) {
  return fs::path(stem.string() + suffix);
}

}  // namespace

void write_split(const SplitBundle& bundle, const fs::path& stem, SplitRatio ratio,
                 std::uint64_t seed) {
  write_dataset(bundle.train, with_suffix(stem, ".train"));
  write_dataset(bundle.dev, with_suffix(stem, ".dev"));
  write_dataset(bundle.test, with_suffix(stem, ".test"));

  json per_class = json::object();
  const auto train = class_histogram(bundle.train);
  const auto dev = class_histogram(bundle.dev);
  const auto test = class_histogram(bundle.test);
  auto count = [](const auto& hist, const std::string& label) -> std::size_t {
    auto it = hist.find(label);
    return it == hist.end() ? 0 : it->second;
  };
  for (const auto& label : bundle.train.labels()) {
    per_class[label] = {count(train, label), count(dev, label), count(test, label)};
  }
  json manifest = {
      {"seed", seed},
      {"ratio", {ratio.train, ratio.dev, ratio.test}},
      {"sizes", {bundle.train.size(), bundle.dev.size(), bundle.test.size()}},
      {"num_classes", bundle.train.labels().size()},
      {"per_class", per_class},
  };
  auto out = detail::open_for_write(with_suffix(stem, ".manifest.json"));
  out << manifest.dump(2) << '\n';
}

SplitBundle load_split(const fs::path& stem) {
  auto train = load_dataset(with_suffix(stem, ".train"), Source::primary);
  auto dev = load_dataset(with_suffix(stem, ".dev"), Source::primary);
  auto test = load_dataset(with_suffix(stem, ".test"), Source::primary);
  return SplitBundle{std::move(train), std::move(dev), std::move(test)};
}

}  // namespace ctiaug
