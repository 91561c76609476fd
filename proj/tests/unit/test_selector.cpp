#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "ctiaug/encoder.hpp"
#include "ctiaug/error.hpp"
#include "ctiaug/selector.hpp"
#include "support.hpp"

using namespace ctiaug;
using ctiaug::testing::make_dataset;
using ctiaug::testing::oracle_similarity_selection;
using ctiaug::testing::random_corpus;
using ctiaug::testing::TempDir;

namespace {

std::set<std::string> ids(const AugmentationPlan& plan) {
  std::set<std::string> out;
  for (const auto& s : plan.selected) out.insert(s.id);
  return out;
}

std::map<std::string, std::size_t> class_sizes(const Dataset& d) {
  std::map<std::string, std::size_t> out;
  for (const auto& s : d) ++out[s.label];
  return out;
}

Encoder fit(const Dataset& a, const Dataset& b) {
  std::vector<Sentence> all(a.begin(), a.end());
  for (const auto& s : b) {
    Sentence t = s;
    t.id = "aux:" + t.id;
    all.push_back(t);
  }
  return Encoder::fit_hashed(Dataset(std::move(all), Source::mixed), 256, {1, 2});
}

}  // namespace

TEST(Similarity, IsMaxCosineOverClass) {
  const auto enc = Encoder::from_vectors(
      {{"q", {1, 0}}, {"p1", {0.2, 0.9797958971}}, {"p2", {0.9, 0.4358898944}}, {"p3", {0.5, 0.8660254038}}},
      2);
  const auto primary = make_dataset({{"A", "x"}, {"A", "y"}, {"A", "z"}}, Source::primary, "p");
  std::vector<Sentence> members;
  for (std::size_t i = 0; i < primary.size(); ++i) {
    Sentence s = primary.sentences()[i];
    s.id = "p" + std::to_string(i + 1);
    members.push_back(s);
  }
  EXPECT_NEAR(similarity_to_class({"q", "t", "A"}, members, enc), 0.9, 1e-9);
  EXPECT_THROW(similarity_to_class({"q", "t", "A"}, {}, enc), ValidationError);
}

TEST(SimMinority, PicksTopSevenOfTwenty) {
  std::vector<std::pair<std::string, std::string>> prows{
      {"M", "alpha beta gamma"}, {"M", "alpha delta"}, {"M", "beta epsilon"}};
  for (int i = 0; i < 12; ++i) prows.push_back({"Big", "omega w" + std::to_string(i)});
  const auto primary = make_dataset(prows, Source::primary, "p");
  std::vector<std::pair<std::string, std::string>> arows;
  const char* words[] = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"};
  std::mt19937_64 gen(4);
  for (int i = 0; i < 20; ++i) {
    std::string t;
    for (int j = 0; j < 4; ++j) t += std::string(j ? " " : "") + words[gen() % 8];
    arows.push_back({"M", t + " n" + std::to_string(i)});
  }
  const auto aux = make_dataset(arows, Source::auxiliary, "a");
  const auto enc = fit(primary, aux);
  const auto plan = select_sim_minority(primary, aux, 10, enc);
  EXPECT_EQ(plan.selected.size(), 7u);
  EXPECT_EQ(ids(plan), oracle_similarity_selection(primary, aux, 10, enc, true));
  for (std::size_t i = 1; i < plan.selected.size(); ++i)
    EXPECT_GE(*plan.selected[i - 1].score, *plan.selected[i].score);
  for (const auto& s : plan.selected) EXPECT_EQ(s.label, "M");
}

TEST(SimMinority, TiesBreakByAscendingId) {
  const auto primary = make_dataset({{"A", "x y"}}, Source::primary, "p");
  const auto aux = make_dataset({{"A", "x q"}, {"A", "x q"}, {"A", "x q"}}, Source::auxiliary, "a");
  std::vector<Sentence> rev(aux.sentences().rbegin(), aux.sentences().rend());
  const Dataset shuffled(rev, Source::auxiliary);
  const auto enc = fit(primary, aux);
  const auto plan = select_sim_minority(primary, shuffled, 3, enc);
  ASSERT_EQ(plan.selected.size(), 2u);
  EXPECT_EQ(plan.selected[0].id, "a0");
  EXPECT_EQ(plan.selected[1].id, "a1");
}

TEST(SimMinority, ExcludesTextsAlreadyInPrimary) {
  const auto primary = make_dataset({{"A", "shared text"}, {"B", "other words"}}, Source::primary, "p");
  const auto aux = make_dataset({{"A", "Shared   TEXT"}, {"B", "shared text"}, {"A", "fresh text"}},
                                Source::auxiliary, "a");
  const auto enc = fit(primary, aux);
  for (auto s : {Strategy::sim_minority, Strategy::sim_all, Strategy::rand_minority, Strategy::rand_all}) {
    const auto plan = build_plan(s, primary, aux, 5, 1, &enc);
    EXPECT_EQ(ids(plan), (std::set<std::string>{"a2"})) << to_string(s);
  }
}

TEST(SimMinority, MatchesOracleOnRandomCorpora) {
  for (std::uint64_t t = 0; t < 15; ++t) {
    std::mt19937_64 gen(100 + t);
    const auto primary = random_corpus(gen, 30 + gen() % 40, 6, Source::primary, "p");
    const auto aux = random_corpus(gen, 60 + gen() % 80, 6, Source::auxiliary, "a");
    const auto enc = fit(primary, aux);
    for (std::size_t k : {1u, 5u, 10u}) {
      EXPECT_EQ(ids(select_sim_minority(primary, aux, k, enc)),
                oracle_similarity_selection(primary, aux, k, enc, true));
      EXPECT_EQ(ids(select_sim_all(primary, aux, k, enc)),
                oracle_similarity_selection(primary, aux, k, enc, false));
    }
  }
}

TEST(SimMinority, MonotoneInK) {
  std::mt19937_64 gen(8);
  const auto primary = random_corpus(gen, 40, 5, Source::primary, "p");
  const auto aux = random_corpus(gen, 150, 5, Source::auxiliary, "a");
  const auto enc = fit(primary, aux);
  for (std::size_t k = 1; k < 20; ++k) {
    const auto small = select_sim_all(primary, aux, k, enc);
    const auto large = select_sim_all(primary, aux, k + 1, enc);
    for (const auto& id : ids(small)) EXPECT_TRUE(ids(large).contains(id)) << k;
  }
}

TEST(SimMinority, AugmentedMinoritySizes) {
  std::mt19937_64 gen(12);
  const auto primary = random_corpus(gen, 50, 8, Source::primary, "p");
  const auto aux = random_corpus(gen, 90, 8, Source::auxiliary, "a");
  const auto enc = fit(primary, aux);
  const std::size_t k = 10;
  const auto plan = select_sim_minority(primary, aux, k, enc);
  const auto augmented = apply_plan(primary, aux, plan);
  const auto before = class_sizes(primary);
  const auto after = class_sizes(augmented);
  std::set<std::string> primary_texts;
  for (const auto& s : primary) primary_texts.insert(normalize(s.text));
  for (const auto& [label, n] : before) {
    std::size_t eligible = 0;
    for (const auto& s : aux) eligible += s.label == label && !primary_texts.contains(normalize(s.text));
    const std::size_t expect = n >= k ? n : std::min(k, n + eligible);
    EXPECT_EQ(after.at(label), expect) << label;
  }
}

TEST(ApplyPlan, NoneIsIdentity) {
  std::mt19937_64 gen(1);
  const auto primary = random_corpus(gen, 25, 4, Source::primary, "p");
  const auto out = apply_plan(primary, Dataset{}, plan_none());
  EXPECT_EQ(out.fingerprint(), primary.fingerprint());
  EXPECT_EQ(build_plan(Strategy::none, primary, Dataset{}, 10, 3, nullptr), plan_none());
}

TEST(ApplyPlan, OrdersAdditionsByClassThenId) {
  const auto primary = make_dataset({{"B", "b"}, {"A", "a"}}, Source::primary, "p");
  const auto aux = make_dataset({{"A", "a2"}, {"B", "b2"}, {"A", "a3"}}, Source::auxiliary, "a");
  const auto plan = select_all_auxiliary(primary, aux);
  const auto out = apply_plan(primary, aux, plan);
  std::vector<std::string> got;
  for (const auto& s : out) got.push_back(s.id);
  EXPECT_EQ(got, (std::vector<std::string>{"p0", "p1", "a1", "a0", "a2"}));
  EXPECT_EQ(out.labels(), primary.labels());
}

TEST(ApplyPlan, RejectsInconsistentPlans) {
  const auto primary = make_dataset({{"A", "a"}}, Source::primary, "p");
  const auto aux = make_dataset({{"A", "x"}, {"Z", "z"}}, Source::auxiliary, "a");
  AugmentationPlan plan{Strategy::sim_all, 10, 0, {}, {{"missing", "A", {}, {}}}, {}};
  EXPECT_THROW(apply_plan(primary, aux, plan), ValidationError);
  plan.selected = {{"a0", "Z", {}, {}}};
  EXPECT_THROW(apply_plan(primary, aux, plan), ValidationError);
  plan.selected = {{"a1", "A", {}, {}}};
  EXPECT_THROW(apply_plan(primary, aux, plan), ValidationError);
}

TEST(AllAuxiliary, RestrictsToPrimaryCatalog) {
  const auto primary = make_dataset({{"A", "a"}}, Source::primary, "p");
  const auto aux = make_dataset({{"A", "x"}, {"Z", "z"}, {"A", "y"}}, Source::auxiliary, "a");
  const auto plan = select_all_auxiliary(primary, aux);
  EXPECT_EQ(ids(plan), (std::set<std::string>{"a0", "a2"}));
  EXPECT_FALSE(plan.notices.empty());
}

TEST(Oversample, CopiesTopMinorityUpToK) {
  const auto primary = make_dataset({{"A", "a one"}, {"A", "a two"}, {"B", "b one two three four"},
                                     {"C", "c"}, {"C", "c2"}, {"C", "c3"}},
                                    Source::primary, "p");
  const auto plan = oversample_same(primary, 3, 7);
  const auto sizes = class_sizes(apply_plan(primary, primary, plan));
  EXPECT_EQ(sizes.at("A"), 3u);
  EXPECT_EQ(sizes.at("B"), 3u);
  EXPECT_EQ(sizes.at("C"), 3u);
  for (const auto& s : plan.selected) {
    EXPECT_EQ(s.id.substr(0, s.origin_id.size() + 5), s.origin_id + "#copy");
    EXPECT_EQ(primary.find(s.origin_id)->label, s.label);
  }
  EXPECT_EQ(plan, oversample_same(primary, 3, 7));
}

TEST(Oversample, SwapPermutesTokensDeterministically) {
  const auto primary = make_dataset({{"A", "t0 t1 t2 t3 t4 t5 t6 t7 t8 t9 t10 t11"}}, Source::primary, "p");
  const auto plan = oversample_swap(primary, 4, 9);
  const auto a = apply_plan(primary, primary, plan);
  const auto b = apply_plan(primary, primary, plan);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  const auto& orig = primary.sentences()[0].text;
  std::multiset<std::string> want;
  for (const auto& t : {"t0", "t1", "t2", "t3", "t4", "t5", "t6", "t7", "t8", "t9", "t10", "t11"}) want.insert(t);
  for (std::size_t i = 1; i < a.size(); ++i) {
    const auto& text = a.sentences()[i].text;
    EXPECT_NE(text, orig);
    std::multiset<std::string> got;
    std::istringstream in(text);
    for (std::string t; in >> t;) got.insert(t);
    EXPECT_EQ(got, want);
  }
  EXPECT_EQ(swap_tokens("solo", 3), "solo");
}

TEST(RandomStrategies, DeterministicPerSeedAndSizedLikeSimilarity) {
  std::mt19937_64 gen(21);
  const auto primary = random_corpus(gen, 40, 6, Source::primary, "p");
  const auto aux = random_corpus(gen, 120, 6, Source::auxiliary, "a");
  const auto enc = fit(primary, aux);
  EXPECT_EQ(select_rand_minority(primary, aux, 10, 5), select_rand_minority(primary, aux, 10, 5));
  EXPECT_EQ(select_rand_all(primary, aux, 10, 5), select_rand_all(primary, aux, 10, 5));
  EXPECT_NE(ids(select_rand_all(primary, aux, 10, 5)), ids(select_rand_all(primary, aux, 10, 6)));
  EXPECT_EQ(class_sizes(apply_plan(primary, aux, select_rand_minority(primary, aux, 10, 5))),
            class_sizes(apply_plan(primary, aux, select_sim_minority(primary, aux, 10, enc))));
  EXPECT_EQ(select_rand_all(primary, aux, 10, 5).selected.size(),
            select_sim_all(primary, aux, 10, enc).selected.size());
}

TEST(Selector, ValidationErrors) {
  const auto primary = make_dataset({{"A", "a"}}, Source::primary, "p");
  const auto aux = make_dataset({{"A", "x"}}, Source::auxiliary, "a");
  const auto enc = fit(primary, aux);
  EXPECT_THROW(select_sim_minority(primary, aux, 0, enc), ValidationError);
  EXPECT_THROW(select_rand_all(primary, aux, 0, 1), ValidationError);
  EXPECT_THROW(oversample_same(primary, 0, 1), ValidationError);
  EXPECT_THROW(build_plan(Strategy::sim_all, primary, aux, 3, 1, nullptr), ValidationError);
  EXPECT_THROW(parse_strategy("bogus"), ValidationError);
  for (auto s : {Strategy::none, Strategy::sim_minority, Strategy::rand_minority, Strategy::sim_all,
                 Strategy::rand_all, Strategy::oversample_same, Strategy::oversample_swap,
                 Strategy::all_auxiliary})
    EXPECT_EQ(parse_strategy(to_string(s)), s);
}

TEST(Selector, SkipsClassesWithoutCandidates) {
  const auto primary = make_dataset({{"A", "a"}, {"B", "b"}}, Source::primary, "p");
  const auto aux = make_dataset({{"A", "x"}}, Source::auxiliary, "a");
  const auto plan = select_rand_minority(primary, aux, 3, 1);
  EXPECT_EQ(ids(plan), (std::set<std::string>{"a0"}));
  ASSERT_EQ(plan.notices.size(), 1u);
  EXPECT_NE(plan.notices[0].find("B"), std::string::npos);
}

TEST(PlanFile, RoundTripAndFingerprint) {
  TempDir dir("plan");
  std::mt19937_64 gen(2);
  const auto primary = random_corpus(gen, 30, 4, Source::primary, "p");
  const auto aux = random_corpus(gen, 80, 4, Source::auxiliary, "a");
  const auto enc = fit(primary, aux);
  for (auto s : {Strategy::sim_minority, Strategy::oversample_swap, Strategy::rand_all}) {
    const auto plan = build_plan(s, primary, aux, 12, 4, &enc);
    write_plan(plan, dir / "plan.jsonl");
    const auto back = read_plan(dir / "plan.jsonl");
    EXPECT_EQ(back, plan);
    EXPECT_EQ(plan_fingerprint(back), plan_fingerprint(plan));
  }
  EXPECT_NE(plan_fingerprint(select_rand_all(primary, aux, 12, 1)),
            plan_fingerprint(select_rand_all(primary, aux, 12, 2)));
}
