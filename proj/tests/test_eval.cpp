#include <gtest/gtest.h>

#include <cmath>

#include "nesscore/eval.h"
#include "support.h"

using namespace nesscore;
using namespace nesscore::eval;

namespace {

std::vector<ExpressiveScore> random_corpus(std::uint64_t seed, int n = 8) {
  std::mt19937_64 rng(seed);
  std::vector<ExpressiveScore> out;
  for (int i = 0; i < n; ++i) out.push_back(testing_support::random_score(rng));
  return out;
}

ExpressiveScore from_p1_notes(std::initializer_list<int> notes) {
  ExpressiveScore s;
  for (int n : notes) {
    ExpressiveFrame f;
    if (n) f.p1 = {static_cast<std::uint8_t>(n), 10, 1};
    s.frames.push_back(f);
  }
  return s;
}

ExpressiveScore from_triangle(std::initializer_list<int> notes) {
  ExpressiveScore s;
  for (int n : notes) {
    ExpressiveFrame f;
    f.tr.note = static_cast<std::uint8_t>(n);
    s.frames.push_back(f);
  }
  return s;
}

}  // namespace

TEST(Poi, Examples) {
  const std::vector<int> a{0, 0, 69, 69, 0};
  EXPECT_EQ(find_pois<int>(a), (std::vector<std::size_t>{0, 2, 4}));
  const std::vector<int> b(5, 7);
  EXPECT_EQ(find_pois<int>(b), (std::vector<std::size_t>{0}));
  const std::vector<int> c{1, 2, 3};
  EXPECT_EQ(find_pois<int>(c), (std::vector<std::size_t>{0, 1, 2}));
  try {
    find_pois<int>(std::span<const int>{});
    FAIL();
  } catch (const EvalError& e) {
    EXPECT_EQ(e.kind(), EvalError::Kind::EmptySequence);
  }
}

TEST(Categories, Sizes) {
  auto sizes = [](Task t) {
    std::vector<int> out;
    for (const auto& c : categories(t)) out.push_back(c.alphabet_size);
    return out;
  };
  EXPECT_EQ(sizes(Task::Separated), (std::vector<int>{78, 78, 89, 17}));
  EXPECT_EQ(sizes(Task::Expressive), (std::vector<int>{16, 16, 16, 4, 4}));
  EXPECT_EQ(categories(Task::Blended).size(), 1u);
}

TEST(Categories, Names) {
  EXPECT_EQ(parse_task("expressive"), Task::Expressive);
  EXPECT_EQ(parse_model("chord-unigram"), ModelKind::ChordUnigram);
  EXPECT_EQ(model_name(ModelKind::NoteUnigram), "note-unigram");
  EXPECT_THROW(parse_task("nope"), std::invalid_argument);
  EXPECT_THROW(parse_model("lstm"), std::invalid_argument);
}

TEST(Encode, RejectsOutOfAlphabet) {
  ExpressiveScore s;
  ExpressiveFrame f;
  f.p1 = {20, 3, 0};
  s.frames.push_back(f);
  try {
    encode(s, Task::Separated);
    FAIL();
  } catch (const EvalError& e) {
    EXPECT_EQ(e.kind(), EvalError::Kind::AlphabetMismatch);
  }
}

TEST(Random, SeparatedClosedForm) {
  const auto corpus = random_corpus(1);
  const auto r = evaluate(fit(ModelKind::Random, {}, Task::Separated), corpus, Task::Separated);
  const double expect[4] = {std::log(78.0), std::log(78.0), std::log(89.0), std::log(17.0)};
  ASSERT_EQ(r.categories.size(), 4u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(r.categories[i].nll_poi, expect[i], 1e-12);
    EXPECT_NEAR(r.categories[i].nll_all, expect[i], 1e-12);
  }
  EXPECT_NEAR(r.aggregate.nll_poi, 16.0353, 1e-4);
  EXPECT_NEAR(r.aggregate.nll_all, r.aggregate.nll_poi, 1e-12);
  EXPECT_NEAR(r.aggregate.acc_all, (2.0 / 78 + 1.0 / 89 + 1.0 / 17) / 4, 1e-12);
}

TEST(Random, ExpressiveClosedForm) {
  const auto corpus = random_corpus(2);
  const auto r = evaluate(fit(ModelKind::Random, corpus, Task::Expressive), corpus, Task::Expressive);
  EXPECT_NEAR(r.aggregate.nll_all, 3 * std::log(16.0) + 2 * std::log(4.0), 1e-12);
  EXPECT_NEAR(r.aggregate.acc_all, (3.0 / 16 + 2.0 / 4) / 5, 1e-12);
  EXPECT_NEAR(r.aggregate.acc_all, 0.1375, 1e-12);
}

TEST(Random, BlendedClosedForm) {
  const auto corpus = random_corpus(3);
  const auto r = evaluate(fit(ModelKind::Random, {}, Task::Blended), corpus, Task::Blended);
  EXPECT_NEAR(r.aggregate.nll_all, 88 * std::log(2.0), 1e-9);
  EXPECT_NEAR(r.aggregate.nll_poi, 61.00, 0.005);
}

TEST(Unigram, SilentCorpusPredictsNoNote) {
  ExpressiveScore silent;
  silent.frames.resize(50);
  const std::vector<ExpressiveScore> corpus{silent};
  const auto m = fit(ModelKind::Unigram, corpus, Task::Separated);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(m.accuracy_credit(c, -1, 0), 1.0);
    EXPECT_EQ(m.accuracy_credit(c, -1, 1), 0.0);
  }
  EXPECT_EQ(evaluate(m, corpus, Task::Separated).aggregate.acc_all, 1.0);
}

TEST(Unigram, SmoothedCounts) {
  const std::vector<ExpressiveScore> corpus{from_p1_notes({60, 60, 0, 62})};
  const auto m = fit(ModelKind::Unigram, corpus, Task::Separated);
  EXPECT_DOUBLE_EQ(m.probability(0, -1, value_index(Task::Separated, 0, 60)), 3.0 / 82);
  EXPECT_DOUBLE_EQ(m.probability(0, -1, 0), 2.0 / 82);
  EXPECT_DOUBLE_EQ(m.probability(0, -1, value_index(Task::Separated, 0, 100)), 1.0 / 82);
  EXPECT_DOUBLE_EQ(m.probability(1, -1, 0), 5.0 / 82);
}

TEST(Unigram, TiesShareCredit) {
  const std::vector<ExpressiveScore> corpus{from_p1_notes({60, 0})};
  const auto m = fit(ModelKind::Unigram, corpus, Task::Separated);
  EXPECT_DOUBLE_EQ(m.accuracy_credit(0, -1, 0), 0.5);
  EXPECT_DOUBLE_EQ(m.accuracy_credit(0, -1, value_index(Task::Separated, 0, 60)), 0.5);
}

TEST(Bigram, SmoothedTransitions) {
  const std::vector<ExpressiveScore> corpus{from_triangle({21, 21, 22, 21})};
  const auto m = fit(ModelKind::Bigram, corpus, Task::Separated);
  const int a = value_index(Task::Separated, 2, 21), b = value_index(Task::Separated, 2, 22);
  EXPECT_DOUBLE_EQ(m.probability(2, -1, a), 2.0 / 90);
  EXPECT_DOUBLE_EQ(m.probability(2, a, a), 2.0 / 91);
  EXPECT_DOUBLE_EQ(m.probability(2, a, b), 2.0 / 91);
  EXPECT_DOUBLE_EQ(m.probability(2, b, a), 2.0 / 90);
  EXPECT_DOUBLE_EQ(m.probability(2, b, b), 1.0 / 90);
}

TEST(Bigram, PredictsPreviousValue) {
  const auto corpus = random_corpus(4);
  const auto m = fit(ModelKind::Bigram, corpus, Task::Separated);
  EXPECT_EQ(m.accuracy_credit(0, 5, 5), 1.0);
  EXPECT_EQ(m.accuracy_credit(0, 5, 6), 0.0);
  EXPECT_EQ(m.accuracy_credit(0, -1, 0), 0.0);
}

TEST(Bigram, PoiAccuracyIsZero) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto corpus = random_corpus(100 + seed, 4);
    for (Task t : {Task::Separated, Task::Expressive}) {
      const auto r = evaluate(fit(ModelKind::Bigram, corpus, t), corpus, t);
      for (const auto& c : r.categories) ASSERT_EQ(c.acc_poi, 0.0);
      ASSERT_EQ(r.aggregate.acc_poi, 0.0);
    }
  }
}

TEST(Distributions, SumToOne) {
  const auto corpus = random_corpus(5);
  for (Task t : {Task::Separated, Task::Expressive}) {
    for (ModelKind k : {ModelKind::Random, ModelKind::Unigram, ModelKind::Bigram}) {
      const auto m = fit(k, corpus, t);
      const auto cats = categories(t);
      for (std::size_t c = 0; c < cats.size(); ++c) {
        for (int prev = -1; prev < cats[c].alphabet_size; ++prev) {
          double sum = 0.0;
          for (int v = 0; v < cats[c].alphabet_size; ++v) {
            const double p = m.probability(c, prev, v);
            ASSERT_GT(p, 0.0);
            sum += p;
          }
          ASSERT_NEAR(sum, 1.0, 1e-9);
          if (k != ModelKind::Bigram) break;
        }
      }
    }
  }
}

TEST(ChordUnigram, HandComputed) {
  ExpressiveScore s = from_p1_notes({60, 60, 62});
  const std::vector<ExpressiveScore> corpus{s};
  const auto m = fit(ModelKind::ChordUnigram, corpus, Task::Blended);
  BlendedColumn a, b, unseen;
  a.set(60 - 21);
  b.set(62 - 21);
  unseen.set(0);
  EXPECT_DOUBLE_EQ(m.chord_probability(a), 3.0 / 6);
  EXPECT_DOUBLE_EQ(m.chord_probability(b), 2.0 / 6);
  EXPECT_DOUBLE_EQ(m.chord_probability(unseen), 1.0 / 6);
  EXPECT_EQ(m.chord_accuracy_credit(a), 1.0);
  EXPECT_EQ(m.chord_accuracy_credit(b), 0.0);
  const auto r = evaluate(m, corpus, Task::Blended);
  EXPECT_NEAR(r.aggregate.nll_all, -(2 * std::log(0.5) + std::log(2.0 / 6)) / 3, 1e-12);
  EXPECT_NEAR(r.aggregate.acc_all, 2.0 / 3, 1e-12);
}

TEST(ChordUnigram, MassSumsToOne) {
  const auto corpus = random_corpus(6);
  const auto m = fit(ModelKind::ChordUnigram, corpus, Task::Blended);
  std::unordered_map<ChordKey, BlendedColumn, ChordKeyHash> seen;
  for (const auto& s : corpus) {
    for (const auto& c : to_blended(to_separated(s)).columns) seen.emplace(chord_key(c), c);
  }
  BlendedColumn unseen;
  unseen.set();
  ASSERT_EQ(seen.count(chord_key(unseen)), 0u);
  double sum = m.chord_probability(unseen);
  for (const auto& [k, c] : seen) sum += m.chord_probability(c);
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(NoteUnigram, HandComputed) {
  const std::vector<ExpressiveScore> corpus{from_p1_notes({60, 60, 0})};
  const auto m = fit(ModelKind::NoteUnigram, corpus, Task::Blended);
  BlendedColumn empty, c60;
  c60.set(60 - 21);
  const double on60 = 3.0 / 5, off_other = 4.0 / 5;
  EXPECT_NEAR(m.chord_probability(c60), on60 * std::pow(off_other, 87), 1e-15);
  EXPECT_NEAR(m.chord_probability(empty), (1 - on60) * std::pow(off_other, 87), 1e-15);
  EXPECT_EQ(m.chord_accuracy_credit(c60), 1.0);
  EXPECT_EQ(m.chord_accuracy_credit(empty), 0.0);
}

TEST(NoteUnigram, BeatsRandomOnTrainingData) {
  const auto corpus = random_corpus(7);
  const auto nu = evaluate(fit(ModelKind::NoteUnigram, corpus, Task::Blended), corpus, Task::Blended);
  EXPECT_LT(nu.aggregate.nll_all, 88 * std::log(2.0));
  EXPECT_TRUE(std::isfinite(nu.aggregate.nll_all));
}

TEST(Gibbs, UnigramNeverWorseThanRandomOnOwnScore) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto corpus = random_corpus(200 + seed, 1);
    for (Task t : {Task::Separated, Task::Expressive}) {
      const auto u = evaluate(fit(ModelKind::Unigram, corpus, t), corpus, t);
      const auto r = evaluate(fit(ModelKind::Random, corpus, t), corpus, t);
      for (std::size_t c = 0; c < u.categories.size(); ++c) {
        ASSERT_LE(u.categories[c].nll_all, r.categories[c].nll_all + 1e-6);
      }
    }
  }
}

TEST(Aggregates, SumAndMean) {
  const auto corpus = random_corpus(8);
  for (ModelKind k : {ModelKind::Unigram, ModelKind::Bigram}) {
    const auto r = evaluate(fit(k, corpus, Task::Separated), corpus, Task::Separated);
    double nll = 0.0, acc = 0.0;
    for (const auto& c : r.categories) {
      nll += c.nll_poi;
      acc += c.acc_poi;
      EXPECT_TRUE(std::isfinite(c.nll_all));
      EXPECT_LE(c.poi_count, c.all_count);
    }
    EXPECT_NEAR(r.aggregate.nll_poi, nll, 1e-12);
    EXPECT_NEAR(r.aggregate.acc_poi, acc / 4, 1e-12);
  }
}

TEST(Aggregates, MicroAveragePooling) {
  const std::vector<ExpressiveScore> corpus{from_p1_notes({60, 60, 60, 60}), from_p1_notes({0})};
  const auto m = fit(ModelKind::Unigram, corpus, Task::Separated);
  const auto r = evaluate(m, corpus, Task::Separated);
  const double p60 = m.probability(0, -1, value_index(Task::Separated, 0, 60)), p0 = m.probability(0, -1, 0);
  EXPECT_NEAR(r.categories[0].nll_all, -(4 * std::log(p60) + std::log(p0)) / 5, 1e-12);
  EXPECT_NEAR(r.categories[0].nll_poi, -(std::log(p60) + std::log(p0)) / 2, 1e-12);
  EXPECT_EQ(r.categories[0].poi_count, 2u);
}

TEST(Errors, FitAndEvaluate) {
  auto kind_of = [](auto&& f) {
    try {
      f();
    } catch (const EvalError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  const auto corpus = random_corpus(9, 2);
  EXPECT_EQ(kind_of([] { fit(ModelKind::Unigram, {}, Task::Separated); }), static_cast<int>(EvalError::Kind::EmptyCorpus));
  EXPECT_EQ(kind_of([] { fit(ModelKind::ChordUnigram, {}, Task::Blended); }),
            static_cast<int>(EvalError::Kind::EmptyCorpus));
  EXPECT_EQ(kind_of([&] { fit(ModelKind::Bigram, corpus, Task::Blended); }),
            static_cast<int>(EvalError::Kind::UnsupportedModel));
  EXPECT_EQ(kind_of([&] { fit(ModelKind::NoteUnigram, corpus, Task::Separated); }),
            static_cast<int>(EvalError::Kind::UnsupportedModel));
  const auto m = fit(ModelKind::Unigram, corpus, Task::Separated);
  EXPECT_EQ(kind_of([&] { evaluate(m, corpus, Task::Expressive); }),
            static_cast<int>(EvalError::Kind::AlphabetMismatch));
}

TEST(Report, JsonFields) {
  const auto corpus = random_corpus(10);
  const auto r = evaluate(fit(ModelKind::Random, {}, Task::Separated), corpus, Task::Separated);
  const auto j = report_to_json(r);
  EXPECT_NEAR(j.at("nll_poi_aggregate").get<double>(), 16.04, 0.005);
  EXPECT_EQ(j.at("task"), "separated");
  EXPECT_EQ(j.at("model"), "random");
  for (const char* key : {"category", "nll_poi", "nll_all", "acc_poi", "acc_all"}) {
    EXPECT_TRUE(j.at("categories").at(0).contains(key)) << key;
  }
  EXPECT_TRUE(j.at("aggregates").contains("nll_poi"));
}

TEST(Report, JsonStableRoundTrip) {
  const auto corpus = random_corpus(11);
  const auto r = evaluate(fit(ModelKind::Bigram, corpus, Task::Expressive), corpus, Task::Expressive);
  const std::string once = report_to_json(r).dump();
  const std::string twice = report_to_json(report_from_json(nlohmann::json::parse(once))).dump();
  EXPECT_EQ(once, twice);
}

TEST(Report, EmptyReport) {
  const auto r = evaluate(fit(ModelKind::Random, {}, Task::Separated), {}, Task::Separated);
  const auto text = report_to_json(r).dump();
  EXPECT_NO_THROW(nlohmann::json::parse(text));
  EXPECT_EQ(r.categories[0].all_count, 0u);
  EXPECT_EQ(report_to_table({}), "");
}

TEST(Report, TableLayout) {
  const auto corpus = random_corpus(12);
  std::vector<EvalReport> reports;
  for (ModelKind k : {ModelKind::Random, ModelKind::Unigram, ModelKind::Bigram}) {
    reports.push_back(evaluate(fit(k, corpus, Task::Separated), corpus, Task::Separated));
  }
  const auto table = report_to_table(reports);
  EXPECT_NE(table.find("16.04"), std::string::npos);
  EXPECT_NE(table.find("4.36"), std::string::npos);
  EXPECT_NE(table.find("bigram"), std::string::npos);
  EXPECT_NE(table.find("P1"), std::string::npos);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
}

TEST(Stats, AllVoicesOn) {
  ExpressiveScore s;
  ExpressiveFrame f;
  f.p1 = {60, 5, 0};
  f.p2 = {64, 5, 0};
  f.tr.note = 48;
  f.no = {3, 5, 0};
  s.frames.assign(48, f);
  const auto st = corpus_stats(std::vector<ExpressiveScore>{s});
  EXPECT_EQ(st.average_polyphony, 4.0);
  for (double p : st.on_probability) EXPECT_EQ(p, 1.0);
  EXPECT_EQ(st.note_count, 4u);
  EXPECT_EQ(st.duration_seconds, 2.0);
  EXPECT_EQ(st.songs_longer_than_10s, 0u);
}

TEST(Stats, SilentCorpus) {
  ExpressiveScore s;
  s.frames.resize(10);
  const auto st = corpus_stats(std::vector<ExpressiveScore>{s});
  EXPECT_EQ(st.average_polyphony, 0.0);
  EXPECT_EQ(st.note_count, 0u);
  for (double p : st.on_probability) EXPECT_EQ(p, 0.0);
  EXPECT_EQ(corpus_stats({}).song_count, 0u);
}

TEST(Stats, OnsetsCounted) {
  const auto st = corpus_stats(std::vector<ExpressiveScore>{from_p1_notes({60, 60, 0, 60, 62, 62})});
  EXPECT_EQ(st.note_count, 3u);
  EXPECT_EQ(st.frame_count, 6u);
}

TEST(Stats, PolyphonyIdentity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto st = corpus_stats(random_corpus(300 + seed));
    const double sum = st.on_probability[0] + st.on_probability[1] + st.on_probability[2] + st.on_probability[3];
    EXPECT_NEAR(st.average_polyphony, sum, 1e-12);
  }
}

TEST(Stats, Json) {
  const auto j = stats_to_json(corpus_stats(random_corpus(13)));
  EXPECT_TRUE(j.contains("average_polyphony"));
  EXPECT_TRUE(j.at("p_on").contains("NO"));
  EXPECT_EQ(j.at("songs").get<int>(), 8);
}
