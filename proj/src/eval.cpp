// Baseline fitting and POI-based NLL / accuracy evaluation.

#include "nesscore/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace nesscore::eval {

namespace {

constexpr int kPulseAlphabet = 1 + (kMelodicNoteMax - kPulseNoteMin + 1);       // 78
constexpr int kTriangleAlphabet = 1 + (kMelodicNoteMax - kTriangleNoteMin + 1);  // 89
constexpr int kNoiseAlphabet = 1 + kNoiseNoteMax;                                // 17
constexpr int kVelocityAlphabet = kVelocityMax + 1;                              // 16
constexpr int kTimbreAlphabet = kPulseTimbreMax + 1;                             // 4

[[noreturn]] void mismatch(const std::string& what) { throw EvalError(EvalError::Kind::AlphabetMismatch, what); }

bool categorical(Task t) { return t != Task::Blended; }

std::uint64_t total_frames(std::span<const ExpressiveScore> corpus) {
  std::uint64_t n = 0;
  for (const auto& s : corpus) n += s.length();
  return n;
}

BlendedScore blended_of(const ExpressiveScore& s) { return to_blended(to_separated(s)); }

// Collects the arg-max set size and maximal count of a count vector.
std::pair<std::uint64_t, std::size_t> max_and_ties(const std::vector<std::uint64_t>& counts) {
  const std::uint64_t best = *std::max_element(counts.begin(), counts.end());
  const auto ties = static_cast<std::size_t>(std::count(counts.begin(), counts.end(), best));
  return {best, ties};
}

}  // namespace

std::string_view task_name(Task t) {
  switch (t) {
    case Task::Separated: return "separated";
    case Task::Expressive: return "expressive";
    case Task::Blended: return "blended";
  }
  return "?";
}

std::string_view model_name(ModelKind m) {
  switch (m) {
    case ModelKind::Random: return "random";
    case ModelKind::Unigram: return "unigram";
    case ModelKind::Bigram: return "bigram";
    case ModelKind::NoteUnigram: return "note-unigram";
    case ModelKind::ChordUnigram: return "chord-unigram";
  }
  return "?";
}

Task parse_task(std::string_view name) {
  for (Task t : {Task::Separated, Task::Expressive, Task::Blended}) {
    if (task_name(t) == name) return t;
  }
  throw std::invalid_argument("unknown task `" + std::string(name) + "`");
}

ModelKind parse_model(std::string_view name) {
  for (ModelKind m : {ModelKind::Random, ModelKind::Unigram, ModelKind::Bigram, ModelKind::NoteUnigram,
                      ModelKind::ChordUnigram}) {
    if (model_name(m) == name) return m;
  }
  throw std::invalid_argument("unknown model `" + std::string(name) + "`");
}

std::vector<Category> categories(Task task) {
  switch (task) {
    case Task::Separated:
      return {{"P1", kPulseAlphabet}, {"P2", kPulseAlphabet}, {"TR", kTriangleAlphabet}, {"NO", kNoiseAlphabet}};
    case Task::Expressive:
      return {{"V_P1", kVelocityAlphabet},
              {"V_P2", kVelocityAlphabet},
              {"V_NO", kVelocityAlphabet},
              {"T_P1", kTimbreAlphabet},
              {"T_P2", kTimbreAlphabet}};
    case Task::Blended: return {{"chord", 0}};
  }
  return {};
}

int value_index(Task task, std::size_t category, int value) {
  if (task == Task::Separated) {
    if (value == 0) return 0;
    switch (category) {
      case 0:
      case 1: return value >= kPulseNoteMin && value <= kMelodicNoteMax ? value - kPulseNoteMin + 1 : -1;
      case 2: return value >= kTriangleNoteMin && value <= kMelodicNoteMax ? value - kTriangleNoteMin + 1 : -1;
      case 3: return value >= 0 && value <= kNoiseNoteMax ? value : -1;
    }
    return -1;
  }
  if (task == Task::Expressive) {
    const int size = category < 3 ? kVelocityAlphabet : kTimbreAlphabet;
    return value >= 0 && value < size ? value : -1;
  }
  return -1;
}

std::vector<std::vector<int>> encode(const ExpressiveScore& score, Task task) {
  if (!categorical(task)) mismatch("encode: the blended task has no categorical sequences");
  const auto cats = categories(task);
  std::vector<std::vector<int>> out(cats.size());
  for (auto& seq : out) seq.reserve(score.length());
  for (std::size_t t = 0; t < score.length(); ++t) {
    const auto& f = score.frames[t];
    int raw[5];
    if (task == Task::Separated) {
      raw[0] = f.p1.note;
      raw[1] = f.p2.note;
      raw[2] = f.tr.note;
      raw[3] = f.no.note;
    } else {
      raw[0] = f.p1.velocity;
      raw[1] = f.p2.velocity;
      raw[2] = f.no.velocity;
      raw[3] = f.p1.timbre;
      raw[4] = f.p2.timbre;
    }
    for (std::size_t c = 0; c < cats.size(); ++c) {
      const int idx = value_index(task, c, raw[c]);
      if (idx < 0) {
        mismatch("frame " + std::to_string(t) + ": value " + std::to_string(raw[c]) + " is outside the " +
                 cats[c].name + " alphabet");
      }
      out[c].push_back(idx);
    }
  }
  return out;
}

ChordKey chord_key(const BlendedColumn& column) {
  ChordKey key;
  for (std::size_t i = 0; i < 64; ++i) key.lo |= std::uint64_t{column[i]} << i;
  for (std::size_t i = 64; i < kBlendedRows; ++i) key.hi |= std::uint32_t{column[i]} << (i - 64);
  return key;
}

double BaselineModel::probability(std::size_t category, int previous, int value) const {
  const double k = categories_.at(category).alphabet_size;
  switch (kind_) {
    case ModelKind::Random: return 1.0 / k;
    case ModelKind::Unigram:
      return (static_cast<double>(unigram_[category][value]) + 1.0) /
             (static_cast<double>(unigram_total_[category]) + k);
    case ModelKind::Bigram: {
      const std::size_t row = static_cast<std::size_t>(previous + 1);
      return (static_cast<double>(bigram_[category][row][value]) + 1.0) /
             (static_cast<double>(bigram_total_[category][row]) + k);
    }
    default: break;
  }
  throw EvalError(EvalError::Kind::UnsupportedModel, "categorical probability on a blended model");
}

double BaselineModel::accuracy_credit(std::size_t category, int previous, int value) const {
  switch (kind_) {
    case ModelKind::Random: return 1.0 / categories_.at(category).alphabet_size;
    case ModelKind::Unigram: {
      const auto [best, ties] = max_and_ties(unigram_[category]);
      return unigram_[category][value] == best ? 1.0 / static_cast<double>(ties) : 0.0;
    }
    case ModelKind::Bigram: return previous >= 0 && previous == value ? 1.0 : 0.0;
    default: break;
  }
  throw EvalError(EvalError::Kind::UnsupportedModel, "categorical prediction on a blended model");
}

double BaselineModel::chord_probability(const BlendedColumn& column) const {
  switch (kind_) {
    case ModelKind::Random: return std::pow(0.5, kBlendedRows);
    case ModelKind::NoteUnigram: {
      // Accumulate in log space; 88 factors can underflow.
      double log_p = 0.0;
      const double denom = static_cast<double>(column_total_) + 2.0;
      for (std::size_t i = 0; i < kBlendedRows; ++i) {
        const double on = (static_cast<double>(pitch_on_[i]) + 1.0) / denom;
        log_p += std::log(column[i] ? on : 1.0 - on);
      }
      return std::exp(log_p);
    }
    case ModelKind::ChordUnigram: {
      const double denom = static_cast<double>(column_total_ + chord_counts_.size() + 1);
      const auto it = chord_counts_.find(chord_key(column));
      const double count = it == chord_counts_.end() ? 0.0 : static_cast<double>(it->second);
      return (count + 1.0) / denom;
    }
    default: break;
  }
  throw EvalError(EvalError::Kind::UnsupportedModel, "chord probability on a categorical model");
}

double BaselineModel::chord_accuracy_credit(const BlendedColumn& column) const {
  switch (kind_) {
    case ModelKind::Random: return std::pow(0.5, kBlendedRows);
    case ModelKind::NoteUnigram: {
      double credit = 1.0;
      for (std::size_t i = 0; i < kBlendedRows; ++i) {
        const std::uint64_t on2 = 2 * (pitch_on_[i] + 1);
        const std::uint64_t denom = column_total_ + 2;
        if (on2 == denom) {
          credit *= 0.5;
        } else if ((on2 > denom) != column[i]) {
          return 0.0;
        }
      }
      return credit;
    }
    case ModelKind::ChordUnigram: {
      if (chord_counts_.empty()) return 0.0;
      const auto it = chord_counts_.find(chord_key(column));
      if (it == chord_counts_.end() || it->second != chord_best_count_) return 0.0;
      return 1.0 / static_cast<double>(chord_best_ties_);
    }
    default: break;
  }
  throw EvalError(EvalError::Kind::UnsupportedModel, "chord prediction on a categorical model");
}

BaselineModel fit(ModelKind kind, std::span<const ExpressiveScore> corpus, Task task) {
  const bool blended_kind = kind == ModelKind::NoteUnigram || kind == ModelKind::ChordUnigram;
  if (kind != ModelKind::Random && blended_kind == categorical(task)) {
    throw EvalError(EvalError::Kind::UnsupportedModel, std::string(model_name(kind)) +
                                                           " does not apply to the " +
                                                           std::string(task_name(task)) + " task");
  }
  if (kind != ModelKind::Random && total_frames(corpus) == 0) {
    throw EvalError(EvalError::Kind::EmptyCorpus, "cannot fit " + std::string(model_name(kind)) + " on an empty corpus");
  }

  BaselineModel m;
  m.kind_ = kind;
  m.task_ = task;
  m.categories_ = categories(task);
  const std::size_t ncat = m.categories_.size();

  if (kind == ModelKind::Unigram || kind == ModelKind::Bigram) {
    m.unigram_.resize(ncat);
    m.unigram_total_.assign(ncat, 0);
    m.bigram_.resize(ncat);
    m.bigram_total_.resize(ncat);
    for (std::size_t c = 0; c < ncat; ++c) {
      const auto k = static_cast<std::size_t>(m.categories_[c].alphabet_size);
      m.unigram_[c].assign(k, 0);
      if (kind == ModelKind::Bigram) {
        m.bigram_[c].assign(k + 1, std::vector<std::uint64_t>(k, 0));
        m.bigram_total_[c].assign(k + 1, 0);
      }
    }
    for (const auto& score : corpus) {
      const auto seqs = encode(score, task);
      for (std::size_t c = 0; c < ncat; ++c) {
        int prev = -1;
        for (int v : seqs[c]) {
          ++m.unigram_[c][v];
          ++m.unigram_total_[c];
          if (kind == ModelKind::Bigram) {
            ++m.bigram_[c][prev + 1][v];
            ++m.bigram_total_[c][prev + 1];
          }
          prev = v;
        }
      }
    }
  } else if (blended_kind) {
    for (const auto& score : corpus) {
      for (const auto& col : blended_of(score).columns) {
        ++m.column_total_;
        for (std::size_t i = 0; i < kBlendedRows; ++i) m.pitch_on_[i] += col[i];
        if (kind == ModelKind::ChordUnigram) ++m.chord_counts_[chord_key(col)];
      }
    }
    for (const auto& [key, count] : m.chord_counts_) {
      if (count > m.chord_best_count_) {
        m.chord_best_count_ = count;
        m.chord_best_ties_ = 1;
      } else if (count == m.chord_best_count_) {
        ++m.chord_best_ties_;
      }
    }
  }
  return m;
}

namespace {

struct Accumulator {
  double nll_poi = 0.0, nll_all = 0.0, acc_poi = 0.0, acc_all = 0.0;
  std::uint64_t poi = 0, all = 0;

  void add(bool is_poi, double p, double credit) {
    const double nll = -std::log(p);
    nll_all += nll;
    acc_all += credit;
    ++all;
    if (is_poi) {
      nll_poi += nll;
      acc_poi += credit;
      ++poi;
    }
  }

  CategoryResult result(const std::string& name) const {
    auto mean = [](double s, std::uint64_t n) { return n ? s / static_cast<double>(n) : 0.0; };
    return {name, mean(nll_poi, poi), mean(nll_all, all), mean(acc_poi, poi), mean(acc_all, all), poi, all};
  }
};

}  // namespace

EvalReport evaluate(const BaselineModel& model, std::span<const ExpressiveScore> corpus, Task task) {
  if (model.task() != task) {
    mismatch("model was fit for the " + std::string(task_name(model.task())) + " task, not " +
             std::string(task_name(task)));
  }
  const auto& cats = model.categories();
  std::vector<Accumulator> acc(cats.size());

  for (const auto& score : corpus) {
    if (score.length() == 0) continue;
    if (categorical(task)) {
      const auto seqs = encode(score, task);
      for (std::size_t c = 0; c < cats.size(); ++c) {
        const auto& seq = seqs[c];
        for (std::size_t t = 0; t < seq.size(); ++t) {
          const int prev = t > 0 ? seq[t - 1] : -1;
          const bool poi = t == 0 || seq[t] != seq[t - 1];
          acc[c].add(poi, model.probability(c, prev, seq[t]), model.accuracy_credit(c, prev, seq[t]));
        }
      }
    } else {
      const auto cols = blended_of(score).columns;
      for (std::size_t t = 0; t < cols.size(); ++t) {
        const bool poi = t == 0 || cols[t] != cols[t - 1];
        acc[0].add(poi, model.chord_probability(cols[t]), model.chord_accuracy_credit(cols[t]));
      }
    }
  }

  EvalReport report;
  report.task = std::string(task_name(task));
  report.model = std::string(model_name(model.kind()));
  for (std::size_t c = 0; c < cats.size(); ++c) report.categories.push_back(acc[c].result(cats[c].name));
  for (const auto& r : report.categories) {
    report.aggregate.nll_poi += r.nll_poi;
    report.aggregate.nll_all += r.nll_all;
    report.aggregate.acc_poi += r.acc_poi;
    report.aggregate.acc_all += r.acc_all;
  }
  if (!report.categories.empty()) {
    const auto n = static_cast<double>(report.categories.size());
    report.aggregate.acc_poi /= n;
    report.aggregate.acc_all /= n;
  }
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : report.categories) {
    cats.push_back({{"category", c.category},
                    {"nll_poi", c.nll_poi},
                    {"nll_all", c.nll_all},
                    {"acc_poi", c.acc_poi},
                    {"acc_all", c.acc_all},
                    {"poi_count", c.poi_count},
                    {"all_count", c.all_count}});
  }
  const auto& a = report.aggregate;
  return {{"task", report.task},
          {"model", report.model},
          {"categories", cats},
          {"aggregates", {{"nll_poi", a.nll_poi}, {"nll_all", a.nll_all}, {"acc_poi", a.acc_poi}, {"acc_all", a.acc_all}}},
          {"nll_poi_aggregate", a.nll_poi},
          {"nll_all_aggregate", a.nll_all},
          {"acc_poi_aggregate", a.acc_poi},
          {"acc_all_aggregate", a.acc_all}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.task = j.at("task").get<std::string>();
  r.model = j.at("model").get<std::string>();
  for (const auto& c : j.at("categories")) {
    r.categories.push_back({c.at("category").get<std::string>(), c.at("nll_poi").get<double>(),
                            c.at("nll_all").get<double>(), c.at("acc_poi").get<double>(),
                            c.at("acc_all").get<double>(), c.at("poi_count").get<std::uint64_t>(),
                            c.at("all_count").get<std::uint64_t>()});
  }
  const auto& a = j.at("aggregates");
  r.aggregate = {a.at("nll_poi").get<double>(), a.at("nll_all").get<double>(), a.at("acc_poi").get<double>(),
                 a.at("acc_all").get<double>()};
  return r;
}

std::string report_to_table(std::span<const EvalReport> reports) {
  std::string out;
  if (reports.empty()) return out;
  char buf[64];
  auto cell = [&](const char* fmt, auto v, int width) {
    std::snprintf(buf, sizeof buf, fmt, width, v);
    out += buf;
  };

  const auto& first = reports.front();
  cell("%-*s", "Model", 14);
  out += "| NLL ";
  for (const auto& c : first.categories) cell("%*s", c.category.c_str(), 7);
  out += " |";
  cell("%*s", "POI", 7);
  cell("%*s", "All", 7);
  out += " | Acc ";
  for (const auto& c : first.categories) cell("%*s", c.category.c_str(), 7);
  out += " |";
  cell("%*s", "POI", 7);
  cell("%*s", "All", 7);
  out += '\n';

  for (const auto& r : reports) {
    cell("%-*s", r.model.c_str(), 14);
    out += "|     ";
    for (const auto& c : r.categories) cell("%*.2f", c.nll_poi, 7);
    out += " |";
    cell("%*.2f", r.aggregate.nll_poi, 7);
    cell("%*.2f", r.aggregate.nll_all, 7);
    out += " |     ";
    for (const auto& c : r.categories) cell("%*.3f", c.acc_poi, 7);
    out += " |";
    cell("%*.3f", r.aggregate.acc_poi, 7);
    cell("%*.3f", r.aggregate.acc_all, 7);
    out += '\n';
  }
  return out;
}

CorpusStats corpus_stats(std::span<const ExpressiveScore> corpus) {
  CorpusStats s;
  std::array<std::uint64_t, 4> on{};
  std::uint64_t voices_on = 0;
  for (const auto& score : corpus) {
    ++s.song_count;
    const double seconds = static_cast<double>(score.length()) / score.rate_hz;
    s.duration_seconds += seconds;
    if (seconds > 10.0) ++s.songs_longer_than_10s;
    s.frame_count += score.length();
    for (std::size_t t = 0; t < score.length(); ++t) {
      for (Voice v : kVoices) {
        const int note = score.frames[t].note(v);
        if (note == 0) continue;
        ++on[static_cast<int>(v)];
        ++voices_on;
        if (t == 0 || score.frames[t - 1].note(v) != note) ++s.note_count;
      }
    }
  }
  if (s.frame_count > 0) {
    const auto n = static_cast<double>(s.frame_count);
    for (int v = 0; v < 4; ++v) s.on_probability[v] = static_cast<double>(on[v]) / n;
    s.average_polyphony = static_cast<double>(voices_on) / n;
  }
  return s;
}

nlohmann::json stats_to_json(const CorpusStats& s) {
  return {{"songs", s.song_count},
          {"songs_longer_than_10s", s.songs_longer_than_10s},
          {"frames", s.frame_count},
          {"notes", s.note_count},
          {"duration_hours", s.duration_seconds / 3600.0},
          {"duration_seconds", s.duration_seconds},
          {"p_on", {{"P1", s.on_probability[0]}, {"P2", s.on_probability[1]}, {"TR", s.on_probability[2]}, {"NO", s.on_probability[3]}}},
          {"average_polyphony", s.average_polyphony}};
}

}  // namespace nesscore::eval
