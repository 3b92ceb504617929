// Points of interest, baseline models (random / unigram / bigram / note and
// chord 1-grams), NLL + accuracy evaluation and corpus statistics.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "nesscore/score.h"

namespace nesscore::eval {

enum class Task { Separated, Expressive, Blended };
enum class ModelKind { Random, Unigram, Bigram, NoteUnigram, ChordUnigram };

std::string_view task_name(Task t);
std::string_view model_name(ModelKind m);
Task parse_task(std::string_view name);
ModelKind parse_model(std::string_view name);

class EvalError : public std::runtime_error {
 public:
  enum class Kind { EmptySequence, EmptyCorpus, AlphabetMismatch, UnsupportedModel };
  EvalError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// {0} U {t : values[t] != values[t-1]}. Throws EmptySequence on empty input.
template <typename T>
std::vector<std::size_t> find_pois(std::span<const T> values) {
  if (values.empty()) throw EvalError(EvalError::Kind::EmptySequence, "find_pois: empty sequence");
  std::vector<std::size_t> out{0};
  for (std::size_t t = 1; t < values.size(); ++t) {
    if (!(values[t] == values[t - 1])) out.push_back(t);
  }
  return out;
}

/// One categorical variable evaluated by the separated/expressive tasks.
struct Category {
  std::string name;
  int alphabet_size = 0;
};

/// P1, P2, TR, NO notes (78, 78, 89, 17 values) or V_P1, V_P2, V_NO, T_P1,
/// T_P2 (16, 16, 16, 4, 4 values). Noise timbre is not evaluated. The
/// blended task has a single category over whole 88-note columns.
std::vector<Category> categories(Task task);

/// Per-category sequences of alphabet indices for one score. Throws
/// AlphabetMismatch if a value lies outside its category's alphabet.
std::vector<std::vector<int>> encode(const ExpressiveScore& score, Task task);

/// Maps a raw category value (note, velocity or timbre) to its alphabet
/// index, or -1 when it is not in the alphabet.
int value_index(Task task, std::size_t category, int value);

struct ChordKey {
  std::uint64_t lo = 0;
  std::uint32_t hi = 0;
  bool operator==(const ChordKey&) const = default;
};

struct ChordKeyHash {
  std::size_t operator()(const ChordKey& k) const noexcept {
    return std::hash<std::uint64_t>{}(k.lo * 0x9E3779B97F4A7C15ull ^ k.hi);
  }
};

ChordKey chord_key(const BlendedColumn& column);

/// A fitted baseline. All probabilities are add-one smoothed and strictly
/// positive.
class BaselineModel {
 public:
  ModelKind kind() const { return kind_; }
  Task task() const { return task_; }
  const std::vector<Category>& categories() const { return categories_; }

  /// p(value | previous) for categorical tasks; `previous` < 0 marks the
  /// start of a sequence (only bigrams use it).
  double probability(std::size_t category, int previous, int value) const;

  /// Expected accuracy of the model's point prediction: 1/|ties| when the
  /// actual value is among the arg-max values, else 0. The bigram predicts
  /// the previous value (never correct at a change point, and the start
  /// symbol is never a value).
  double accuracy_credit(std::size_t category, int previous, int value) const;

  /// Blended task: probability of a whole 88-note column and the expected
  /// accuracy of the arg-max column.
  double chord_probability(const BlendedColumn& column) const;
  double chord_accuracy_credit(const BlendedColumn& column) const;

 private:
  friend BaselineModel fit(ModelKind, std::span<const ExpressiveScore>, Task);

  ModelKind kind_ = ModelKind::Random;
  Task task_ = Task::Separated;
  std::vector<Category> categories_;
  // Counts: [category][value] for unigrams; [category][previous + 1][value]
  // for bigrams, where row 0 is the start-of-sequence context.
  std::vector<std::vector<std::uint64_t>> unigram_;
  std::vector<std::uint64_t> unigram_total_;
  std::vector<std::vector<std::vector<std::uint64_t>>> bigram_;
  std::vector<std::vector<std::uint64_t>> bigram_total_;
  std::array<std::uint64_t, kBlendedRows> pitch_on_{};
  std::uint64_t column_total_ = 0;
  std::unordered_map<ChordKey, std::uint64_t, ChordKeyHash> chord_counts_;
  std::uint64_t chord_best_count_ = 0;
  std::size_t chord_best_ties_ = 0;
};

/// Random needs no data. Unigram/Bigram fit the separated or expressive
/// task; NoteUnigram/ChordUnigram fit the blended task.
BaselineModel fit(ModelKind kind, std::span<const ExpressiveScore> corpus, Task task);

struct CategoryResult {
  std::string category;
  double nll_poi = 0.0;
  double nll_all = 0.0;
  double acc_poi = 0.0;
  double acc_all = 0.0;
  std::uint64_t poi_count = 0;
  std::uint64_t all_count = 0;
};

struct Aggregate {
  double nll_poi = 0.0;  // sum over categories
  double nll_all = 0.0;
  double acc_poi = 0.0;  // unweighted mean over categories
  double acc_all = 0.0;
};

struct EvalReport {
  std::string task;
  std::string model;
  std::vector<CategoryResult> categories;
  Aggregate aggregate;
};

/// Pools every timestep of every score (micro-average). NLL is in nats.
EvalReport evaluate(const BaselineModel& model, std::span<const ExpressiveScore> corpus, Task task);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

/// Fixed-width table: one NLL block and one accuracy block per report, with
/// the per-category POI columns followed by POI and All aggregates.
std::string report_to_table(std::span<const EvalReport> reports);

struct CorpusStats {
  std::uint64_t song_count = 0;
  std::uint64_t songs_longer_than_10s = 0;
  std::uint64_t frame_count = 0;
  std::uint64_t note_count = 0;  // onsets across all four voices
  double duration_seconds = 0.0;
  std::array<double, 4> on_probability{};
  double average_polyphony = 0.0;
};

CorpusStats corpus_stats(std::span<const ExpressiveScore> corpus);
nlohmann::json stats_to_json(const CorpusStats& stats);

}  // namespace nesscore::eval
