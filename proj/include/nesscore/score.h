// Expressive, separated and blended score representations, the 44.1 kHz to
// frame-rate downsampler, NESSCORE text I/O and composer-disjoint splitting.

#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nesscore/apu.h"
#include "nesscore/frame.h"

namespace nesscore {

inline constexpr double kDefaultRateHz = 24.0;
inline constexpr int kBlendedRows = 88;
inline constexpr int kBlendedLowestNote = 21;

struct ExpressiveScore {
  double rate_hz = kDefaultRateHz;
  std::vector<ExpressiveFrame> frames;
  std::optional<std::string> provenance;

  std::size_t length() const { return frames.size(); }

  // Provenance is metadata and does not take part in equality.
  bool operator==(const ExpressiveScore& o) const { return rate_hz == o.rate_hz && frames == o.frames; }
};

/// V x T note matrix, rows in P1, P2, TR, NO order.
struct SeparatedScore {
  double rate_hz = kDefaultRateHz;
  std::array<std::vector<std::uint8_t>, 4> notes;

  std::size_t length() const { return notes[0].size(); }
  std::uint8_t at(Voice v, std::size_t t) const { return notes[static_cast<int>(v)][t]; }
  bool operator==(const SeparatedScore&) const = default;
};

using BlendedColumn = std::bitset<kBlendedRows>;

/// 88 x T binary piano roll; row 0 is MIDI 21.
struct BlendedScore {
  double rate_hz = kDefaultRateHz;
  std::vector<BlendedColumn> columns;

  std::size_t length() const { return columns.size(); }
  bool at(int row, std::size_t t) const { return columns[t][static_cast<std::size_t>(row)]; }
  bool operator==(const BlendedScore&) const = default;
};

/// First audio sample of frame k at the given frame rate: floor(k * 44100 / rate).
std::uint64_t frame_start_sample(std::size_t k, double rate_hz);

/// Number of frames covering `total_samples`: ceil(total * rate / 44100).
std::size_t frame_count(std::uint64_t total_samples, double rate_hz);

/// Point-samples the timeline at each frame start.
ExpressiveScore downsample(const apu::Timeline& timeline, double rate_hz);

SeparatedScore to_separated(const ExpressiveScore& score);
BlendedScore to_blended(const SeparatedScore& score);

struct Diagnostic {
  std::size_t frame = 0;
  Voice voice = Voice::P1;
  std::string message;
};

/// One diagnostic per invariant violation; empty iff the score is valid.
std::vector<Diagnostic> validate(const ExpressiveScore& score);

class ScoreFormatError : public std::runtime_error {
 public:
  enum class Kind { MalformedHeader, BadFieldValue };
  ScoreFormatError(Kind kind, std::size_t line, const std::string& what)
      : std::runtime_error(what), kind_(kind), line_(line) {}
  Kind kind() const noexcept { return kind_; }
  std::size_t line() const noexcept { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

/// NESSCORE v1 text: `NESSCORE 1 <rate_hz> <T>` then T lines of ten integers.
std::string write_score_text(const ExpressiveScore& score);
ExpressiveScore read_score_text(std::string_view text);

enum class Subset : std::uint8_t { Train = 0, Valid = 1, Test = 2 };

constexpr std::string_view subset_name(Subset s) {
  switch (s) {
    case Subset::Train: return "train";
    case Subset::Valid: return "valid";
    case Subset::Test: return "test";
  }
  return "?";
}

struct CorpusEntry {
  std::string song_id;
  std::string game_id;
  std::vector<std::string> composers;  // empty = unknown
  std::string score_path;
};

/// Assigns whole connected components of the game-composer graph to subsets,
/// so no composer (or game) spans two subsets. Components are shuffled with
/// `seed` and each goes to the subset with the largest song deficit relative
/// to its target share. Result is parallel to `entries`.
std::vector<Subset> split_corpus(const std::vector<CorpusEntry>& entries,
                                 const std::array<double, 3>& ratios, std::uint64_t seed);

}  // namespace nesscore
