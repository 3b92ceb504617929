// Per-timestep voice states shared by the APU extractor, the score model and
// everything downstream of it.

#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace nesscore {

/// The four scored voices, in score order.
enum class Voice : std::uint8_t { P1 = 0, P2 = 1, TR = 2, NO = 3 };

inline constexpr std::array<Voice, 4> kVoices{Voice::P1, Voice::P2, Voice::TR, Voice::NO};

constexpr std::string_view voice_name(Voice v) {
  switch (v) {
    case Voice::P1: return "P1";
    case Voice::P2: return "P2";
    case Voice::TR: return "TR";
    case Voice::NO: return "NO";
  }
  return "?";
}

// Note alphabets. Zero always means "not sounding".
inline constexpr int kPulseNoteMin = 32;
inline constexpr int kTriangleNoteMin = 21;
inline constexpr int kMelodicNoteMax = 108;
inline constexpr int kNoiseNoteMax = 16;
inline constexpr int kVelocityMax = 15;
inline constexpr int kPulseTimbreMax = 3;
inline constexpr int kNoiseTimbreMax = 1;

struct PulseVoice {
  std::uint8_t note = 0;
  std::uint8_t velocity = 0;
  std::uint8_t timbre = 0;
  bool operator==(const PulseVoice&) const = default;
};

struct TriangleVoice {
  std::uint8_t note = 0;
  bool operator==(const TriangleVoice&) const = default;
};

struct NoiseVoice {
  std::uint8_t note = 0;
  std::uint8_t velocity = 0;
  std::uint8_t timbre = 0;
  bool operator==(const NoiseVoice&) const = default;
};

/// One timestep of an expressive score: note, velocity and timbre for the
/// pulse and noise voices, note only for the triangle.
struct ExpressiveFrame {
  PulseVoice p1;
  PulseVoice p2;
  TriangleVoice tr;
  NoiseVoice no;

  bool operator==(const ExpressiveFrame&) const = default;

  /// Note of voice `v` (0 when off).
  int note(Voice v) const {
    switch (v) {
      case Voice::P1: return p1.note;
      case Voice::P2: return p2.note;
      case Voice::TR: return tr.note;
      case Voice::NO: return no.note;
    }
    return 0;
  }
};

/// True iff `note` belongs to the alphabet of voice `v` (including 0).
constexpr bool note_in_alphabet(Voice v, int note) {
  if (note == 0) return true;
  switch (v) {
    case Voice::P1:
    case Voice::P2: return note >= kPulseNoteMin && note <= kMelodicNoteMax;
    case Voice::TR: return note >= kTriangleNoteMin && note <= kMelodicNoteMax;
    case Voice::NO: return note >= 1 && note <= kNoiseNoteMax;
  }
  return false;
}

/// Sounding pulse/noise voices carry a velocity in [1, 15]; a silent voice is
/// all zeros.
constexpr bool pulse_voice_valid(Voice v, const PulseVoice& p) {
  if (!note_in_alphabet(v, p.note)) return false;
  if (p.note == 0) return p.velocity == 0 && p.timbre == 0;
  return p.velocity >= 1 && p.velocity <= kVelocityMax && p.timbre <= kPulseTimbreMax;
}

constexpr bool noise_voice_valid(const NoiseVoice& n) {
  if (!note_in_alphabet(Voice::NO, n.note)) return false;
  if (n.note == 0) return n.velocity == 0 && n.timbre == 0;
  return n.velocity >= 1 && n.velocity <= kVelocityMax && n.timbre <= kNoiseTimbreMax;
}

constexpr bool frame_valid(const ExpressiveFrame& f) {
  return pulse_voice_valid(Voice::P1, f.p1) && pulse_voice_valid(Voice::P2, f.p2) &&
         note_in_alphabet(Voice::TR, f.tr.note) && noise_voice_valid(f.no);
}

}  // namespace nesscore
