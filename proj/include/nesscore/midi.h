// Standard MIDI File export/import of expressive scores.
//
// Profile: type 1, tempo track plus one track per voice (P1, P2, TR, NO),
// PPQ 22050 at 500000 us/quarter so one tick is one 44.1 kHz sample.
// Velocity maps as round(v * 127 / 15); mid-note velocity changes are CC 11,
// timbre (duty / noise mode) is CC 12 with the raw value.

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nesscore/score.h"

namespace nesscore::midi {

inline constexpr std::uint16_t kTicksPerQuarter = 22050;
inline constexpr std::uint32_t kTempoMicros = 500000;
inline constexpr std::uint8_t kExpressionCc = 11;
inline constexpr std::uint8_t kTimbreCc = 12;
inline constexpr std::uint8_t kTriangleVelocity = 127;

class MidiError : public std::runtime_error {
 public:
  enum class Kind { NotSmf, UnmappableEvent };
  MidiError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

std::uint8_t velocity_to_midi(int velocity);
int velocity_from_midi(int midi_velocity);

/// Tick of frame k: round(k * 44100 / rate).
std::uint64_t frame_to_tick(std::size_t k, double rate_hz);

std::vector<std::uint8_t> score_to_midi(const ExpressiveScore& score);

/// Frame k takes the voice state after all events at ticks <= frame_to_tick(k).
ExpressiveScore midi_to_score(std::span<const std::uint8_t> bytes, double rate_hz);

/// Channel events of one track, for structural inspection.
struct TrackEvent {
  std::uint64_t tick = 0;
  std::uint8_t status = 0;  // 0xFF for meta events
  std::uint8_t data1 = 0;
  std::uint8_t data2 = 0;
};

/// Decodes the chunk structure into absolute-tick event lists (meta events
/// keep their type in data1). Throws NotSmf on structural errors.
std::vector<std::vector<TrackEvent>> read_tracks(std::span<const std::uint8_t> bytes,
                                                 std::uint16_t* division = nullptr);

}  // namespace nesscore::midi
