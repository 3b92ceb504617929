// Register-level model of the 2A03 pulse, triangle and noise channels plus the
// frame sequencer, and extraction of expressive frames from a write log.
//
// Everything here is a value-in/value-out transition. The sampler channel
// (0x4010-0x4014) is accepted and ignored.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nesscore/frame.h"
#include "nesscore/vgm.h"

namespace nesscore::apu {

inline constexpr std::uint32_t kCpuClockHz = 1789773;

/// Length-counter load values indexed by the 5-bit field of $4003/$4007/$400B/$400F.
inline constexpr std::array<std::uint8_t, 32> kLengthTable{
    10, 254, 20, 2,  40, 4,  80, 6,  160, 8,  60, 10, 14, 12, 26, 14,
    12, 16,  24, 18, 48, 20, 96, 22, 192, 24, 72, 26, 16, 28, 32, 30};

/// Noise timer periods in CPU cycles (NTSC), indexed by $400E bits 0-3.
inline constexpr std::array<std::uint16_t, 16> kNoisePeriods{
    4, 8, 16, 32, 64, 96, 128, 160, 202, 254, 380, 508, 762, 1016, 2034, 4068};

class ApuError : public std::runtime_error {
 public:
  enum class Kind { RegisterOutOfRange, NoteOutOfRange };
  ApuError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct Envelope {
  bool start = false;
  std::uint8_t divider = 0;
  std::uint8_t decay_level = 0;
  bool operator==(const Envelope&) const = default;
};

struct Sweep {
  bool enabled = false;
  std::uint8_t period = 0;
  bool negate = false;
  std::uint8_t shift = 0;
  bool reload = false;
  std::uint8_t divider = 0;
  bool operator==(const Sweep&) const = default;
};

struct PulseChannelState {
  std::uint8_t duty = 0;
  bool length_halt_env_loop = false;
  bool constant_volume = false;
  std::uint8_t volume_or_env_period = 0;
  Sweep sweep;
  std::uint16_t timer_period = 0;
  std::uint8_t length_counter = 0;
  Envelope envelope;
  bool enabled = false;
  bool operator==(const PulseChannelState&) const = default;
};

struct TriangleChannelState {
  bool linear_control = false;
  std::uint8_t linear_reload_value = 0;
  std::uint8_t linear_counter = 0;
  bool linear_reload = false;
  std::uint16_t timer_period = 0;
  std::uint8_t length_counter = 0;
  bool enabled = false;
  bool operator==(const TriangleChannelState&) const = default;
};

struct NoiseChannelState {
  std::uint8_t mode = 0;
  std::uint8_t period_index = 0;
  bool length_halt_env_loop = false;
  bool constant_volume = false;
  std::uint8_t volume_or_env_period = 0;
  std::uint8_t length_counter = 0;
  Envelope envelope;
  bool enabled = false;
  bool operator==(const NoiseChannelState&) const = default;
};

enum class FrameMode : std::uint8_t { FourStep, FiveStep };

/// Power-up state: everything zero, channels disabled, 4-step sequencing.
struct ApuState {
  PulseChannelState p1;
  PulseChannelState p2;
  TriangleChannelState tr;
  NoiseChannelState no;
  FrameMode frame_mode = FrameMode::FourStep;
  // Current position in 44.1 kHz samples. $4017 writes restart the
  // sequencer at this position.
  std::uint64_t sample_clock = 0;
  std::uint64_t sequencer_origin = 0;
  std::uint64_t sequencer_step = 0;
  bool operator==(const ApuState&) const = default;
};

enum class ChannelKind { Pulse, Triangle };
enum class TickKind { Quarter, Half };

/// Applies one register write. Throws RegisterOutOfRange outside 0x4000-0x4017.
ApuState apply_write(ApuState state, std::uint16_t reg, std::uint8_t value);

/// Quarter ticks clock envelopes and the linear counter; half ticks also clock
/// length counters and sweep units.
ApuState clock_frame_sequencer(ApuState state, TickKind tick);

/// Sweep target period. Pulse 1 negates with ones' complement, pulse 2 with
/// two's complement; negative results clamp to 0.
int sweep_target(const PulseChannelState& ch, bool is_pulse1);

/// Timer < 8 or a target above 0x7FF silences the channel.
bool sweep_muted(const PulseChannelState& ch, bool is_pulse1);

/// Envelope decay level or constant volume, whichever the channel selects.
std::uint8_t output_volume(const PulseChannelState& ch);
std::uint8_t output_volume(const NoiseChannelState& ch);

/// round(69 + 12 log2(f / 440)) for the channel's timer frequency, or nullopt
/// when that falls outside the voice's note range.
std::optional<int> pitch_to_midi(int timer_period, ChannelKind kind);

/// Inverse of pitch_to_midi. Throws NoteOutOfRange for notes outside the
/// voice's range or that no 11-bit timer can produce (pulse note 32).
std::uint16_t midi_to_timer(int note, ChannelKind kind);

ExpressiveFrame snapshot(const ApuState& state);

/// Sample index at which the next frame-sequencer step fires.
std::uint64_t next_sequencer_sample(const ApuState& state);

/// Fires the pending sequencer step (which may clock nothing in 5-step mode).
ApuState step_sequencer(ApuState state);

/// Piecewise-constant sample -> frame function stored as change points.
class Timeline {
 public:
  Timeline() = default;
  Timeline(std::uint64_t total_samples, std::vector<std::pair<std::uint64_t, ExpressiveFrame>> changes);

  std::uint64_t total_samples() const { return total_samples_; }
  const std::vector<std::pair<std::uint64_t, ExpressiveFrame>>& changes() const { return changes_; }

  /// Frame at `sample`; requires sample < total_samples().
  const ExpressiveFrame& at(std::uint64_t sample) const;

 private:
  std::uint64_t total_samples_ = 0;
  std::vector<std::pair<std::uint64_t, ExpressiveFrame>> changes_;
};

/// Replays the stream sample by sample. At a given sample, sequencer steps
/// fire first, then the writes logged at that sample, then the state is
/// snapshotted.
Timeline extract_timeline(const vgm::TimedWriteStream& stream);

}  // namespace nesscore::apu
