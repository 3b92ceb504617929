// Score -> register writes -> PCM rendering, plus the WAV writer.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "nesscore/apu.h"
#include "nesscore/score.h"
#include "nesscore/vgm.h"

namespace nesscore::synth {

/// Emits the register writes that realize each frame at its first sample.
///
/// Pulses run in constant-volume mode with lengths halted and sweep negated
/// (so long periods are not muted). Voices are gated through $4015; timer
/// high bytes (and length reloads) are written only on note changes, so pure
/// velocity or duty changes never reset the pulse phase. The first triangle
/// note also writes $4017 = 0x80 so the linear counter is loaded at once.
/// Throws apu::ApuError(NoteOutOfRange) for notes no timer can produce.
vgm::TimedWriteStream score_to_writes(const ExpressiveScore& score);

/// Mode 0 taps bit 1, mode 1 taps bit 6. Seeded with 1.
class NoiseLfsr {
 public:
  void clock(bool mode);
  bool muted() const { return (state_ & 1) != 0; }
  std::uint16_t state() const { return state_; }

 private:
  std::uint16_t state_ = 1;
};

/// Waveform generators clocked at the CPU rate.
class OscillatorBank {
 public:
  /// Advances every generator by `cycles` CPU cycles using the timer
  /// settings in `apu`.
  void advance(const apu::ApuState& apu, std::uint32_t cycles);

  /// Restarts a pulse duty sequence ($4003 / $4007 writes).
  void reset_pulse_phase(int pulse) { pulse_[pulse].step = 0; }

  /// Instantaneous channel levels in [0, 15].
  std::array<int, 4> levels(const apu::ApuState& apu) const;

  std::uint8_t pulse_step(int pulse) const { return pulse_[pulse].step; }
  std::uint8_t triangle_step() const { return triangle_.step; }
  const NoiseLfsr& lfsr() const { return lfsr_; }

 private:
  struct Generator {
    std::int64_t countdown = 0;
    std::uint8_t step = 0;
  };
  std::array<Generator, 2> pulse_{};
  Generator triangle_{};
  Generator noise_{};
  NoiseLfsr lfsr_;
};

struct PcmBuffer {
  static constexpr std::uint32_t sample_rate = vgm::kSampleRate;
  std::vector<float> samples;
};

double pulse_out(int p1, int p2);
double tnd_out(int triangle, int noise);

/// Non-linear 2A03 mix scaled so silence is 0 and full scale is 1.
double mix(int p1, int p2, int triangle, int noise);

/// Renders one sample per stream sample; output length is total_samples.
PcmBuffer render_writes(const vgm::TimedWriteStream& stream);

/// RIFF/WAVE, 16-bit signed mono at 44100 Hz.
std::vector<std::uint8_t> write_wav(const PcmBuffer& buffer);

}  // namespace nesscore::synth
