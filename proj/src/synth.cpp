// Register-write scheduling for scores and sample-accurate APU rendering.

#include "nesscore/synth.h"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace nesscore::synth {

namespace {

constexpr std::uint16_t kStatus = 0x4015;
constexpr std::uint16_t kFrameCounter = 0x4017;
constexpr std::uint8_t kMaxLengthIndex = 1 << 3;  // length table entry 1 = 254

constexpr std::array<std::array<std::uint8_t, 8>, 4> kDutySequences{{
    {0, 1, 0, 0, 0, 0, 0, 0},
    {0, 1, 1, 0, 0, 0, 0, 0},
    {0, 1, 1, 1, 1, 0, 0, 0},
    {1, 0, 0, 1, 1, 1, 1, 1},
}};

constexpr std::array<std::uint8_t, 32> kTriangleSequence{
    15, 14, 13, 12, 11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0,
    0,  1,  2,  3,  4,  5,  6, 7, 8, 9, 10, 11, 12, 13, 14, 15};

// Remembers the last value written to each register so unchanged registers
// are not rewritten.
class WriteScheduler {
 public:
  void write(std::uint64_t sample, std::uint16_t reg, std::uint8_t value, bool force = false) {
    auto& last = last_[reg - 0x4000];
    if (!force && last == value) return;
    last = value;
    stream_.writes.push_back({sample, reg, value});
  }
  vgm::TimedWriteStream take(std::uint64_t total) {
    stream_.total_samples = total;
    return std::move(stream_);
  }

 private:
  std::array<std::optional<std::uint8_t>, 0x18> last_{};
  vgm::TimedWriteStream stream_;
};

void schedule_pulse(WriteScheduler& w, std::uint64_t at, std::uint16_t base, const PulseVoice& prev,
                    const PulseVoice& cur, bool& initialized) {
  if (cur.note == 0) return;
  if (!initialized) {
    // Sweep disabled with negate set: the target never exceeds $7FF.
    w.write(at, base + 1, 0x08);
    initialized = true;
  }
  w.write(at, base, static_cast<std::uint8_t>((cur.timbre << 6) | 0x30 | cur.velocity));
  const std::uint16_t timer = apu::midi_to_timer(cur.note, apu::ChannelKind::Pulse);
  w.write(at, base + 2, static_cast<std::uint8_t>(timer & 0xFF));
  if (prev.note != cur.note) {
    w.write(at, base + 3, static_cast<std::uint8_t>(kMaxLengthIndex | (timer >> 8)), true);
  }
}

}  // namespace

vgm::TimedWriteStream score_to_writes(const ExpressiveScore& score) {
  if (!(score.rate_hz > 0.0) || score.rate_hz > vgm::kSampleRate) {
    throw std::invalid_argument("score_to_writes: rate must be in (0, 44100]");
  }
  for (std::size_t k = 0; k < score.frames.size(); ++k) {
    const auto& f = score.frames[k];
    for (Voice v : kVoices) {
      if (!note_in_alphabet(v, f.note(v))) {
        throw apu::ApuError(apu::ApuError::Kind::NoteOutOfRange,
                            "frame " + std::to_string(k) + ": " + std::string(voice_name(v)) + " note " +
                                std::to_string(f.note(v)) + " out of range");
      }
    }
    if (!frame_valid(f)) {
      throw std::invalid_argument("score_to_writes: frame " + std::to_string(k) + " is not a valid frame");
    }
  }

  WriteScheduler w;
  bool p1_ready = false;
  bool p2_ready = false;
  bool tr_ready = false;
  const ExpressiveFrame silent;
  for (std::size_t k = 0; k < score.frames.size(); ++k) {
    const auto& cur = score.frames[k];
    const auto& prev = k > 0 ? score.frames[k - 1] : silent;
    const std::uint64_t at = frame_start_sample(k, score.rate_hz);

    const std::uint8_t mask = static_cast<std::uint8_t>((cur.p1.note ? 0x01 : 0) | (cur.p2.note ? 0x02 : 0) |
                                                        (cur.tr.note ? 0x04 : 0) | (cur.no.note ? 0x08 : 0));
    w.write(at, kStatus, mask, k == 0);

    schedule_pulse(w, at, 0x4000, prev.p1, cur.p1, p1_ready);
    schedule_pulse(w, at, 0x4004, prev.p2, cur.p2, p2_ready);

    if (cur.tr.note) {
      // Control flag set: length halted and the linear counter reloads to 127
      // on every quarter frame.
      w.write(at, 0x4008, 0xFF);
      const std::uint16_t timer = apu::midi_to_timer(cur.tr.note, apu::ChannelKind::Triangle);
      w.write(at, 0x400A, static_cast<std::uint8_t>(timer & 0xFF));
      if (prev.tr.note != cur.tr.note) {
        w.write(at, 0x400B, static_cast<std::uint8_t>(kMaxLengthIndex | (timer >> 8)), true);
      }
      if (!tr_ready) {
        w.write(at, kFrameCounter, 0x80, true);
        tr_ready = true;
      }
    }

    if (cur.no.note) {
      w.write(at, 0x400C, static_cast<std::uint8_t>(0x30 | cur.no.velocity));
      w.write(at, 0x400E, static_cast<std::uint8_t>((cur.no.timbre << 7) | (16 - cur.no.note)));
      if (prev.no.note == 0) w.write(at, 0x400F, kMaxLengthIndex, true);
    }
  }
  return w.take(frame_start_sample(score.frames.size(), score.rate_hz));
}

void NoiseLfsr::clock(bool mode) {
  const unsigned tap = mode ? 6 : 1;
  const unsigned feedback = (state_ ^ (state_ >> tap)) & 1u;
  state_ = static_cast<std::uint16_t>((state_ >> 1) | (feedback << 14));
}

void OscillatorBank::advance(const apu::ApuState& apu, std::uint32_t cycles) {
  for (int i = 0; i < 2; ++i) {
    const auto& ch = i == 0 ? apu.p1 : apu.p2;
    auto& g = pulse_[i];
    const std::int64_t period = 2 * (std::int64_t{ch.timer_period} + 1);
    g.countdown -= cycles;
    while (g.countdown <= 0) {
      g.step = static_cast<std::uint8_t>((g.step + 1) & 7);
      g.countdown += period;
    }
  }

  // The triangle sequencer only moves while both counters are non-zero.
  const auto& tr = apu.tr;
  if (tr.length_counter > 0 && tr.linear_counter > 0) {
    const std::int64_t period = std::int64_t{tr.timer_period} + 1;
    triangle_.countdown -= cycles;
    while (triangle_.countdown <= 0) {
      triangle_.step = static_cast<std::uint8_t>((triangle_.step + 1) & 31);
      triangle_.countdown += period;
    }
  }

  const std::int64_t noise_period = apu::kNoisePeriods[apu.no.period_index];
  noise_.countdown -= cycles;
  while (noise_.countdown <= 0) {
    lfsr_.clock(apu.no.mode != 0);
    noise_.countdown += noise_period;
  }
}

std::array<int, 4> OscillatorBank::levels(const apu::ApuState& apu) const {
  std::array<int, 4> out{0, 0, 0, 0};
  for (int i = 0; i < 2; ++i) {
    const auto& ch = i == 0 ? apu.p1 : apu.p2;
    if (ch.length_counter > 0 && !apu::sweep_muted(ch, i == 0) && kDutySequences[ch.duty][pulse_[i].step]) {
      out[i] = apu::output_volume(ch);
    }
  }
  const auto& tr = apu.tr;
  if (tr.length_counter > 0 && tr.linear_counter > 0 && tr.timer_period >= 2) {
    out[2] = kTriangleSequence[triangle_.step];
  }
  if (apu.no.length_counter > 0 && !lfsr_.muted()) out[3] = apu::output_volume(apu.no);
  return out;
}

double pulse_out(int p1, int p2) {
  const int sum = p1 + p2;
  if (sum == 0) return 0.0;
  return 95.88 / (8128.0 / sum + 100.0);
}

double tnd_out(int triangle, int noise) {
  if (triangle == 0 && noise == 0) return 0.0;
  return 159.79 / (1.0 / (triangle / 8227.0 + noise / 12241.0) + 100.0);
}

double mix(int p1, int p2, int triangle, int noise) {
  static const double full_scale = pulse_out(15, 15) + tnd_out(15, 15);
  return (pulse_out(p1, p2) + tnd_out(triangle, noise)) / full_scale;
}

PcmBuffer render_writes(const vgm::TimedWriteStream& stream) {
  PcmBuffer buf;
  buf.samples.resize(static_cast<std::size_t>(stream.total_samples));

  apu::ApuState state;
  OscillatorBank osc;
  std::size_t wi = 0;
  const auto& writes = stream.writes;
  for (std::uint64_t i = 0; i < stream.total_samples; ++i) {
    state.sample_clock = i;
    while (apu::next_sequencer_sample(state) <= i) state = apu::step_sequencer(state);
    for (; wi < writes.size() && writes[wi].sample_offset == i; ++wi) {
      state = apu::apply_write(state, writes[wi].reg, writes[wi].value);
      if (writes[wi].reg == 0x4003) osc.reset_pulse_phase(0);
      if (writes[wi].reg == 0x4007) osc.reset_pulse_phase(1);
    }
    // CPU cycles elapsed during this sample, without accumulated drift.
    const std::uint64_t c0 = i * apu::kCpuClockHz / vgm::kSampleRate;
    const std::uint64_t c1 = (i + 1) * apu::kCpuClockHz / vgm::kSampleRate;
    osc.advance(state, static_cast<std::uint32_t>(c1 - c0));
    const auto lv = osc.levels(state);
    buf.samples[i] = static_cast<float>(mix(lv[0], lv[1], lv[2], lv[3]));
  }
  return buf;
}

std::vector<std::uint8_t> write_wav(const PcmBuffer& buffer) {
  const auto data_bytes = static_cast<std::uint32_t>(buffer.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  auto tag = [&](const char* s) { out.insert(out.end(), s, s + 4); };
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto u16 = [&](std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  tag("RIFF");
  u32(36 + data_bytes);
  tag("WAVE");
  tag("fmt ");
  u32(16);
  u16(1);  // PCM
  u16(1);  // mono
  u32(PcmBuffer::sample_rate);
  u32(PcmBuffer::sample_rate * 2);
  u16(2);
  u16(16);
  tag("data");
  u32(data_bytes);
  for (float x : buffer.samples) {
    const double clamped = std::clamp(static_cast<double>(x), -1.0, 1.0);
    u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clamped * 32767.0))));
  }
  return out;
}

}  // namespace nesscore::synth
