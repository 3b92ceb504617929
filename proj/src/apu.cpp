// 2A03 register semantics, frame sequencer and frame extraction.

#include "nesscore/apu.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace nesscore::apu {

namespace {

// Quarter-frame spacing is 7457.5 CPU cycles; in samples that is
// 7457.5 * 44100 / 1789773 = (14915 * 22050) / 1789773.
constexpr std::uint64_t kStepNumerator = 14915ull * 22050ull;

std::string hex16(unsigned v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "$%04X", v);
  return buf;
}

void write_pulse(PulseChannelState& ch, unsigned reg, std::uint8_t v) {
  switch (reg) {
    case 0:
      ch.duty = v >> 6;
      ch.length_halt_env_loop = (v & 0x20) != 0;
      ch.constant_volume = (v & 0x10) != 0;
      ch.volume_or_env_period = v & 0x0F;
      break;
    case 1:
      ch.sweep.enabled = (v & 0x80) != 0;
      ch.sweep.period = (v >> 4) & 0x07;
      ch.sweep.negate = (v & 0x08) != 0;
      ch.sweep.shift = v & 0x07;
      ch.sweep.reload = true;
      break;
    case 2:
      ch.timer_period = static_cast<std::uint16_t>((ch.timer_period & 0x700) | v);
      break;
    case 3:
      ch.timer_period = static_cast<std::uint16_t>((ch.timer_period & 0x0FF) | ((v & 0x07) << 8));
      if (ch.enabled) ch.length_counter = kLengthTable[v >> 3];
      ch.envelope.start = true;
      break;
  }
}

void clock_envelope(Envelope& env, std::uint8_t period, bool loop) {
  if (env.start) {
    env.start = false;
    env.decay_level = 15;
    env.divider = period;
  } else if (env.divider == 0) {
    env.divider = period;
    if (env.decay_level > 0) {
      --env.decay_level;
    } else if (loop) {
      env.decay_level = 15;
    }
  } else {
    --env.divider;
  }
}

void clock_linear(TriangleChannelState& tr) {
  if (tr.linear_reload) {
    tr.linear_counter = tr.linear_reload_value;
  } else if (tr.linear_counter > 0) {
    --tr.linear_counter;
  }
  if (!tr.linear_control) tr.linear_reload = false;
}

void clock_length(std::uint8_t& counter, bool halt) {
  if (counter > 0 && !halt) --counter;
}

void clock_sweep(PulseChannelState& ch, bool is_pulse1) {
  auto& s = ch.sweep;
  if (s.divider == 0 && s.enabled && s.shift > 0 && !sweep_muted(ch, is_pulse1)) {
    ch.timer_period = static_cast<std::uint16_t>(sweep_target(ch, is_pulse1));
  }
  if (s.divider == 0 || s.reload) {
    s.divider = s.period;
    s.reload = false;
  } else {
    --s.divider;
  }
}

std::optional<int> pulse_voice_note(const PulseChannelState& ch, bool is_pulse1) {
  if (!ch.enabled || ch.length_counter == 0 || output_volume(ch) == 0 || sweep_muted(ch, is_pulse1)) {
    return std::nullopt;
  }
  return pitch_to_midi(ch.timer_period, ChannelKind::Pulse);
}

PulseVoice pulse_snapshot(const PulseChannelState& ch, bool is_pulse1) {
  const auto note = pulse_voice_note(ch, is_pulse1);
  if (!note) return {};
  return {static_cast<std::uint8_t>(*note), output_volume(ch), ch.duty};
}

}  // namespace

ApuState apply_write(ApuState state, std::uint16_t reg, std::uint8_t value) {
  if (reg < 0x4000 || reg > 0x4017) {
    throw ApuError(ApuError::Kind::RegisterOutOfRange, "register " + hex16(reg) + " is not an APU register");
  }
  const unsigned r = reg - 0x4000u;
  if (r <= 0x03) {
    write_pulse(state.p1, r, value);
  } else if (r <= 0x07) {
    write_pulse(state.p2, r - 4, value);
  } else if (r == 0x08) {
    state.tr.linear_control = (value & 0x80) != 0;
    state.tr.linear_reload_value = value & 0x7F;
  } else if (r == 0x0A) {
    state.tr.timer_period = static_cast<std::uint16_t>((state.tr.timer_period & 0x700) | value);
  } else if (r == 0x0B) {
    state.tr.timer_period = static_cast<std::uint16_t>((state.tr.timer_period & 0x0FF) | ((value & 0x07) << 8));
    if (state.tr.enabled) state.tr.length_counter = kLengthTable[value >> 3];
    state.tr.linear_reload = true;
  } else if (r == 0x0C) {
    state.no.length_halt_env_loop = (value & 0x20) != 0;
    state.no.constant_volume = (value & 0x10) != 0;
    state.no.volume_or_env_period = value & 0x0F;
  } else if (r == 0x0E) {
    state.no.mode = value >> 7;
    state.no.period_index = value & 0x0F;
  } else if (r == 0x0F) {
    if (state.no.enabled) state.no.length_counter = kLengthTable[value >> 3];
    state.no.envelope.start = true;
  } else if (r == 0x15) {
    state.p1.enabled = (value & 0x01) != 0;
    state.p2.enabled = (value & 0x02) != 0;
    state.tr.enabled = (value & 0x04) != 0;
    state.no.enabled = (value & 0x08) != 0;
    if (!state.p1.enabled) state.p1.length_counter = 0;
    if (!state.p2.enabled) state.p2.length_counter = 0;
    if (!state.tr.enabled) state.tr.length_counter = 0;
    if (!state.no.enabled) state.no.length_counter = 0;
  } else if (r == 0x17) {
    state.frame_mode = (value & 0x80) ? FrameMode::FiveStep : FrameMode::FourStep;
    state.sequencer_origin = state.sample_clock;
    state.sequencer_step = 0;
    // Entering 5-step mode clocks every unit immediately.
    if (value & 0x80) state = clock_frame_sequencer(state, TickKind::Half);
  }
  // $4009, $400D, $4010-$4014 (sampler) and $4016 have no effect here.
  return state;
}

ApuState clock_frame_sequencer(ApuState state, TickKind tick) {
  clock_envelope(state.p1.envelope, state.p1.volume_or_env_period, state.p1.length_halt_env_loop);
  clock_envelope(state.p2.envelope, state.p2.volume_or_env_period, state.p2.length_halt_env_loop);
  clock_envelope(state.no.envelope, state.no.volume_or_env_period, state.no.length_halt_env_loop);
  clock_linear(state.tr);
  if (tick == TickKind::Half) {
    clock_length(state.p1.length_counter, state.p1.length_halt_env_loop);
    clock_length(state.p2.length_counter, state.p2.length_halt_env_loop);
    clock_length(state.tr.length_counter, state.tr.linear_control);
    clock_length(state.no.length_counter, state.no.length_halt_env_loop);
    clock_sweep(state.p1, true);
    clock_sweep(state.p2, false);
  }
  return state;
}

int sweep_target(const PulseChannelState& ch, bool is_pulse1) {
  const int period = ch.timer_period;
  const int change = period >> ch.sweep.shift;
  if (!ch.sweep.negate) return period + change;
  const int target = period - change - (is_pulse1 ? 1 : 0);
  return std::max(target, 0);
}

bool sweep_muted(const PulseChannelState& ch, bool is_pulse1) {
  return ch.timer_period < 8 || sweep_target(ch, is_pulse1) > 0x7FF;
}

std::uint8_t output_volume(const PulseChannelState& ch) {
  return ch.constant_volume ? ch.volume_or_env_period : ch.envelope.decay_level;
}

std::uint8_t output_volume(const NoiseChannelState& ch) {
  return ch.constant_volume ? ch.volume_or_env_period : ch.envelope.decay_level;
}

std::optional<int> pitch_to_midi(int timer_period, ChannelKind kind) {
  if (timer_period < 0 || timer_period > 0x7FF) return std::nullopt;
  const double divisor = kind == ChannelKind::Pulse ? 16.0 : 32.0;
  const double freq = kCpuClockHz / (divisor * (timer_period + 1));
  const int note = static_cast<int>(std::round(69.0 + 12.0 * std::log2(freq / 440.0)));
  const int lo = kind == ChannelKind::Pulse ? kPulseNoteMin : kTriangleNoteMin;
  if (note < lo || note > kMelodicNoteMax) return std::nullopt;
  return note;
}

std::uint16_t midi_to_timer(int note, ChannelKind kind) {
  const int lo = kind == ChannelKind::Pulse ? kPulseNoteMin : kTriangleNoteMin;
  const char* name = kind == ChannelKind::Pulse ? "pulse" : "triangle";
  if (note < lo || note > kMelodicNoteMax) {
    throw ApuError(ApuError::Kind::NoteOutOfRange,
                   "note " + std::to_string(note) + " outside " + name + " range");
  }
  const double divisor = kind == ChannelKind::Pulse ? 16.0 : 32.0;
  const double freq = 440.0 * std::pow(2.0, (note - 69) / 12.0);
  const long t0 = std::lround(kCpuClockHz / (divisor * freq) - 1.0);
  for (long t : {t0, t0 - 1, t0 + 1}) {
    if (t >= 0 && t <= 0x7FF && pitch_to_midi(static_cast<int>(t), kind) == note) {
      return static_cast<std::uint16_t>(t);
    }
  }
  throw ApuError(ApuError::Kind::NoteOutOfRange,
                 "note " + std::to_string(note) + " is not reachable by an 11-bit " + name + " timer");
}

ExpressiveFrame snapshot(const ApuState& state) {
  ExpressiveFrame f;
  f.p1 = pulse_snapshot(state.p1, true);
  f.p2 = pulse_snapshot(state.p2, false);

  const auto& tr = state.tr;
  if (tr.enabled && tr.length_counter > 0 && tr.linear_counter > 0 && tr.timer_period >= 2) {
    if (auto note = pitch_to_midi(tr.timer_period, ChannelKind::Triangle)) {
      f.tr.note = static_cast<std::uint8_t>(*note);
    }
  }

  const auto& no = state.no;
  const std::uint8_t vol = output_volume(no);
  if (no.enabled && no.length_counter > 0 && vol > 0) {
    f.no = {static_cast<std::uint8_t>(16 - no.period_index), vol, no.mode};
  }
  return f;
}

std::uint64_t next_sequencer_sample(const ApuState& state) {
  return state.sequencer_origin + ((state.sequencer_step + 1) * kStepNumerator) / kCpuClockHz;
}

ApuState step_sequencer(ApuState state) {
  const std::uint64_t step = ++state.sequencer_step;
  if (state.frame_mode == FrameMode::FourStep) {
    // Steps 1..4 repeating: Q, Q+H, Q, Q+H.
    return clock_frame_sequencer(state, step % 2 == 0 ? TickKind::Half : TickKind::Quarter);
  }
  // Steps 1..5 repeating: Q, Q+H, Q, -, Q+H.
  switch (step % 5) {
    case 1:
    case 3: return clock_frame_sequencer(state, TickKind::Quarter);
    case 2:
    case 0: return clock_frame_sequencer(state, TickKind::Half);
    default: return state;
  }
}

Timeline::Timeline(std::uint64_t total_samples, std::vector<std::pair<std::uint64_t, ExpressiveFrame>> changes)
    : total_samples_(total_samples), changes_(std::move(changes)) {}

const ExpressiveFrame& Timeline::at(std::uint64_t sample) const {
  if (sample >= total_samples_ || changes_.empty()) {
    throw std::out_of_range("Timeline::at: sample beyond the timeline");
  }
  auto it = std::upper_bound(changes_.begin(), changes_.end(), sample,
                             [](std::uint64_t s, const auto& c) { return s < c.first; });
  return std::prev(it)->second;
}

Timeline extract_timeline(const vgm::TimedWriteStream& stream) {
  const std::uint64_t total = stream.total_samples;
  std::vector<std::pair<std::uint64_t, ExpressiveFrame>> changes;
  if (total == 0) return Timeline(0, {});

  const auto& writes = stream.writes;
  ApuState state;
  std::size_t wi = 0;
  std::uint64_t sample = 0;
  for (;;) {
    state.sample_clock = sample;
    while (next_sequencer_sample(state) <= sample) state = step_sequencer(state);
    while (wi < writes.size() && writes[wi].sample_offset == sample) {
      state = apply_write(state, writes[wi].reg, writes[wi].value);
      ++wi;
    }
    if (wi < writes.size() && writes[wi].sample_offset < sample) {
      throw std::invalid_argument("extract_timeline: write offsets must be non-decreasing");
    }
    const ExpressiveFrame frame = snapshot(state);
    if (changes.empty() || changes.back().second != frame) changes.emplace_back(sample, frame);

    std::uint64_t next = next_sequencer_sample(state);
    if (wi < writes.size()) next = std::min(next, writes[wi].sample_offset);
    if (next >= total) break;
    sample = next;
  }
  return Timeline(total, std::move(changes));
}

}  // namespace nesscore::apu
