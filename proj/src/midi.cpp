// SMF writer and reader for the per-voice expressive score profile.

#include "nesscore/midi.h"

#include <algorithm>
#include <cstdio>
#include <array>
#include <cmath>
#include <cstring>

namespace nesscore::midi {

namespace {

constexpr std::uint8_t kNoteOff = 0x80;
constexpr std::uint8_t kNoteOn = 0x90;
constexpr std::uint8_t kControl = 0xB0;
constexpr std::uint8_t kMeta = 0xFF;
constexpr std::uint8_t kMetaEndOfTrack = 0x2F;
constexpr std::uint8_t kMetaTempo = 0x51;
constexpr std::uint8_t kMetaTrackName = 0x03;

// Voice state as seen by one track.
struct VoiceState {
  int note = 0;
  int velocity = 0;
  int timbre = 0;
};

VoiceState voice_of(const ExpressiveFrame& f, Voice v) {
  switch (v) {
    case Voice::P1: return {f.p1.note, f.p1.velocity, f.p1.timbre};
    case Voice::P2: return {f.p2.note, f.p2.velocity, f.p2.timbre};
    case Voice::TR: return {f.tr.note, 0, 0};
    case Voice::NO: return {f.no.note, f.no.velocity, f.no.timbre};
  }
  return {};
}

void put_vlq(std::vector<std::uint8_t>& out, std::uint64_t v) {
  std::uint8_t buf[10];
  int n = 0;
  buf[n++] = static_cast<std::uint8_t>(v & 0x7F);
  while (v >>= 7) buf[n++] = static_cast<std::uint8_t>(0x80 | (v & 0x7F));
  while (n) out.push_back(buf[--n]);
}

void put_be(std::vector<std::uint8_t>& out, std::uint32_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class TrackWriter {
 public:
  void event(std::uint64_t tick, std::initializer_list<std::uint8_t> bytes) {
    put_vlq(body_, tick - last_);
    last_ = tick;
    body_.insert(body_.end(), bytes);
  }
  void meta(std::uint64_t tick, std::uint8_t type, std::span<const std::uint8_t> data) {
    put_vlq(body_, tick - last_);
    last_ = tick;
    body_.push_back(kMeta);
    body_.push_back(type);
    put_vlq(body_, data.size());
    body_.insert(body_.end(), data.begin(), data.end());
  }
  void finish(std::vector<std::uint8_t>& out, std::uint64_t end_tick) {
    meta(std::max(end_tick, last_), kMetaEndOfTrack, {});
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    put_be(out, static_cast<std::uint32_t>(body_.size()), 4);
    out.insert(out.end(), body_.begin(), body_.end());
  }

 private:
  std::vector<std::uint8_t> body_;
  std::uint64_t last_ = 0;
};

[[noreturn]] void not_smf(const std::string& why) { throw MidiError(MidiError::Kind::NotSmf, why); }
[[noreturn]] void unmappable(const std::string& why) { throw MidiError(MidiError::Kind::UnmappableEvent, why); }

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> b, std::size_t pos, std::size_t end) : b_(b), pos_(pos), end_(end) {}
  bool done() const { return pos_ >= end_; }
  std::size_t pos() const { return pos_; }
  std::uint8_t u8() {
    if (pos_ >= end_) not_smf("truncated track data");
    return b_[pos_++];
  }
  std::uint8_t peek() const {
    if (pos_ >= end_) not_smf("truncated track data");
    return b_[pos_];
  }
  std::uint64_t vlq() {
    std::uint64_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint8_t c = u8();
      v = (v << 7) | (c & 0x7F);
      if (!(c & 0x80)) return v;
    }
    not_smf("variable-length quantity longer than 4 bytes");
  }
  void skip(std::uint64_t n) {
    if (n > end_ - pos_) not_smf("truncated track data");
    pos_ += static_cast<std::size_t>(n);
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_;
  std::size_t end_;
};

std::uint32_t read_be(std::span<const std::uint8_t> b, std::size_t at, int bytes) {
  std::uint32_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | b[at + i];
  return v;
}

}  // namespace

std::uint8_t velocity_to_midi(int velocity) {
  if (velocity <= 0) return 0;
  return static_cast<std::uint8_t>(std::max(1L, std::lround(velocity * 127.0 / 15.0)));
}

int velocity_from_midi(int midi_velocity) {
  if (midi_velocity <= 0) return 0;
  return std::clamp(static_cast<int>(std::lround(midi_velocity * 15.0 / 127.0)), 1, kVelocityMax);
}

std::uint64_t frame_to_tick(std::size_t k, double rate_hz) {
  return static_cast<std::uint64_t>(std::llround(static_cast<double>(k) * vgm::kSampleRate / rate_hz));
}

std::vector<std::uint8_t> score_to_midi(const ExpressiveScore& score) {
  constexpr std::uint16_t kTracks = 5;
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'M', 'T', 'h', 'd'});
  put_be(out, 6, 4);
  put_be(out, 1, 2);
  put_be(out, kTracks, 2);
  put_be(out, kTicksPerQuarter, 2);

  const std::size_t frames = score.length();
  const std::uint64_t end_tick = frame_to_tick(frames, score.rate_hz);

  TrackWriter tempo;
  const std::uint8_t tempo_bytes[3] = {static_cast<std::uint8_t>(kTempoMicros >> 16),
                                       static_cast<std::uint8_t>(kTempoMicros >> 8),
                                       static_cast<std::uint8_t>(kTempoMicros)};
  tempo.meta(0, kMetaTempo, tempo_bytes);
  tempo.finish(out, end_tick);

  for (Voice v : kVoices) {
    const auto channel = static_cast<std::uint8_t>(v);
    const std::uint8_t on = kNoteOn | channel;
    const std::uint8_t off = kNoteOff | channel;
    const std::uint8_t cc = kControl | channel;
    const bool has_expression = v != Voice::TR;

    TrackWriter track;
    const auto name = voice_name(v);
    track.meta(0, kMetaTrackName,
               std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(name.data()), name.size()));

    VoiceState prev;
    int timbre_cc = 0;
    for (std::size_t k = 0; k < frames; ++k) {
      const VoiceState cur = voice_of(score.frames[k], v);
      const std::uint64_t tick = frame_to_tick(k, score.rate_hz);
      if (cur.note != prev.note) {
        if (prev.note > 0) track.event(tick, {off, static_cast<std::uint8_t>(prev.note), 0});
        if (cur.note > 0) {
          if (has_expression && cur.timbre != timbre_cc) {
            track.event(tick, {cc, kTimbreCc, static_cast<std::uint8_t>(cur.timbre)});
            timbre_cc = cur.timbre;
          }
          const std::uint8_t vel = has_expression ? velocity_to_midi(cur.velocity) : kTriangleVelocity;
          track.event(tick, {on, static_cast<std::uint8_t>(cur.note), vel});
        }
      } else if (cur.note > 0 && has_expression) {
        if (cur.velocity != prev.velocity) {
          track.event(tick, {cc, kExpressionCc, velocity_to_midi(cur.velocity)});
        }
        if (cur.timbre != timbre_cc) {
          track.event(tick, {cc, kTimbreCc, static_cast<std::uint8_t>(cur.timbre)});
          timbre_cc = cur.timbre;
        }
      }
      prev = cur;
    }
    if (prev.note > 0) track.event(end_tick, {off, static_cast<std::uint8_t>(prev.note), 0});
    track.finish(out, end_tick);
  }
  return out;
}

std::vector<std::vector<TrackEvent>> read_tracks(std::span<const std::uint8_t> bytes, std::uint16_t* division) {
  if (bytes.size() < 14 || std::memcmp(bytes.data(), "MThd", 4) != 0) not_smf("missing MThd header");
  const std::uint32_t header_len = read_be(bytes, 4, 4);
  if (header_len < 6 || 8 + static_cast<std::size_t>(header_len) > bytes.size()) not_smf("bad MThd length");
  const std::uint16_t ntracks = static_cast<std::uint16_t>(read_be(bytes, 10, 2));
  if (division) *division = static_cast<std::uint16_t>(read_be(bytes, 12, 2));

  std::vector<std::vector<TrackEvent>> tracks;
  std::size_t pos = 8 + header_len;
  while (tracks.size() < ntracks) {
    if (pos + 8 > bytes.size()) not_smf("file ends before all tracks were read");
    const std::uint32_t len = read_be(bytes, pos + 4, 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) not_smf("track chunk runs past end of file");
    if (std::memcmp(bytes.data() + pos, "MTrk", 4) != 0) {
      pos = body + len;  // unknown chunk types are skipped
      continue;
    }

    ByteReader r(bytes, body, body + len);
    std::vector<TrackEvent> events;
    std::uint64_t tick = 0;
    std::uint8_t running = 0;
    bool ended = false;
    while (!r.done()) {
      tick += r.vlq();
      std::uint8_t status = r.peek();
      if (status & 0x80) {
        r.u8();
      } else {
        if (!running) not_smf("data byte without running status");
        status = running;
      }
      if (status == kMeta) {
        const std::uint8_t type = r.u8();
        const std::uint64_t n = r.vlq();
        TrackEvent ev{tick, kMeta, type, 0};
        if (type == kMetaTempo) {
          if (n != 3) not_smf("tempo meta event with bad length");
          const std::uint32_t us = (std::uint32_t{r.u8()} << 16) | (std::uint32_t{r.u8()} << 8) | r.u8();
          if (us != kTempoMicros) unmappable("tempo other than 500000 us/quarter");
        } else {
          r.skip(n);
        }
        events.push_back(ev);
        running = 0;
        if (type == kMetaEndOfTrack) {
          ended = true;
          break;
        }
      } else if (status == 0xF0 || status == 0xF7) {
        unmappable("system exclusive event");
      } else if (status >= 0x80 && status < 0xF0) {
        running = status;
        const std::uint8_t kind = status & 0xF0;
        TrackEvent ev{tick, status, r.u8(), 0};
        if (kind != 0xC0 && kind != 0xD0) ev.data2 = r.u8();
        events.push_back(ev);
      } else {
        not_smf("invalid status byte");
      }
    }
    if (!ended) not_smf("track without end-of-track event");
    tracks.push_back(std::move(events));
    pos = body + len;
  }
  return tracks;
}

namespace {

void apply_event(VoiceState& st, const TrackEvent& ev, Voice v) {
  if (ev.status == kMeta) return;
  const bool has_expression = v != Voice::TR;
  const std::uint8_t kind = ev.status & 0xF0;
  if (kind == kNoteOn && ev.data2 > 0) {
    if (!note_in_alphabet(v, ev.data1)) {
      unmappable("note " + std::to_string(ev.data1) + " outside the " + std::string(voice_name(v)) + " range");
    }
    st.note = ev.data1;
    st.velocity = has_expression ? velocity_from_midi(ev.data2) : 0;
  } else if (kind == kNoteOff || kind == kNoteOn) {
    if (ev.data1 == st.note) st.note = 0;
  } else if (kind == kControl && has_expression && ev.data1 == kExpressionCc) {
    st.velocity = velocity_from_midi(ev.data2);
  } else if (kind == kControl && has_expression && ev.data1 == kTimbreCc) {
    const int max = v == Voice::NO ? kNoiseTimbreMax : kPulseTimbreMax;
    if (ev.data2 > max) unmappable("timbre controller value out of range");
    st.timbre = ev.data2;
  } else {
    char hexbuf[8];
    std::snprintf(hexbuf, sizeof hexbuf, "0x%02X", ev.status);
    unmappable(std::string("event status ") + hexbuf + " is outside the score mapping");
  }
}

}  // namespace

ExpressiveScore midi_to_score(std::span<const std::uint8_t> bytes, double rate_hz) {
  if (!(rate_hz > 0.0)) throw std::invalid_argument("midi_to_score: rate must be positive");
  std::uint16_t division = 0;
  const auto tracks = read_tracks(bytes, &division);
  if (read_be(bytes, 8, 2) != 1 || tracks.size() != 5) unmappable("expected a type-1 file with 5 tracks");
  if (division != kTicksPerQuarter) unmappable("expected 22050 ticks per quarter note");

  std::uint64_t end_tick = 0;
  for (const auto& t : tracks) {
    if (!t.empty()) end_tick = std::max(end_tick, t.back().tick);
  }
  for (const auto& ev : tracks[0]) {
    if (ev.status != kMeta) unmappable("channel event in the tempo track");
  }

  const auto frames = static_cast<std::size_t>(std::llround(static_cast<double>(end_tick) * rate_hz / vgm::kSampleRate));
  ExpressiveScore score;
  score.rate_hz = rate_hz;
  score.frames.resize(frames);

  for (Voice v : kVoices) {
    const auto& events = tracks[1 + static_cast<int>(v)];
    VoiceState st;
    std::size_t ei = 0;
    for (std::size_t k = 0; k < frames; ++k) {
      const std::uint64_t tick = frame_to_tick(k, rate_hz);
      for (; ei < events.size() && events[ei].tick <= tick; ++ei) {
        apply_event(st, events[ei], v);
      }
      auto& f = score.frames[k];
      const auto note = static_cast<std::uint8_t>(st.note);
      const auto vel = static_cast<std::uint8_t>(st.note ? std::max(st.velocity, 1) : 0);
      const auto timbre = static_cast<std::uint8_t>(st.note ? st.timbre : 0);
      switch (v) {
        case Voice::P1: f.p1 = {note, vel, timbre}; break;
        case Voice::P2: f.p2 = {note, vel, timbre}; break;
        case Voice::TR: f.tr = {note}; break;
        case Voice::NO: f.no = {note, vel, timbre}; break;
      }
    }
    // Events past the last frame are still checked against the mapping.
    for (; ei < events.size(); ++ei) apply_event(st, events[ei], v);
  }
  return score;
}

}  // namespace nesscore::midi
