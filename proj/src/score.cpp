// Score representations, conversions, NESSCORE text format and corpus split.

#include "nesscore/score.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <limits>
#include <unordered_map>

namespace nesscore {

std::uint64_t frame_start_sample(std::size_t k, double rate_hz) {
  return static_cast<std::uint64_t>(std::floor(static_cast<double>(k) * vgm::kSampleRate / rate_hz));
}

std::size_t frame_count(std::uint64_t total_samples, double rate_hz) {
  return static_cast<std::size_t>(std::ceil(static_cast<double>(total_samples) * rate_hz / vgm::kSampleRate));
}

ExpressiveScore downsample(const apu::Timeline& timeline, double rate_hz) {
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) {
    throw std::invalid_argument("downsample: rate must be positive");
  }
  ExpressiveScore score;
  score.rate_hz = rate_hz;
  const std::size_t n = frame_count(timeline.total_samples(), rate_hz);
  score.frames.reserve(n);
  for (std::size_t k = 0; k < n; ++k) score.frames.push_back(timeline.at(frame_start_sample(k, rate_hz)));
  return score;
}

SeparatedScore to_separated(const ExpressiveScore& score) {
  SeparatedScore out;
  out.rate_hz = score.rate_hz;
  for (auto& row : out.notes) row.reserve(score.length());
  for (const auto& f : score.frames) {
    for (Voice v : kVoices) out.notes[static_cast<int>(v)].push_back(static_cast<std::uint8_t>(f.note(v)));
  }
  return out;
}

BlendedScore to_blended(const SeparatedScore& score) {
  BlendedScore out;
  out.rate_hz = score.rate_hz;
  out.columns.resize(score.length());
  for (std::size_t t = 0; t < score.length(); ++t) {
    for (Voice v : {Voice::P1, Voice::P2, Voice::TR}) {
      const int n = score.at(v, t);
      if (n >= kBlendedLowestNote && n < kBlendedLowestNote + kBlendedRows) {
        out.columns[t].set(static_cast<std::size_t>(n - kBlendedLowestNote));
      }
    }
  }
  return out;
}

namespace {

void check_pulse(std::vector<Diagnostic>& out, std::size_t t, Voice v, const PulseVoice& p) {
  if (!note_in_alphabet(v, p.note)) {
    out.push_back({t, v, "note " + std::to_string(p.note) + " outside {0, 32..108}"});
  } else if (p.note == 0 && (p.velocity != 0 || p.timbre != 0)) {
    out.push_back({t, v, "silent voice must have velocity 0 and timbre 0"});
  } else if (p.note != 0 && (p.velocity < 1 || p.velocity > kVelocityMax)) {
    out.push_back({t, v, "sounding velocity " + std::to_string(p.velocity) + " outside 1..15"});
  } else if (p.timbre > kPulseTimbreMax) {
    out.push_back({t, v, "duty " + std::to_string(p.timbre) + " outside 0..3"});
  }
}

}  // namespace

std::vector<Diagnostic> validate(const ExpressiveScore& score) {
  std::vector<Diagnostic> out;
  if (!(score.rate_hz > 0.0) || !std::isfinite(score.rate_hz)) {
    out.push_back({0, Voice::P1, "frame rate must be positive"});
  }
  for (std::size_t t = 0; t < score.frames.size(); ++t) {
    const auto& f = score.frames[t];
    check_pulse(out, t, Voice::P1, f.p1);
    check_pulse(out, t, Voice::P2, f.p2);
    if (!note_in_alphabet(Voice::TR, f.tr.note)) {
      out.push_back({t, Voice::TR, "note " + std::to_string(f.tr.note) + " outside {0, 21..108}"});
    }
    const auto& n = f.no;
    if (!note_in_alphabet(Voice::NO, n.note)) {
      out.push_back({t, Voice::NO, "note " + std::to_string(n.note) + " outside 0..16"});
    } else if (n.note == 0 && (n.velocity != 0 || n.timbre != 0)) {
      out.push_back({t, Voice::NO, "silent voice must have velocity 0 and timbre 0"});
    } else if (n.note != 0 && (n.velocity < 1 || n.velocity > kVelocityMax)) {
      out.push_back({t, Voice::NO, "sounding velocity " + std::to_string(n.velocity) + " outside 1..15"});
    } else if (n.timbre > kNoiseTimbreMax) {
      out.push_back({t, Voice::NO, "mode " + std::to_string(n.timbre) + " outside 0..1"});
    }
  }
  return out;
}

std::string write_score_text(const ExpressiveScore& score) {
  std::string out = "NESSCORE 1 ";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, score.rate_hz);
  out.append(buf, res.ptr);
  out += ' ';
  out += std::to_string(score.frames.size());
  out += '\n';
  out.reserve(out.size() + score.frames.size() * 32);
  for (const auto& f : score.frames) {
    const int fields[10] = {f.p1.note, f.p1.velocity, f.p1.timbre, f.p2.note, f.p2.velocity,
                            f.p2.timbre, f.tr.note,   f.no.note,   f.no.velocity, f.no.timbre};
    for (int i = 0; i < 10; ++i) {
      if (i) out += ' ';
      out += std::to_string(fields[i]);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const std::size_t next = line.find(' ', pos);
    const std::size_t end = next == std::string_view::npos ? line.size() : next;
    tokens.push_back(line.substr(pos, end - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return tokens;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  if (tok.empty()) return false;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

}  // namespace

ExpressiveScore read_score_text(std::string_view text) {
  using Kind = ScoreFormatError::Kind;
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  if (lines.empty()) throw ScoreFormatError(Kind::MalformedHeader, 1, "empty input");

  const auto header = split_spaces(lines[0]);
  double rate = 0.0;
  std::size_t count = 0;
  if (header.size() != 4 || header[0] != "NESSCORE" || header[1] != "1") {
    throw ScoreFormatError(Kind::MalformedHeader, 1, "expected `NESSCORE 1 <rate_hz> <T>`");
  }
  if (!parse_number(header[2], rate) || !(rate > 0.0) || !std::isfinite(rate)) {
    throw ScoreFormatError(Kind::MalformedHeader, 1, "rate must be a positive number");
  }
  if (!parse_number(header[3], count)) {
    throw ScoreFormatError(Kind::MalformedHeader, 1, "frame count must be a non-negative integer");
  }
  // A trailing newline leaves one empty entry; anything else must be a frame.
  std::size_t body = lines.size() - 1;
  if (body > count && lines.back().empty()) --body;
  if (body != count) {
    throw ScoreFormatError(Kind::MalformedHeader, 1,
                           "header declares " + std::to_string(count) + " frames, found " + std::to_string(body));
  }

  ExpressiveScore score;
  score.rate_hz = rate;
  score.frames.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t lineno = i + 2;
    const auto tok = split_spaces(lines[i + 1]);
    if (tok.size() != 10) {
      throw ScoreFormatError(Kind::BadFieldValue, lineno, "line " + std::to_string(lineno) + ": expected 10 fields");
    }
    int v[10];
    for (int j = 0; j < 10; ++j) {
      if (!parse_number(tok[j], v[j]) || v[j] < 0 || v[j] > 255) {
        throw ScoreFormatError(Kind::BadFieldValue, lineno,
                               "line " + std::to_string(lineno) + ": bad field `" + std::string(tok[j]) + "`");
      }
    }
    auto u8 = [](int x) { return static_cast<std::uint8_t>(x); };
    ExpressiveFrame f;
    f.p1 = {u8(v[0]), u8(v[1]), u8(v[2])};
    f.p2 = {u8(v[3]), u8(v[4]), u8(v[5])};
    f.tr = {u8(v[6])};
    f.no = {u8(v[7]), u8(v[8]), u8(v[9])};
    if (!frame_valid(f)) {
      throw ScoreFormatError(Kind::BadFieldValue, lineno,
                             "line " + std::to_string(lineno) + ": values outside the voice alphabets");
    }
    score.frames.push_back(f);
  }
  return score;
}

namespace {

class DisjointSets {
 public:
  std::size_t add() {
    parent_.push_back(parent_.size());
    return parent_.size() - 1;
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

std::vector<Subset> split_corpus(const std::vector<CorpusEntry>& entries,
                                 const std::array<double, 3>& ratios, std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r > 0.0)) throw std::invalid_argument("split_corpus: ratios must be positive");
  }

  DisjointSets sets;
  std::unordered_map<std::string, std::size_t> games;
  std::unordered_map<std::string, std::size_t> composers;
  std::vector<std::size_t> entry_node(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    auto [git, fresh] = games.try_emplace(e.game_id, 0);
    if (fresh) git->second = sets.add();
    entry_node[i] = git->second;
    // Unknown composers get no node, which is the same as a synthetic
    // singleton composer attached to this game.
    for (const auto& c : e.composers) {
      auto [cit, cfresh] = composers.try_emplace(c, 0);
      if (cfresh) cit->second = sets.add();
      sets.unite(git->second, cit->second);
    }
  }

  // Components in order of first appearance.
  std::map<std::size_t, std::size_t> root_to_component;
  std::vector<std::vector<std::size_t>> components;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::size_t root = sets.find(entry_node[i]);
    auto [it, fresh] = root_to_component.try_emplace(root, components.size());
    if (fresh) components.emplace_back();
    components[it->second].push_back(i);
  }

  std::mt19937_64 rng(seed);
  for (std::size_t i = components.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(components[i - 1], components[j]);
  }

  const double ratio_sum = ratios[0] + ratios[1] + ratios[2];
  const double total = static_cast<double>(entries.size());
  std::array<double, 3> assigned{0.0, 0.0, 0.0};
  std::vector<Subset> out(entries.size(), Subset::Train);
  for (const auto& comp : components) {
    std::size_t best = 0;
    double best_deficit = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < 3; ++s) {
      const double deficit = ratios[s] / ratio_sum * total - assigned[s];
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = s;
      }
    }
    assigned[best] += static_cast<double>(comp.size());
    for (std::size_t i : comp) out[i] = static_cast<Subset>(best);
  }
  return out;
}

}  // namespace nesscore
