#include "nesscore/corpus.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>

#include "nesscore/apu.h"
#include "nesscore/midi.h"
#include "nesscore/vgm.h"

namespace nesscore::corpus {

namespace {

std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = std::min(s.find(',', start), s.size());
    if (end > start) out.emplace_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

bool starts_with(std::span<const std::uint8_t> bytes, std::string_view magic) {
  return bytes.size() >= magic.size() && std::equal(magic.begin(), magic.end(), bytes.begin(),
                                                    [](char c, std::uint8_t b) { return static_cast<std::uint8_t>(c) == b; });
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  std::vector<ManifestEntry> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;

    ManifestEntry e;
    e.path = std::filesystem::path(token);
    if (e.path.is_relative()) e.path = base_dir / e.path;
    while (fields >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) {
        throw ManifestError(lineno, "manifest line " + std::to_string(lineno) + ": expected key=value, got `" + token + "`");
      }
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      if (key == "game") {
        e.game = value;
      } else if (key == "composer") {
        for (auto& c : split_commas(value)) e.composers.push_back(std::move(c));
      } else {
        throw ManifestError(lineno, "manifest line " + std::to_string(lineno) + ": unknown attribute `" + key + "`");
      }
    }
    if (e.game.empty()) e.game = e.path.string();
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  const auto bytes = read_file(manifest);
  return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                        manifest.parent_path());
}

std::vector<CorpusEntry> to_corpus_entries(std::span<const ManifestEntry> entries) {
  std::vector<CorpusEntry> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    out.push_back({e.path.string(), e.game, e.composers, e.path.string()});
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open `" + path.string() + "`");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write `" + path.string() + "`");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for `" + path.string() + "`");
}

ExpressiveScore load_score(const std::filesystem::path& path, double rate_hz) {
  auto bytes = read_file(path);
  if (vgm::is_gzip(bytes)) bytes = vgm::gunzip(bytes);
  if (starts_with(bytes, "Vgm ")) {
    const auto stream = vgm::flatten_to_writes(vgm::parse_vgm(bytes));
    auto score = downsample(apu::extract_timeline(stream), rate_hz);
    score.provenance = path.string();
    return score;
  }
  if (starts_with(bytes, "MThd")) {
    auto score = midi::midi_to_score(bytes, rate_hz);
    score.provenance = path.string();
    return score;
  }
  if (starts_with(bytes, "NESSCORE")) {
    auto score = read_score_text(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    score.provenance = path.string();
    return score;
  }
  throw std::runtime_error("`" + path.string() + "` is not a NESSCORE, VGM or MIDI file");
}

std::vector<ExpressiveScore> load_all(std::span<const ManifestEntry> entries, double rate_hz, unsigned workers) {
  const std::size_t n = entries.size();
  std::vector<ExpressiveScore> scores(n);
  std::vector<std::exception_ptr> errors(n);
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        scores[i] = load_score(entries[i].path, rate_hz);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return scores;
}

}  // namespace nesscore::corpus
