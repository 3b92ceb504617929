// Corpus manifests and format-sniffing score loading.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nesscore/score.h"

namespace nesscore::corpus {

/// One manifest line: `path [game=ID] [composer=A,B] ...`. Paths are
/// resolved against the manifest's directory; a missing game defaults to
/// the path itself.
struct ManifestEntry {
  std::filesystem::path path;
  std::string game;
  std::vector<std::string> composers;
};

class ManifestError : public std::runtime_error {
 public:
  ManifestError(std::size_t line, const std::string& what) : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::filesystem::path& base_dir);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);

std::vector<CorpusEntry> to_corpus_entries(std::span<const ManifestEntry> entries);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Accepts NESSCORE text, VGM (plain or gzip) or a Standard MIDI File.
/// VGM input is extracted and downsampled at `rate_hz`; other formats carry
/// their own rate (MIDI is read at `rate_hz`).
ExpressiveScore load_score(const std::filesystem::path& path, double rate_hz);

/// Loads every entry with a pool of worker threads; the result keeps
/// manifest order. The first failure (in manifest order) is rethrown.
std::vector<ExpressiveScore> load_all(std::span<const ManifestEntry> entries, double rate_hz,
                                      unsigned workers = 0);

}  // namespace nesscore::corpus
