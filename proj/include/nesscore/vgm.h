// VGM register-log reader and writer, restricted to the NES APU.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace nesscore::vgm {

inline constexpr std::uint32_t kSampleRate = 44100;
inline constexpr std::uint32_t kNesApuClock = 1789773;
inline constexpr std::uint32_t kVersion161 = 0x00000161;
inline constexpr std::size_t kHeaderSize = 0xC0;

enum class ErrorKind {
  BadMagic,
  UnsupportedCommand,
  TruncatedFile,
  DualChipUnsupported,
  OffsetOverflow,
  BadCompression,
};

const char* error_kind_name(ErrorKind kind);

/// Parse or emit failure. `offset()` is the byte position in the
/// (decompressed) image where the problem was found.
class VgmError : public std::runtime_error {
 public:
  VgmError(ErrorKind kind, std::size_t offset, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  ErrorKind kind_;
  std::size_t offset_;
};

struct Wait {
  std::uint32_t samples = 0;
  bool operator==(const Wait&) const = default;
};

/// 0xB4 write; register_offset is relative to 0x4000.
struct ApuWrite {
  std::uint8_t register_offset = 0;
  std::uint8_t value = 0;
  bool operator==(const ApuWrite&) const = default;
};

/// 0x67 data block. The payload (DPCM sample memory) is not retained.
struct DataBlock {
  std::uint8_t type = 0;
  std::uint32_t size = 0;
  bool operator==(const DataBlock&) const = default;
};

struct EndOfData {
  bool operator==(const EndOfData&) const = default;
};

using Command = std::variant<Wait, ApuWrite, DataBlock, EndOfData>;

struct Document {
  std::uint32_t version = 0;  // BCD, e.g. 0x161
  std::uint32_t eof_offset = 0;
  std::uint32_t data_offset = 0;  // absolute byte index of the first command
  std::uint32_t nes_apu_clock_hz = 0;
  std::vector<Command> commands;
};

struct TimedWrite {
  std::uint64_t sample_offset = 0;
  std::uint16_t reg = 0;  // 0x4000..0x4017
  std::uint8_t value = 0;
  bool operator==(const TimedWrite&) const = default;
};

/// Ordered APU writes at 44.1 kHz sample offsets.
struct TimedWriteStream {
  static constexpr std::uint32_t sample_rate = kSampleRate;
  std::vector<TimedWrite> writes;
  std::uint64_t total_samples = 0;
  bool operator==(const TimedWriteStream&) const = default;
};

/// Registers 0x4010-0x4014 drive the sampler channel, which is not scored.
constexpr bool is_sampler_register(std::uint16_t reg) { return reg >= 0x4010 && reg <= 0x4014; }

/// True if the bytes start with the gzip magic.
bool is_gzip(std::span<const std::uint8_t> bytes);

/// Inflates a gzip image. Throws VgmError(BadCompression).
std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes);

/// Parses a VGM image (raw or gzip-compressed). Zero-length waits are dropped.
Document parse_vgm(std::span<const std::uint8_t> bytes);

/// Accumulates waits into absolute sample offsets.
TimedWriteStream flatten_to_writes(const Document& doc);

/// Emits a minimal v1.61 file that parses back to `stream`.
std::vector<std::uint8_t> write_vgm(const TimedWriteStream& stream);

}  // namespace nesscore::vgm
