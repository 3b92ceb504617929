// VGM parsing and emission for NES APU logs.

#include "nesscore/vgm.h"

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <limits>

namespace nesscore::vgm {

namespace {

constexpr std::uint8_t kMagic[4] = {0x56, 0x67, 0x6D, 0x20};

constexpr std::size_t kEofField = 0x04;
constexpr std::size_t kVersionField = 0x08;
constexpr std::size_t kTotalSamplesField = 0x18;
constexpr std::size_t kDataOffsetField = 0x34;
constexpr std::size_t kNesClockField = 0x84;
constexpr std::size_t kLegacyDataStart = 0x40;

constexpr std::uint8_t kOpWait16 = 0x61;
constexpr std::uint8_t kOpWaitNtsc = 0x62;
constexpr std::uint8_t kOpWaitPal = 0x63;
constexpr std::uint8_t kOpEnd = 0x66;
constexpr std::uint8_t kOpDataBlock = 0x67;
constexpr std::uint8_t kOpNesApu = 0xB4;

constexpr std::uint32_t kWaitNtsc = 735;
constexpr std::uint32_t kWaitPal = 882;

std::string hex(std::size_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%zX", v);
  return buf;
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

void put_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  b[at] = static_cast<std::uint8_t>(v);
  b[at + 1] = static_cast<std::uint8_t>(v >> 8);
  b[at + 2] = static_cast<std::uint8_t>(v >> 16);
  b[at + 3] = static_cast<std::uint8_t>(v >> 24);
}

// Bounds-checked cursor over the command stream.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ >= bytes_.size(); }

  void need(std::size_t n, std::size_t cmd_start) const {
    if (pos_ + n > bytes_.size()) {
      throw VgmError(ErrorKind::TruncatedFile, cmd_start,
                     "command at " + hex(cmd_start) + " runs past end of file");
    }
  }

  std::uint8_t u8() { return bytes_[pos_++]; }
  std::uint16_t u16() {
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = read_u32(bytes_, pos_);
    pos_ += 4;
    return v;
  }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
};

Document parse_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw VgmError(ErrorKind::BadMagic, 0, "not a VGM file (missing \"Vgm \" magic)");
  }
  if (bytes.size() < kLegacyDataStart) {
    throw VgmError(ErrorKind::TruncatedFile, bytes.size(), "header shorter than 0x40 bytes");
  }

  Document doc;
  doc.eof_offset = read_u32(bytes, kEofField);
  doc.version = read_u32(bytes, kVersionField);

  std::size_t data_start = kLegacyDataStart;
  const std::uint32_t rel = read_u32(bytes, kDataOffsetField);
  if (doc.version >= 0x150 && rel != 0) data_start = kDataOffsetField + rel;
  if (data_start > bytes.size()) {
    throw VgmError(ErrorKind::TruncatedFile, kDataOffsetField,
                   "data offset " + hex(data_start) + " beyond end of file");
  }
  doc.data_offset = static_cast<std::uint32_t>(data_start);
  if (data_start >= kNesClockField + 4) doc.nes_apu_clock_hz = read_u32(bytes, kNesClockField);

  Reader r(bytes, data_start);
  for (;;) {
    if (r.at_end()) {
      throw VgmError(ErrorKind::TruncatedFile, r.pos(), "missing end-of-data command (0x66)");
    }
    const std::size_t start = r.pos();
    const std::uint8_t op = r.u8();
    if (op == kOpEnd) {
      doc.commands.emplace_back(EndOfData{});
      break;
    }
    if (op == kOpWait16) {
      r.need(2, start);
      const std::uint16_t n = r.u16();
      if (n > 0) doc.commands.emplace_back(Wait{n});
    } else if (op == kOpWaitNtsc) {
      doc.commands.emplace_back(Wait{kWaitNtsc});
    } else if (op == kOpWaitPal) {
      doc.commands.emplace_back(Wait{kWaitPal});
    } else if ((op & 0xF0) == 0x70) {
      doc.commands.emplace_back(Wait{static_cast<std::uint32_t>((op & 0x0F) + 1)});
    } else if (op == kOpNesApu) {
      r.need(2, start);
      const std::uint8_t addr = r.u8();
      const std::uint8_t value = r.u8();
      if (addr & 0x80) {
        throw VgmError(ErrorKind::DualChipUnsupported, start,
                       "second-chip NES APU write at " + hex(start));
      }
      if (addr > 0x17) {
        throw VgmError(ErrorKind::UnsupportedCommand, start,
                       "NES register offset " + hex(addr) + " at " + hex(start) +
                           " is outside the APU range");
      }
      doc.commands.emplace_back(ApuWrite{addr, value});
    } else if (op == kOpDataBlock) {
      r.need(6, start);
      const std::uint8_t compat = r.u8();
      if (compat != kOpEnd) {
        throw VgmError(ErrorKind::UnsupportedCommand, start,
                       "malformed data block at " + hex(start));
      }
      const std::uint8_t type = r.u8();
      const std::uint32_t size = r.u32() & 0x7FFFFFFF;
      r.need(size, start);
      r.skip(size);
      doc.commands.emplace_back(DataBlock{type, size});
    } else {
      throw VgmError(ErrorKind::UnsupportedCommand, start,
                     "unsupported command " + hex(op) + " at " + hex(start));
    }
  }
  return doc;
}

void emit_wait(std::vector<std::uint8_t>& out, std::uint64_t samples) {
  while (samples > 0) {
    if (samples <= 16) {
      out.push_back(static_cast<std::uint8_t>(0x70 | (samples - 1)));
      return;
    }
    if (samples == kWaitNtsc) {
      out.push_back(kOpWaitNtsc);
      return;
    }
    if (samples == kWaitPal) {
      out.push_back(kOpWaitPal);
      return;
    }
    const auto chunk = static_cast<std::uint16_t>(std::min<std::uint64_t>(samples, 0xFFFF));
    out.push_back(kOpWait16);
    out.push_back(static_cast<std::uint8_t>(chunk));
    out.push_back(static_cast<std::uint8_t>(chunk >> 8));
    samples -= chunk;
  }
}

}  // namespace

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::UnsupportedCommand: return "UnsupportedCommand";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::DualChipUnsupported: return "DualChipUnsupported";
    case ErrorKind::OffsetOverflow: return "OffsetOverflow";
    case ErrorKind::BadCompression: return "BadCompression";
  }
  return "Unknown";
}

VgmError::VgmError(ErrorKind kind, std::size_t offset, const std::string& what)
    : std::runtime_error(what), kind_(kind), offset_(offset) {}

bool is_gzip(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  // 16 + MAX_WBITS selects the gzip wrapper.
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) {
    throw VgmError(ErrorKind::BadCompression, 0, "zlib initialization failed");
  }
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());

  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 15];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof chunk;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      const std::size_t at = zs.total_in;
      inflateEnd(&zs);
      throw VgmError(rc == Z_BUF_ERROR ? ErrorKind::TruncatedFile : ErrorKind::BadCompression, at,
                     "gzip stream error near compressed offset " + hex(at));
    }
    out.insert(out.end(), chunk, chunk + (sizeof chunk - zs.avail_out));
  }
  inflateEnd(&zs);
  return out;
}

Document parse_vgm(std::span<const std::uint8_t> bytes) {
  if (is_gzip(bytes)) {
    const auto raw = gunzip(bytes);
    return parse_image(raw);
  }
  return parse_image(bytes);
}

TimedWriteStream flatten_to_writes(const Document& doc) {
  TimedWriteStream stream;
  std::uint64_t now = 0;
  for (const auto& cmd : doc.commands) {
    if (const auto* w = std::get_if<Wait>(&cmd)) {
      now += w->samples;
    } else if (const auto* a = std::get_if<ApuWrite>(&cmd)) {
      stream.writes.push_back({now, static_cast<std::uint16_t>(0x4000 + a->register_offset), a->value});
    }
  }
  stream.total_samples = now;
  return stream;
}

std::vector<std::uint8_t> write_vgm(const TimedWriteStream& stream) {
  if (stream.total_samples > std::numeric_limits<std::uint32_t>::max()) {
    throw VgmError(ErrorKind::OffsetOverflow, 0, "stream longer than 2^32-1 samples");
  }
  std::vector<std::uint8_t> out(kHeaderSize, 0);
  std::copy(std::begin(kMagic), std::end(kMagic), out.begin());
  put_u32(out, kVersionField, kVersion161);
  put_u32(out, kTotalSamplesField, static_cast<std::uint32_t>(stream.total_samples));
  put_u32(out, kDataOffsetField, static_cast<std::uint32_t>(kHeaderSize - kDataOffsetField));
  put_u32(out, kNesClockField, kNesApuClock);

  std::uint64_t now = 0;
  for (const auto& w : stream.writes) {
    if (w.sample_offset < now) {
      throw std::invalid_argument("write_vgm: sample offsets must be non-decreasing");
    }
    if (w.reg < 0x4000 || w.reg > 0x4017) {
      throw std::invalid_argument("write_vgm: register outside 0x4000-0x4017");
    }
    emit_wait(out, w.sample_offset - now);
    now = w.sample_offset;
    out.push_back(kOpNesApu);
    out.push_back(static_cast<std::uint8_t>(w.reg - 0x4000));
    out.push_back(w.value);
  }
  if (stream.total_samples < now) {
    throw std::invalid_argument("write_vgm: total_samples precedes the last write");
  }
  emit_wait(out, stream.total_samples - now);
  out.push_back(kOpEnd);
  put_u32(out, kEofField, static_cast<std::uint32_t>(out.size() - kEofField));
  return out;
}

}  // namespace nesscore::vgm
