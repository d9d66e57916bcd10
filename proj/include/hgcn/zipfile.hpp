#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hgcn {

// Just enough of the ZIP format to unpack benchmark archives: central
// directory walk, stored and deflated members, CRC verification.
class ZipArchive {
 public:
  struct Entry {
    std::string name;
    bool is_dir = false;
    std::uint64_t size = 0;
  };

  explicit ZipArchive(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {
    parse_central_directory();
  }

  static ZipArchive from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open zip file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return ZipArchive(std::move(bytes));
  }

  std::vector<Entry> entries() const {
    std::vector<Entry> out;
    for (const auto& r : recs_)
      out.push_back({r.name, !r.name.empty() && r.name.back() == '/', r.usize});
    return out;
  }

  std::vector<std::uint8_t> read(const std::string& name) const {
    for (const auto& r : recs_)
      if (r.name == name) return read_entry(r);
    throw std::runtime_error("zip: no entry named " + name);
  }

  void extract_all(const std::string& dest) const {
    namespace fs = std::filesystem;
    for (const auto& r : recs_) {
      if (r.name.find("..") != std::string::npos || (!r.name.empty() && r.name[0] == '/'))
        throw std::runtime_error("zip: refusing to extract unsafe path " + r.name);
      const fs::path target = fs::path(dest) / r.name;
      if (!r.name.empty() && r.name.back() == '/') {
        fs::create_directories(target);
        continue;
      }
      fs::create_directories(target.parent_path());
      const auto data = read_entry(r);
      std::ofstream out(target, std::ios::binary);
      if (!out) throw std::runtime_error("zip: cannot write " + target.string());
      out.write(reinterpret_cast<const char*>(data.data()),
                static_cast<std::streamsize>(data.size()));
    }
  }

 private:
  struct Rec {
    std::string name;
    std::uint16_t method = 0;
    std::uint32_t crc = 0, csize = 0, usize = 0, local_off = 0;
  };

  std::uint16_t u16(std::size_t off) const {
    return static_cast<std::uint16_t>(bytes_[off] | (bytes_[off + 1] << 8));
  }
  std::uint32_t u32(std::size_t off) const {
    return static_cast<std::uint32_t>(bytes_[off]) | (static_cast<std::uint32_t>(bytes_[off + 1]) << 8) |
           (static_cast<std::uint32_t>(bytes_[off + 2]) << 16) |
           (static_cast<std::uint32_t>(bytes_[off + 3]) << 24);
  }

  void parse_central_directory() {
    if (bytes_.size() < 22) throw std::runtime_error("zip: file too small");
    // End-of-central-directory record: scan backwards past any comment.
    std::size_t eocd = std::string::npos;
    const std::size_t lo = bytes_.size() >= 22 + 65535 ? bytes_.size() - 22 - 65535 : 0;
    for (std::size_t i = bytes_.size() - 22 + 1; i-- > lo;) {
      if (u32(i) == 0x06054b50u) {
        eocd = i;
        break;
      }
    }
    if (eocd == std::string::npos) throw std::runtime_error("zip: end record not found");
    const std::uint16_t count = u16(eocd + 10);
    std::size_t off = u32(eocd + 16);
    for (std::uint16_t e = 0; e < count; ++e) {
      if (off + 46 > bytes_.size() || u32(off) != 0x02014b50u)
        throw std::runtime_error("zip: corrupt central directory");
      Rec r;
      r.method = u16(off + 10);
      r.crc = u32(off + 16);
      r.csize = u32(off + 20);
      r.usize = u32(off + 24);
      const std::uint16_t name_len = u16(off + 28);
      const std::uint16_t extra_len = u16(off + 30);
      const std::uint16_t comment_len = u16(off + 32);
      r.local_off = u32(off + 42);
      r.name.assign(reinterpret_cast<const char*>(&bytes_[off + 46]), name_len);
      if (r.method != 0 && r.method != 8)
        throw std::runtime_error("zip: unsupported compression method for " + r.name);
      recs_.push_back(std::move(r));
      off += 46u + name_len + extra_len + comment_len;
    }
  }

  std::vector<std::uint8_t> read_entry(const Rec& r) const {
    std::size_t off = r.local_off;
    if (off + 30 > bytes_.size() || u32(off) != 0x04034b50u)
      throw std::runtime_error("zip: corrupt local header for " + r.name);
    const std::uint16_t name_len = u16(off + 26);
    const std::uint16_t extra_len = u16(off + 28);
    const std::size_t data_off = off + 30 + name_len + extra_len;
    if (data_off + r.csize > bytes_.size())
      throw std::runtime_error("zip: truncated data for " + r.name);

    std::vector<std::uint8_t> out(r.usize);
    if (r.method == 0) {
      if (r.csize != r.usize) throw std::runtime_error("zip: stored size mismatch for " + r.name);
      std::memcpy(out.data(), bytes_.data() + data_off, r.usize);
    } else {
      z_stream strm{};
      if (inflateInit2(&strm, -MAX_WBITS) != Z_OK)
        throw std::runtime_error("zip: inflate init failed");
      strm.next_in = const_cast<Bytef*>(bytes_.data() + data_off);
      strm.avail_in = r.csize;
      strm.next_out = out.data();
      strm.avail_out = r.usize;
      const int rc = inflate(&strm, Z_FINISH);
      inflateEnd(&strm);
      if (rc != Z_STREAM_END || strm.total_out != r.usize)
        throw std::runtime_error("zip: inflate failed for " + r.name);
    }
    const auto actual = crc32(0L, out.data(), static_cast<uInt>(out.size()));
    if (static_cast<std::uint32_t>(actual) != r.crc)
      throw std::runtime_error("zip: CRC mismatch for " + r.name);
    return out;
  }

  std::vector<std::uint8_t> bytes_;
  std::vector<Rec> recs_;
};

}  // namespace hgcn
