#include "plls/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace plls::inline PLLS_ABI::io {

namespace {

constexpr std::uint8_t kMagic[4] = {'P', 'L', 'L', 'S'};
constexpr std::size_t kHeaderSize = 4 + 4 + 4 + 8;

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(const std::uint8_t* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::uint64_t fnv1a(const std::uint8_t* bytes, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void Writer::u32(std::uint32_t v) { put_le(body_, v, 4); }
void Writer::u64(std::uint64_t v) { put_le(body_, v, 8); }
void Writer::f32(float v) { put_le(body_, std::bit_cast<std::uint32_t>(v), 4); }
void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Writer::string(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  body_.insert(body_.end(), s.begin(), s.end());
}

void Writer::f32_array(const float* values, std::size_t count) {
  body_.reserve(body_.size() + 4 * count);
  for (std::size_t i = 0; i < count; ++i) f32(values[i]);
}

void Writer::bytes(const std::uint8_t* data, std::size_t count) { body_.insert(body_.end(), data, data + count); }

std::vector<std::uint8_t> Writer::frame(FileKind kind, std::string_view descriptor) const {
  std::vector<std::uint8_t> out;
  const std::size_t body_size = 4 + descriptor.size() + body_.size();
  out.reserve(kHeaderSize + body_size + 8);
  for (std::uint8_t b : kMagic) out.push_back(b);
  put_le(out, kFormatVersion, 4);
  put_le(out, static_cast<std::uint32_t>(kind), 4);
  put_le(out, body_size, 8);
  put_le(out, descriptor.size(), 4);
  out.insert(out.end(), descriptor.begin(), descriptor.end());
  out.insert(out.end(), body_.begin(), body_.end());
  put_le(out, fnv1a(out.data(), out.size()), 8);
  return out;
}

void Writer::save(const std::filesystem::path& path, FileKind kind, std::string_view descriptor) const {
  const auto framed = frame(kind, descriptor);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(framed.data()), static_cast<std::streamsize>(framed.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Reader::Reader(std::vector<std::uint8_t> file, FileKind expected, const std::string& label)
    : file_(std::move(file)), label_(label) {
  if (file_.size() < 4 || std::memcmp(file_.data(), kMagic, 4) != 0) {
    throw BadMagicError(label_ + ": not a PLLS file (bad magic bytes)");
  }
  if (file_.size() < kHeaderSize) throw TruncatedError(label_ + ": truncated header");
  const auto version = static_cast<std::uint32_t>(get_le(file_.data() + 4, 4));
  if (version != kFormatVersion) {
    throw VersionError(label_ + ": format version " + std::to_string(version) + ", expected " +
                       std::to_string(kFormatVersion));
  }
  const auto kind = static_cast<std::uint32_t>(get_le(file_.data() + 8, 4));
  if (kind != static_cast<std::uint32_t>(expected)) {
    throw BadMagicError(label_ + ": wrong file kind " + std::to_string(kind));
  }
  const std::uint64_t body_size = get_le(file_.data() + 12, 8);
  if (file_.size() < kHeaderSize + body_size + 8) {
    throw TruncatedError(label_ + ": truncated (" + std::to_string(file_.size()) + " bytes, header announces " +
                         std::to_string(kHeaderSize + body_size + 8) + ")");
  }
  end_ = kHeaderSize + body_size;
  const std::uint64_t stored = get_le(file_.data() + end_, 8);
  if (stored != fnv1a(file_.data(), end_)) throw ChecksumError(label_ + ": checksum mismatch");
  pos_ = kHeaderSize;
  descriptor_ = string();
}

Reader Reader::open(const std::filesystem::path& path, FileKind expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Reader(std::move(bytes), expected, path.string());
}

Reader Reader::raw(std::vector<std::uint8_t> body, const std::string& label) {
  Reader r;
  r.file_ = std::move(body);
  r.label_ = label;
  r.end_ = r.file_.size();
  return r;
}

void Reader::need(std::size_t n) {
  if (end_ - pos_ < n) throw TruncatedError(label_ + ": body ends early");
}

std::uint8_t Reader::u8() {
  need(1);
  return file_[pos_++];
}

std::uint32_t Reader::u32() {
  need(4);
  const auto v = static_cast<std::uint32_t>(get_le(file_.data() + pos_, 4));
  pos_ += 4;
  return v;
}

std::uint64_t Reader::u64() {
  need(8);
  const auto v = get_le(file_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }
double Reader::f64() { return std::bit_cast<double>(u64()); }

std::string Reader::string() {
  const std::uint32_t n = u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(file_.data() + pos_), n);
  pos_ += n;
  return s;
}

void Reader::f32_array(float* out, std::size_t count) {
  need(4 * count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(file_.data() + pos_, 4)));
    pos_ += 4;
  }
}

void Reader::bytes(std::uint8_t* out, std::size_t count) {
  need(count);
  std::memcpy(out, file_.data() + pos_, count);
  pos_ += count;
}

}  // namespace plls::inline PLLS_ABI::io
