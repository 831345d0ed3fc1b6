#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "plls/config.hpp"

// Binary container shared by checkpoints and datasets:
//
//   "PLLS" | u32 version | u32 kind | u64 body length | body | u64 checksum
//
// All integers and floats are little-endian; the checksum is FNV-1a 64 over
// every byte before it. The body starts with a u32-length-prefixed UTF-8
// descriptor string.
namespace plls::inline PLLS_ABI::io {

inline constexpr std::uint32_t kFormatVersion = 1;

enum class FileKind : std::uint32_t { Checkpoint = 1, Dataset = 2, TrainerState = 3 };

class FileFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
/// Missing or wrong magic bytes, wrong file kind, malformed body.
class BadMagicError : public FileFormatError {
 public:
  using FileFormatError::FileFormatError;
};
class VersionError : public FileFormatError {
 public:
  using FileFormatError::FileFormatError;
};
class TruncatedError : public FileFormatError {
 public:
  using FileFormatError::FileFormatError;
};
class ChecksumError : public FileFormatError {
 public:
  using FileFormatError::FileFormatError;
};

std::uint64_t fnv1a(const std::uint8_t* bytes, std::size_t size);

class Writer {
 public:
  void u8(std::uint8_t v) { body_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void string(std::string_view s);
  void f32_array(const float* values, std::size_t count);
  void bytes(const std::uint8_t* data, std::size_t count);

  /// Frames the body with header and checksum and writes it atomically-ish
  /// (temp file + rename).
  void save(const std::filesystem::path& path, FileKind kind, std::string_view descriptor) const;
  std::vector<std::uint8_t> frame(FileKind kind, std::string_view descriptor) const;
  /// Unframed body bytes, for nesting inside another record.
  const std::vector<std::uint8_t>& body() const { return body_; }

 private:
  std::vector<std::uint8_t> body_;
};

class Reader {
 public:
  /// Validates framing; throws the specific FileFormatError subclass.
  Reader(std::vector<std::uint8_t> file, FileKind expected, const std::string& label);
  static Reader open(const std::filesystem::path& path, FileKind expected);

  const std::string& descriptor() const { return descriptor_; }
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string string();
  void f32_array(float* out, std::size_t count);
  void bytes(std::uint8_t* out, std::size_t count);
  bool at_end() const { return pos_ == end_; }
  /// Reads a body produced by Writer::body() without container framing.
  static Reader raw(std::vector<std::uint8_t> body, const std::string& label);

 private:
  Reader() = default;
  void need(std::size_t n);

  std::vector<std::uint8_t> file_;
  std::string label_;
  std::string descriptor_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

}  // namespace plls::inline PLLS_ABI::io
