#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "lemur/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts need byte swapping");

namespace lemur::io {

// Sequential little-endian writer over an std::ofstream. Any failed write
// surfaces as IoError naming the path.
class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
  }

  template <class T>
    requires std::is_trivially_copyable_v<T>
  void put(const T& value) {
    bytes(reinterpret_cast<const char*>(&value), sizeof(T));
  }

  template <class T>
    requires std::is_trivially_copyable_v<T>
  void put_array(std::span<const T> values) {
    bytes(reinterpret_cast<const char*>(values.data()), values.size_bytes());
  }

  void bytes(const char* data, std::size_t size) {
    out_.write(data, static_cast<std::streamsize>(size));
    if (!out_) throw IoError("write failed on '" + path_ + "'");
  }

  void close() {
    out_.flush();
    if (!out_) throw IoError("flush failed on '" + path_ + "'");
    out_.close();
  }

 private:
  std::string path_;
  std::ofstream out_;
};

// Sequential reader with explicit remaining-byte accounting so truncated
// files are reported as corruption instead of reading garbage.
class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open '" + path + "' for reading");
    in_.seekg(0, std::ios::end);
    remaining_ = static_cast<std::uint64_t>(in_.tellg());
    in_.seekg(0, std::ios::beg);
  }

  const std::string& path() const { return path_; }
  std::uint64_t remaining() const { return remaining_; }

  template <class T>
    requires std::is_trivially_copyable_v<T>
  T get(const char* field) {
    T value{};
    bytes(reinterpret_cast<char*>(&value), sizeof(T), field);
    return value;
  }

  template <class T>
    requires std::is_trivially_copyable_v<T>
  void get_array(std::span<T> out, const char* field) {
    bytes(reinterpret_cast<char*>(out.data()), out.size_bytes(), field);
  }

  void bytes(char* data, std::uint64_t size, const char* field) {
    if (size > remaining_) {
      throw CorruptionError("'" + path_ + "' is truncated while reading " + field + " (need " +
                            std::to_string(size) + " bytes, " + std::to_string(remaining_) + " left)");
    }
    in_.read(data, static_cast<std::streamsize>(size));
    if (!in_) throw IoError("read failed on '" + path_ + "'");
    remaining_ -= size;
  }

  // Trailing bytes after a complete record mean the header lied about sizes.
  void expect_end() const {
    if (remaining_ != 0) {
      throw CorruptionError("'" + path_ + "' has " + std::to_string(remaining_) + " unexpected trailing bytes");
    }
  }

 private:
  std::string path_;
  std::ifstream in_;
  std::uint64_t remaining_ = 0;
};

inline std::vector<char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace lemur::io
