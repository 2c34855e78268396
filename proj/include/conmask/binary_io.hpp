#pragma once

#include <bit>
#include <cstdint>
#include <string>

#include "conmask/error.hpp"

// Little-endian encoding helpers shared by the checkpoint and bundle formats.
namespace conmask::bin {

template <typename U>
void put(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) { put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_string(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string format) : bytes_(bytes), format_(std::move(format)) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  double get_f64(const char* what) { return std::bit_cast<double>(get<std::uint64_t>(what)); }

  std::string bytes(std::uint64_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string string(const char* what) { return bytes(get<std::uint32_t>(what), what); }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n, const char* what) const {
    if (n > bytes_.size() - pos_) throw DataError(format_ + " truncated while reading " + what);
  }
  const std::string& bytes_;
  std::string format_;
  std::size_t pos_ = 0;
};

}  // namespace conmask::bin
