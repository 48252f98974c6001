// Copyright 2026 The LENS Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LENS_BINARY_IO_HPP
#define LENS_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "lens/error.hpp"

namespace lens::io {

static_assert(std::endian::native == std::endian::little,
              "binary containers are little-endian; big-endian hosts need byte swapping");

/// Writes fixed-width little-endian scalars and length-prefixed strings.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void magic(std::string_view tag) { raw(tag.data(), tag.size()); }
  void u8(std::uint8_t v) { pod(v); }
  void u32(std::uint32_t v) { pod(v); }
  void u64(std::uint64_t v) { pod(v); }
  void i64(std::int64_t v) { pod(v); }
  void f32(float v) { pod(v); }
  void f64(double v) { pod(v); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void raw(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw Error("write failed");
  }

 private:
  template <typename T>
  void pod(T v) {
    raw(&v, sizeof(v));
  }
  std::ostream& out_;
};

/// Reader counterpart; every read names what it was reading when it fails.
class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  void expect_magic(std::string_view tag, std::string_view what) {
    std::string got(tag.size(), '\0');
    raw(got.data(), got.size(), what);
    if (got != tag) {
      throw CompatibilityError(std::string(what) + ": bad magic bytes, expected \"" +
                               std::string(tag) + "\"");
    }
  }
  std::uint8_t u8(std::string_view what) { return pod<std::uint8_t>(what); }
  std::uint32_t u32(std::string_view what) { return pod<std::uint32_t>(what); }
  std::uint64_t u64(std::string_view what) { return pod<std::uint64_t>(what); }
  std::int64_t i64(std::string_view what) { return pod<std::int64_t>(what); }
  float f32(std::string_view what) { return pod<float>(what); }
  double f64(std::string_view what) { return pod<double>(what); }
  std::string str(std::string_view what) {
    const std::uint32_t n = u32(what);
    if (n > (1u << 28)) throw CompatibilityError(std::string(what) + ": implausible string length");
    std::string s(n, '\0');
    raw(s.data(), n, what);
    return s;
  }
  void raw(void* data, std::size_t n, std::string_view what) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw CompatibilityError("truncated file while reading " + std::string(what) + " at byte " +
                               std::to_string(offset_));
    }
    offset_ += n;
  }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  template <typename T>
  T pod(std::string_view what) {
    T v;
    raw(&v, sizeof(v), what);
    return v;
  }
  std::istream& in_;
  std::uint64_t offset_ = 0;
};

}  // namespace lens::io

#endif  // LENS_BINARY_IO_HPP
