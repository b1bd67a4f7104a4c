/* Copyright 2026 The CSLR Toolkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cslr/errors.hpp"
#include "cslr/tensor.hpp"

namespace cslr {

// Parameter container: a text index (name, shape, precision, byte offset
// into the data section) followed by raw little-endian values, row-major.
// Round-trips bit-exactly.
//
//   CSLRTENSORS 1
//   count <n>
//   <name> <rows> <cols> <f32|f64> <offset>
//   ...
//   DATA
//   <raw bytes>

namespace detail {

inline void put_le(std::string& out, std::uint32_t bits) {
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

inline void put_le(std::string& out, std::uint64_t bits) {
  put_le(out, static_cast<std::uint32_t>(bits & 0xffffffffull));
  put_le(out, static_cast<std::uint32_t>(bits >> 32));
}

inline std::uint32_t get_le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint64_t get_le64(const unsigned char* p) {
  return static_cast<std::uint64_t>(get_le32(p)) |
         (static_cast<std::uint64_t>(get_le32(p + 4)) << 32);
}

template <typename Scalar>
const char* precision_tag();
template <>
inline const char* precision_tag<float>() {
  return "f32";
}
template <>
inline const char* precision_tag<double>() {
  return "f64";
}

}  // namespace detail

// Ordered map keeps the index deterministic.
template <typename Scalar>
using TensorMap = std::map<std::string, Tensor<Scalar>>;

template <typename Scalar>
void write_tensors(std::ostream& os, const TensorMap<Scalar>& tensors) {
  std::string data;
  std::ostringstream index;
  index << "CSLRTENSORS 1\n";
  index << "count " << tensors.size() << "\n";
  for (const auto& [name, t] : tensors) {
    if (name.find_first_of(" \t\n") != std::string::npos)
      throw UsageError("tensor name contains whitespace: '" + name + "'");
    index << name << " " << t.rows() << " " << t.cols() << " "
          << detail::precision_tag<Scalar>() << " " << data.size() << "\n";
    const auto& v = t.value();
    for (Eigen::Index i = 0; i < v.rows(); ++i)
      for (Eigen::Index j = 0; j < v.cols(); ++j) {
        if constexpr (sizeof(Scalar) == 4) {
          std::uint32_t bits;
          const float f = static_cast<float>(v(i, j));
          std::memcpy(&bits, &f, 4);
          detail::put_le(data, bits);
        } else {
          std::uint64_t bits;
          const double d = static_cast<double>(v(i, j));
          std::memcpy(&bits, &d, 8);
          detail::put_le(data, bits);
        }
      }
  }
  os << index.str() << "DATA\n";
  os.write(data.data(), static_cast<std::streamsize>(data.size()));
}

template <typename Scalar>
TensorMap<Scalar> read_tensors(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "CSLRTENSORS 1")
    throw ParseError("tensor container: bad magic line '" + line + "'");
  if (!std::getline(is, line) || line.rfind("count ", 0) != 0)
    throw ParseError("tensor container: missing count line");
  const std::size_t count = std::stoul(line.substr(6));

  struct Entry {
    std::string name;
    Eigen::Index rows, cols;
    std::string prec;
    std::uint64_t offset;
  };
  std::vector<Entry> entries;
  entries.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(is, line))
      throw ParseError("tensor container: truncated index");
    std::istringstream ls(line);
    Entry e;
    if (!(ls >> e.name >> e.rows >> e.cols >> e.prec >> e.offset))
      throw ParseError("tensor container: bad index line '" + line + "'");
    entries.push_back(std::move(e));
  }
  if (!std::getline(is, line) || line != "DATA")
    throw ParseError("tensor container: missing DATA marker");

  std::string data((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  const auto* raw = reinterpret_cast<const unsigned char*>(data.data());

  TensorMap<Scalar> out;
  for (const auto& e : entries) {
    if (e.prec != detail::precision_tag<Scalar>())
      throw ParseError("tensor '" + e.name + "': precision " + e.prec +
                       " does not match requested scalar type");
    const std::size_t width = e.prec == "f32" ? 4 : 8;
    const std::size_t need =
        static_cast<std::size_t>(e.rows) * static_cast<std::size_t>(e.cols) *
        width;
    if (e.offset + need > data.size())
      throw ParseError("tensor '" + e.name + "': payload truncated",
                       static_cast<std::int64_t>(data.size()));
    DenseMatrix<Scalar> m(e.rows, e.cols);
    const unsigned char* p = raw + e.offset;
    for (Eigen::Index i = 0; i < e.rows; ++i)
      for (Eigen::Index j = 0; j < e.cols; ++j) {
        if constexpr (sizeof(Scalar) == 4) {
          const std::uint32_t bits = detail::get_le32(p);
          float f;
          std::memcpy(&f, &bits, 4);
          m(i, j) = f;
          p += 4;
        } else {
          const std::uint64_t bits = detail::get_le64(p);
          double d;
          std::memcpy(&d, &bits, 8);
          m(i, j) = d;
          p += 8;
        }
      }
    out.emplace(e.name, Tensor<Scalar>(std::move(m)));
  }
  return out;
}

}  // namespace cslr
