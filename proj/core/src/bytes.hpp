// Copyright 2026 The Savanna Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Little-endian binary helpers shared by the persistence code.
#ifndef SAVANNA_SRC_BYTES_HPP_
#define SAVANNA_SRC_BYTES_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "savanna/error.hpp"

namespace savanna::bytes {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::endian::native == std::endian::little,
                "persistence assumes a little-endian host");
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T get_le(std::span<std::uint8_t const> bytes, std::size_t& offset) {
  if (offset + sizeof(T) > bytes.size()) {
    throw_invalid("truncated binary file");
  }
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

inline std::vector<std::uint8_t> read_all(std::filesystem::path const& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open file", path.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

inline void write_all(std::filesystem::path const& path,
                      std::span<std::uint8_t const> data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write file", path.string());
  out.write(reinterpret_cast<char const*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed", path.string());
}

inline std::string read_text(std::filesystem::path const& path) {
  auto data = read_all(path);
  return {data.begin(), data.end()};
}

/// Writes through a temporary sibling and renames, so readers never see a
/// torn file.
inline void write_text_atomic(std::filesystem::path const& path, std::string_view text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write file", tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::kIoError, "write failed", tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot replace file", path.string() + ": " + ec.message());
}

}  // namespace savanna::bytes

#endif  // SAVANNA_SRC_BYTES_HPP_
