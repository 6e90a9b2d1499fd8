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

#ifndef SAVANNA_IMAGE_IO_HPP_
#define SAVANNA_IMAGE_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "savanna/raster.hpp"

namespace savanna {

/// Decodes an RGB or RGBA PNG (alpha is dropped, palettes expanded). The
/// image id is the file stem. GSD and acquisition time are read from the
/// "gsd_cm" / "acquired_at" tEXt chunks when present, otherwise
/// fallback_gsd_cm is used. Throws kIoError on undecodable files and
/// kInvalidArgument on grayscale input.
RasterImage read_png(std::filesystem::path const& path,
                     std::optional<double> fallback_gsd_cm = std::nullopt);

/// Encodes with the metadata chunks read_png understands.
std::vector<std::uint8_t> encode_png(RasterImage const& img);
void write_png(std::filesystem::path const& path, RasterImage const& img);

/// Centered square crop with clamp-to-edge padding, used for UI chips.
RasterImage crop_centered(RasterImage const& img, Point2d center, int size);

}  // namespace savanna

#endif  // SAVANNA_IMAGE_IO_HPP_
