// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ismlab/oracle.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ismlab {

/// Binary 8-bit portable pixmap: P5 for one channel, P6 for three. Values are
/// clamped to [0, 1] and scaled to 0..255. `image` is row-major, channel-minor.
void write_ppm(const std::filesystem::path& path, const Vec& image, int width, int height,
               int channels);

/// Reads a P5/P6 8-bit pixmap back into [0, 1] values.
Vec read_ppm(const std::filesystem::path& path, int& width, int& height, int& channels);

/// Tiles equally sized images into one pixmap, rows x cols, separated by a
/// one-pixel black gutter. tiles[r][c] may be empty to leave a cell blank.
void write_ppm_grid(const std::filesystem::path& path,
                    const std::vector<std::vector<Vec>>& tiles, int width, int height,
                    int channels);

/// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace ismlab
