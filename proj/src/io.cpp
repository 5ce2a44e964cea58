// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#include "ismlab/io.hpp"

#include "ismlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace ismlab {

namespace {

std::ofstream
open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

unsigned char
to_byte(double v) {
    if (!(v > 0.0)) return 0;
    if (v >= 1.0) return 255;
    return static_cast<unsigned char>(std::lround(v * 255.0));
}

void
check_shape(const Vec& image, int width, int height, int channels) {
    if (channels != 1 && channels != 3) throw ConfigError("pixmaps need 1 or 3 channels");
    if (width <= 0 || height <= 0) throw ConfigError("pixmap size must be positive");
    if (image.size() != static_cast<Eigen::Index>(width) * height * channels) {
        throw DimensionError("image size does not match its shape");
    }
}

} // namespace

void
write_ppm(const std::filesystem::path& path, const Vec& image, int width, int height,
          int channels) {
    check_shape(image, width, height, channels);
    auto out = open_output(path);
    out << (channels == 1 ? "P5" : "P6") << '\n' << width << ' ' << height << "\n255\n";
    std::vector<unsigned char> bytes(static_cast<std::size_t>(image.size()));
    for (Eigen::Index i = 0; i < image.size(); ++i) bytes[i] = to_byte(image[i]);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

Vec
read_ppm(const std::filesystem::path& path, int& width, int& height, int& channels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string magic;
    int maxval = 0;
    in >> magic >> width >> height >> maxval;
    if ((magic != "P5" && magic != "P6") || maxval != 255 || width <= 0 || height <= 0) {
        throw InputError("unsupported pixmap header in " + path.string());
    }
    in.get();
    channels = magic == "P5" ? 1 : 3;
    std::vector<unsigned char> bytes(static_cast<std::size_t>(width) * height * channels);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw InputError("truncated pixmap " + path.string());
    Vec image(static_cast<Eigen::Index>(bytes.size()));
    for (std::size_t i = 0; i < bytes.size(); ++i) image[i] = bytes[i] / 255.0;
    return image;
}

void
write_ppm_grid(const std::filesystem::path& path, const std::vector<std::vector<Vec>>& tiles,
               int width, int height, int channels) {
    const int rows = static_cast<int>(tiles.size());
    int cols = 0;
    for (const auto& row : tiles) cols = std::max(cols, static_cast<int>(row.size()));
    if (rows == 0 || cols == 0) throw InputError("image grid is empty");

    const int gw = cols * width + (cols - 1);
    const int gh = rows * height + (rows - 1);
    Vec canvas = Vec::Zero(static_cast<Eigen::Index>(gw) * gh * channels);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < static_cast<int>(tiles[r].size()); ++c) {
            const Vec& tile = tiles[r][c];
            if (tile.size() == 0) continue;
            check_shape(tile, width, height, channels);
            for (int y = 0; y < height; ++y) {
                const Eigen::Index dst =
                    ((static_cast<Eigen::Index>(r) * (height + 1) + y) * gw + c * (width + 1)) *
                    channels;
                canvas.segment(dst, static_cast<Eigen::Index>(width) * channels) =
                    tile.segment(static_cast<Eigen::Index>(y) * width * channels,
                                 static_cast<Eigen::Index>(width) * channels);
            }
        }
    }
    write_ppm(path, canvas, gw, gh, channels);
}

void
write_text_file(const std::filesystem::path& path, const std::string& text) {
    auto out = open_output(path);
    out << text;
}

} // namespace ismlab
