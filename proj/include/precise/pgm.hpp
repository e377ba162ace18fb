#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace precise {

// 8-bit grayscale image, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

// Binary PGM (P5) with maxval 255. Header comments are skipped on read.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

// [0,1] intensity to 0..255, round-half-up, clipped.
std::uint8_t to_byte(double intensity);

}  // namespace precise
