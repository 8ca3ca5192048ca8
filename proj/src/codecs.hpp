#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "n2f/imaging.hpp"

namespace n2f::detail {

bool is_tiff(std::span<const std::uint8_t> bytes);
bool is_png(std::span<const std::uint8_t> bytes);

// Baseline TIFF: unsigned 8/16-bit or IEEE float32 samples, 1-4 samples per
// pixel, chunky or planar, strips, compression none / LZW / Deflate /
// PackBits, horizontal predictor. Each full-resolution page becomes a slice.
ImageData decode_tiff(std::span<const std::uint8_t> bytes);
// Little-endian, uncompressed, one strip per page, chunky.
std::vector<std::uint8_t> encode_tiff(const ImageData& image);

ImageData decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const ImageData& image);

// Integer container conversion: clamp to [0, max] then round half away from zero.
std::uint16_t quantize(float value, double max_value);

}  // namespace n2f::detail
