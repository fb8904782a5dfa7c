#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "drgrade/image.hpp"

namespace drgrade {

// Raster I/O. PNG and binary PPM (P6) are recognised by their magic bytes on
// load; on save the extension picks the encoder (".ppm" -> P6, anything else
// -> PNG). Failures throw Error with a kind and the offending path.
RgbImage load_rgb(const std::filesystem::path& path);
void save_rgb(const RgbImage& img, const std::filesystem::path& path);

GrayImage load_gray(const std::filesystem::path& path);
void save_gray(const GrayImage& img, const std::filesystem::path& path);

// Binary masks live on disk as 8-bit grayscale PNG, 0 background / 255
// foreground. Any non-zero sample loads as foreground.
BinaryMask load_binary_mask(const std::filesystem::path& path);
void save_binary_mask(const BinaryMask& mask, const std::filesystem::path& path);

// PFMAP: "PFM1" | width u32 LE | height u32 LE | reserved u32 (0) |
// width*height float32 LE, row-major, top-left origin.
inline constexpr std::size_t kPfmapHeaderSize = 16;

std::vector<std::byte> encode_pfmap(const ProbMask& mask);
ProbMask decode_pfmap(std::span<const std::byte> bytes, const std::string& origin = "<memory>");
ProbMask load_probmask(const std::filesystem::path& path);
void save_probmask(const ProbMask& mask, const std::filesystem::path& path);

// BT.601 luma, rounded to nearest.
GrayImage to_gray(const RgbImage& img);
RgbImage gray_to_rgb(const GrayImage& img);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
// Writes to a sibling temporary and renames, so readers never see a partial file.
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace drgrade
