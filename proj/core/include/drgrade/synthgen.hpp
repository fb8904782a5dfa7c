#pragma once

#include <array>
#include <cstdint>
#include <map>

#include "drgrade/features.hpp"
#include "drgrade/image.hpp"
#include "drgrade/lesions.hpp"

namespace drgrade {

struct LesionSpec {
  std::array<std::size_t, 4> per_quadrant{};  // quadrants 1..4
  int min_radius = 2;
  int max_radius = 3;

  std::size_t total() const noexcept { return per_quadrant[0] + per_quadrant[1] + per_quadrant[2] + per_quadrant[3]; }
};

struct FundusSpec {
  std::uint32_t width = 256;
  std::uint32_t height = 256;
  std::map<LesionKind, LesionSpec> lesions;
  int vessel_branches = 6;
};

LesionSpec default_lesion_spec(LesionKind kind, std::array<std::size_t, 4> per_quadrant = {});

struct SyntheticFundus {
  RgbImage image;
  std::map<LesionKind, BinaryMask> lesions;  // ground truth, all four kinds
  BinaryMask disc;
  BinaryMask vessels;
  BinaryMask field;  // fundus circle
  Point center;
};

// Dark circular field with a bright disc, branching vessels and per-kind
// lesion blobs placed in the requested quadrants (relative to the field
// centre). Lesions never touch each other, the disc or the vessels. Throws
// kSpecOverflow when the requested lesions cannot be placed.
SyntheticFundus gen_fundus(std::uint64_t seed, const FundusSpec& spec);

// Three unit-variance Gaussian clusters whose centres form an equilateral
// triangle with side class_separation (in units of sigma) inside a random
// 2-D subspace of R^d. Rows are shuffled; ids are "syn<seed>_<row>".
FeatureDataset gen_features(std::uint64_t seed, std::size_t n_per_class, std::size_t d, double class_separation);

// Per-channel gain/offset applied to field pixels only.
RgbImage apply_channel_jitter(const RgbImage& img, const BinaryMask& field, const std::array<double, 3>& gain,
                              const std::array<double, 3>& offset);

// Soft probability map from a ground-truth mask: `inside` on foreground,
// `outside` elsewhere, plus uniform noise of the given amplitude, clamped.
ProbMask soft_probability(const BinaryMask& truth, std::uint64_t seed, float inside = 0.92f, float outside = 0.04f,
                          float noise = 0.03f);

}  // namespace drgrade
