#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "drgrade/features.hpp"
#include "drgrade/lesions.hpp"

namespace drgrade::pipeline {

// APTOS: a CSV with header "id_code,diagnosis" (grades 0..4) next to a folder
// of <id_code>.png images. Grades are collapsed to three classes on ingest.
struct AptosRecord {
  std::string id;
  int grade = 0;
  ClassLabel label = ClassLabel::kNoDR;
  std::filesystem::path image;
};

std::vector<AptosRecord> load_aptos(const std::filesystem::path& csv, const std::filesystem::path& image_dir);

// IDRiD segmentation layout. Images live under a folder whose name contains
// "Original Images", masks under per-lesion folders, and the split is taken
// from a "Training"/"Testing" path component. IDRiD's own mask suffixes are
// mapped to ours: _MA -> MA, _HE -> HEM, _EX -> HE, _SE -> SE, _OD -> disc.
// Only PNG/PPM are decoded, so JPEG/TIFF originals must be converted first.
struct IdridSample {
  std::string id;
  std::filesystem::path image;
  std::map<LesionKind, std::filesystem::path> masks;
  std::optional<std::filesystem::path> disc;
};

struct IdridLayout {
  std::vector<IdridSample> train;
  std::vector<IdridSample> test;
};

IdridLayout scan_idrid(const std::filesystem::path& root);

// Flat layout written by synthgen and consumed by grade/evaluate:
//   <id>.png            fundus image
//   <id>_<KIND>.pfmap   lesion probability map
//   <id>_<KIND>.png     binary lesion mask
//   <id>_disc.png, <id>_vessels.png
struct SampleFiles {
  std::string id;
  std::filesystem::path image;
  std::map<LesionKind, std::filesystem::path> probability;
  std::map<LesionKind, std::filesystem::path> truth;
  std::optional<std::filesystem::path> disc;
  std::optional<std::filesystem::path> vessels;
};

SampleFiles locate_sample(const std::filesystem::path& dir, const std::string& id);

// Images (.png/.ppm) in dir that are not masks or overlays, sorted by name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

// Splits "<id>_<KIND>" into id and kind; nullopt when the suffix is not a
// lesion code.
std::optional<std::pair<std::string, LesionKind>> split_mask_stem(const std::string& stem);

}  // namespace drgrade::pipeline
