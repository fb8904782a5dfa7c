#include "drgrade/pipeline/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <cctype>

#include "drgrade/error.hpp"

namespace drgrade::pipeline {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool is_image_extension(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".png" || ext == ".ppm";
}

bool path_contains(const fs::path& p, std::string_view needle) {
  for (const auto& part : p) {
    if (part.string().find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

std::vector<AptosRecord> load_aptos(const fs::path& csv, const fs::path& image_dir) {
  std::ifstream in(csv);
  require(in.good(), ErrorKind::kMissingFile, "cannot open APTOS label file '" + csv.string() + "'");
  std::string line;
  std::getline(in, line);
  require(trim(line) == "id_code,diagnosis", ErrorKind::kMalformedHeader,
          csv.string() + ":1: expected header 'id_code,diagnosis'");
  std::vector<AptosRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    const std::string where = csv.string() + ":" + std::to_string(line_no);
    require(comma != std::string::npos && line.find(',', comma + 1) == std::string::npos, ErrorKind::kRaggedRow,
            where + ": expected 2 fields");
    AptosRecord r;
    r.id = line.substr(0, comma);
    const std::string grade = line.substr(comma + 1);
    const auto [ptr, ec] = std::from_chars(grade.data(), grade.data() + grade.size(), r.grade);
    require(ec == std::errc() && ptr == grade.data() + grade.size(), ErrorKind::kUnknownLabel,
            where + ": diagnosis '" + grade + "' is not an integer");
    try {
      r.label = collapse_grade(r.grade);
    } catch (const Error& e) {
      fail(ErrorKind::kUnknownLabel, where + ": " + e.what());
    }
    r.image = image_dir / (r.id + ".png");
    out.push_back(std::move(r));
  }
  return out;
}

IdridLayout scan_idrid(const fs::path& root) {
  require(fs::is_directory(root), ErrorKind::kMissingFile, "IDRiD root '" + root.string() + "' is not a directory");
  std::map<std::string, IdridSample> train, test;
  static const std::map<std::string, std::optional<LesionKind>, std::less<>> kSuffix = {
      {"MA", LesionKind::kMA}, {"HE", LesionKind::kHEM}, {"EX", LesionKind::kHE},
      {"SE", LesionKind::kSE}, {"OD", std::nullopt}};
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && is_image_extension(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const fs::path rel = fs::relative(file, root);
    auto* split = path_contains(rel, "Training") ? &train : path_contains(rel, "Testing") ? &test : nullptr;
    if (split == nullptr) continue;
    const std::string stem = file.stem().string();
    if (path_contains(rel, "Original Images")) {
      auto& s = (*split)[stem];
      s.id = stem;
      s.image = file;
      continue;
    }
    const auto us = stem.rfind('_');
    if (us == std::string::npos) continue;
    const auto it = kSuffix.find(stem.substr(us + 1));
    if (it == kSuffix.end()) continue;
    auto& s = (*split)[stem.substr(0, us)];
    s.id = stem.substr(0, us);
    if (it->second) {
      s.masks[*it->second] = file;
    } else {
      s.disc = file;
    }
  }
  IdridLayout out;
  for (auto& [id, s] : train) {
    if (!s.image.empty()) out.train.push_back(std::move(s));
  }
  for (auto& [id, s] : test) {
    if (!s.image.empty()) out.test.push_back(std::move(s));
  }
  return out;
}

std::optional<std::pair<std::string, LesionKind>> split_mask_stem(const std::string& stem) {
  const auto us = stem.rfind('_');
  if (us == std::string::npos || us == 0) return std::nullopt;
  const std::string code = stem.substr(us + 1);
  for (auto kind : kAllLesionKinds) {
    if (lesion_code(kind) == code) return std::make_pair(stem.substr(0, us), kind);
  }
  return std::nullopt;
}

SampleFiles locate_sample(const fs::path& dir, const std::string& id) {
  SampleFiles s;
  s.id = id;
  for (const char* ext : {".png", ".ppm"}) {
    if (fs::exists(dir / (id + ext))) {
      s.image = dir / (id + ext);
      break;
    }
  }
  for (auto kind : kAllLesionKinds) {
    const std::string base = id + "_" + std::string(lesion_code(kind));
    if (fs::exists(dir / (base + ".pfmap"))) s.probability[kind] = dir / (base + ".pfmap");
    if (fs::exists(dir / (base + ".png"))) s.truth[kind] = dir / (base + ".png");
  }
  if (fs::exists(dir / (id + "_disc.png"))) s.disc = dir / (id + "_disc.png");
  if (fs::exists(dir / (id + "_vessels.png"))) s.vessels = dir / (id + "_vessels.png");
  return s;
}

std::vector<fs::path> list_images(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorKind::kMissingFile, "'" + dir.string() + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_image_extension(entry.path())) continue;
    const std::string stem = entry.path().stem().string();
    if (split_mask_stem(stem)) continue;
    if (stem.ends_with("_disc") || stem.ends_with("_vessels") || stem.ends_with("_overlay")) continue;
    out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace drgrade::pipeline
