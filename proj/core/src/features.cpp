#include "drgrade/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "drgrade/error.hpp"
#include "drgrade/imgio.hpp"
#include "drgrade/rng.hpp"

namespace drgrade {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string row_ref(const std::string& origin, std::size_t line) {
  return "'" + origin + "' line " + std::to_string(line);
}

}  // namespace

std::string_view label_name(ClassLabel label) noexcept {
  switch (label) {
    case ClassLabel::kNoDR: return "NoDR";
    case ClassLabel::kMildDR: return "MildDR";
    case ClassLabel::kSevereDR: return "SevereDR";
  }
  return "?";
}

ClassLabel parse_label(std::string_view text) {
  text = trim(text);
  int value = -1;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || value < 0 ||
      value >= static_cast<int>(kNumClasses)) {
    fail(ErrorKind::kUnknownLabel, "unknown class label '" + std::string(text) + "'");
  }
  return label_at(static_cast<std::size_t>(value));
}

ClassLabel collapse_grade(int grade) {
  switch (grade) {
    case 0: return ClassLabel::kNoDR;
    case 1:
    case 2: return ClassLabel::kMildDR;
    case 3:
    case 4: return ClassLabel::kSevereDR;
    default: fail(ErrorKind::kUnknownLabel, "grade " + std::to_string(grade) + " is not on the 0-4 scale");
  }
}

std::size_t severity_argmax(const std::array<double, kNumClasses>& scores) noexcept {
  std::size_t best = kNumClasses - 1;
  for (std::size_t c = kNumClasses - 1; c-- > 0;) {
    if (scores[c] > scores[best]) best = c;
  }
  return best;
}

std::vector<double> Scaler::transform(const std::vector<double>& x) const {
  require(x.size() == mean.size(), ErrorKind::kDimensionMismatch,
          "scaler expects dimension " + std::to_string(mean.size()) + ", got " + std::to_string(x.size()));
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mean[i]) / stddev[i];
  return z;
}

std::vector<double> Scaler::inverse(const std::vector<double>& z) const {
  require(z.size() == mean.size(), ErrorKind::kDimensionMismatch,
          "scaler expects dimension " + std::to_string(mean.size()) + ", got " + std::to_string(z.size()));
  std::vector<double> x(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) x[i] = z[i] * stddev[i] + mean[i];
  return x;
}

std::array<std::size_t, kNumClasses> FeatureDataset::class_counts() const noexcept {
  std::array<std::size_t, kNumClasses> counts{};
  for (auto l : labels) ++counts[index_of(l)];
  return counts;
}

void FeatureDataset::validate() const {
  require(vectors.size() == labels.size(), ErrorKind::kDimensionMismatch,
          "dataset has " + std::to_string(vectors.size()) + " vectors but " +
              std::to_string(labels.size()) + " labels");
  const std::size_t d = dimension();
  for (std::size_t r = 0; r < vectors.size(); ++r) {
    require(vectors[r].dimension() == d, ErrorKind::kRaggedRow,
            "row " + std::to_string(r) + " has dimension " + std::to_string(vectors[r].dimension()) +
                ", expected " + std::to_string(d));
    for (double v : vectors[r].values) {
      require(std::isfinite(v), ErrorKind::kNonFinite, "row " + std::to_string(r) + " has a non-finite value");
    }
  }
}

FeatureDataset parse_features(std::string_view text, const std::string& origin) {
  FeatureDataset ds;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  bool header_seen = false;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;

    const auto cells = split(line, ',');
    if (!header_seen) {
      if (cells.size() < 3 || trim(cells.front()) != "id" || trim(cells.back()) != "label") {
        fail(ErrorKind::kMalformedHeader, "feature CSV header must be 'id,f0,...,label' in '" + origin + "'");
      }
      dim = cells.size() - 2;
      for (std::size_t j = 0; j < dim; ++j) {
        if (trim(cells[j + 1]) != "f" + std::to_string(j)) {
          fail(ErrorKind::kMalformedHeader, "unexpected feature column '" + std::string(cells[j + 1]) +
                                                "' in '" + origin + "'");
        }
      }
      header_seen = true;
      continue;
    }
    if (cells.size() != dim + 2) {
      fail(ErrorKind::kRaggedRow, "ragged row at " + row_ref(origin, line_no) + ": expected " +
                                      std::to_string(dim + 2) + " cells, found " + std::to_string(cells.size()));
    }
    FeatureVector fv;
    fv.source_id = std::string(trim(cells.front()));
    fv.values.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const auto cell = trim(cells[j + 1]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        // from_chars reports out-of-range for overflow; treat it as non-finite.
        if (ec == std::errc::result_out_of_range) {
          fail(ErrorKind::kNonFinite, "non-finite value in column f" + std::to_string(j) + " at " + row_ref(origin, line_no));
        }
        fail(ErrorKind::kCorruptPayload, "unparseable value '" + std::string(cell) + "' at " + row_ref(origin, line_no));
      }
      if (!std::isfinite(v)) {
        fail(ErrorKind::kNonFinite, "non-finite value in column f" + std::to_string(j) + " at " + row_ref(origin, line_no));
      }
      fv.values[j] = v;
    }
    try {
      ds.labels.push_back(parse_label(cells.back()));
    } catch (const Error& e) {
      fail(ErrorKind::kUnknownLabel, std::string(e.what()) + " at " + row_ref(origin, line_no));
    }
    ds.vectors.push_back(std::move(fv));
  }
  if (!header_seen) fail(ErrorKind::kMalformedHeader, "feature CSV '" + origin + "' has no header");
  return ds;
}

FeatureDataset load_features(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  return parse_features(text, path.string());
}

std::string format_features(const FeatureDataset& ds) {
  ds.validate();
  const std::size_t d = ds.dimension();
  std::string out = "id";
  for (std::size_t j = 0; j < d; ++j) out += ",f" + std::to_string(j);
  out += ",label\n";
  char buf[64];
  for (std::size_t r = 0; r < ds.size(); ++r) {
    require(ds.vectors[r].source_id.find_first_of(",\n\r") == std::string::npos, ErrorKind::kInvalidArgument,
            "source id '" + ds.vectors[r].source_id + "' contains a CSV separator");
    out += ds.vectors[r].source_id;
    for (double v : ds.vectors[r].values) {
      // Shortest representation that round-trips exactly.
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out += ',';
      out.append(buf, res.ptr);
    }
    out += ',';
    out += std::to_string(index_of(ds.labels[r]));
    out += '\n';
  }
  return out;
}

void save_features(const FeatureDataset& ds, const std::filesystem::path& path) {
  const std::string text = format_features(ds);
  write_file_bytes(path, std::as_bytes(std::span(text.data(), text.size())));
}

Scaler fit_scaler(const FeatureDataset& ds) {
  require(ds.size() >= 2, ErrorKind::kEmptyInput, "scaler needs at least 2 samples, got " + std::to_string(ds.size()));
  ds.validate();
  const std::size_t d = ds.dimension();
  const auto n = static_cast<double>(ds.size());
  Scaler s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (const auto& v : ds.vectors) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += v.values[j];
  }
  for (auto& m : s.mean) m /= n;
  for (const auto& v : ds.vectors) {
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = v.values[j] - s.mean[j];
      s.stddev[j] += diff * diff;
    }
  }
  for (auto& sd : s.stddev) sd = std::max(std::sqrt(sd / n), 1e-12);
  return s;
}

FeatureDataset apply_scaler(const FeatureDataset& ds, const Scaler& scaler) {
  FeatureDataset out;
  out.labels = ds.labels;
  out.scaler = scaler;
  out.vectors.reserve(ds.size());
  for (const auto& v : ds.vectors) out.vectors.push_back({scaler.transform(v.values), v.source_id});
  return out;
}

FeatureVector concat_features(const FeatureVector& a, const FeatureVector& b) {
  require(a.source_id == b.source_id || a.values.empty() || b.values.empty(), ErrorKind::kInvalidArgument,
          "cannot concatenate features of '" + a.source_id + "' and '" + b.source_id + "'");
  FeatureVector out;
  out.source_id = a.values.empty() && !b.values.empty() ? b.source_id : a.source_id;
  out.values.reserve(a.values.size() + b.values.size());
  out.values.insert(out.values.end(), a.values.begin(), a.values.end());
  out.values.insert(out.values.end(), b.values.begin(), b.values.end());
  return out;
}

std::pair<FeatureDataset, FeatureDataset> stratified_split(const FeatureDataset& ds, double fraction,
                                                           std::uint64_t seed) {
  require(fraction >= 0.0 && fraction <= 1.0, ErrorKind::kInvalidArgument, "split fraction must be in [0,1]");
  Rng rng(seed);
  FeatureDataset first, second;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < ds.size(); ++r) {
      if (index_of(ds.labels[r]) == c) rows.push_back(r);
    }
    rng.shuffle(std::span(rows));
    const auto cut = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(rows.size())));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      auto& dst = k < cut ? first : second;
      dst.vectors.push_back(ds.vectors[rows[k]]);
      dst.labels.push_back(ds.labels[rows[k]]);
    }
  }
  return {std::move(first), std::move(second)};
}

}  // namespace drgrade
