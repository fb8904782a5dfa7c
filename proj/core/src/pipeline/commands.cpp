#include "drgrade/pipeline/commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "drgrade/error.hpp"
#include "drgrade/imgio.hpp"
#include "drgrade/lesions.hpp"
#include "drgrade/preprocess.hpp"
#include "drgrade/rng.hpp"
#include "drgrade/synthgen.hpp"
#include "drgrade/trust.hpp"
#include "drgrade/pipeline/dataset.hpp"
#include "drgrade/pipeline/worker_pool.hpp"

namespace drgrade::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

void write_text(const fs::path& path, const std::string& text) {
  const auto* p = reinterpret_cast<const std::byte*>(text.data());
  write_file_bytes(path, std::span<const std::byte>(p, text.size()));
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kMissingFile, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kCorruptPayload, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

ordered_json params_json(const PreprocessParams& p) {
  ordered_json j;
  j["clahe"] = {{"clip_limit", p.clahe.clip_limit}, {"tile_grid", p.clahe.tile_grid}};
  if (p.color_reference) {
    j["color_reference"] = {{"mean", p.color_reference->mean}, {"std", p.color_reference->stddev}};
  } else {
    j["color_reference"] = nullptr;
  }
  j["gaussian"] = {{"sigma_x", p.gaussian.sigma_x}, {"sigma_y", p.gaussian.sigma_y},
                   {"mu_x", p.gaussian.mu_x},       {"mu_y", p.gaussian.mu_y},
                   {"radius_a", p.gaussian.radius_a}, {"radius_b", p.gaussian.radius_b}};
  j["disc_dilate_px"] = p.disc_dilate_px;
  j["vessel_window"] = p.vessel_window;
  return j;
}

std::optional<BinaryMask> optional_mask(const std::optional<fs::path>& path, const RgbImage& img, const char* what) {
  if (!path) return std::nullopt;
  BinaryMask m = load_binary_mask(*path);
  require(m.same_shape(img), ErrorKind::kDimensionMismatch,
          std::string(what) + " mask '" + path->string() + "' does not match the image size");
  return m;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

ValidationResult ensemble_validation(const EnsembleModel& ens, const FeatureDataset& split) {
  ValidationResult r;
  std::array<std::size_t, kNumClasses> seen{};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto truth = index_of(split.labels[i]);
    const auto pred = index_of(vote(ens, split.vectors[i]).label);
    ++r.confusion[truth][pred];
    ++seen[truth];
    correct += truth == pred;
  }
  r.accuracy = split.size() ? static_cast<double>(correct) / static_cast<double>(split.size()) : 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    r.per_class[c] = seen[c] ? static_cast<double>(r.confusion[c][c]) / static_cast<double>(seen[c])
                             : std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

ordered_json validation_json(const ValidationResult& v) {
  ordered_json j;
  j["accuracy"] = v.accuracy;
  ordered_json pc;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto name = std::string(label_name(label_at(c)));
    if (std::isnan(v.per_class[c])) {
      pc[name] = nullptr;
    } else {
      pc[name] = v.per_class[c];
    }
  }
  j["per_class"] = pc;
  return j;
}

// Trust with the weights of missing terms redistributed over the present ones.
int trust_percent(const LesionTrust& t, const TrustWeights& w) {
  const double wq = t.quality ? w.quality : 0.0;
  const double wf = t.f1 ? w.f1 : 0.0;
  const double sum = wq + wf + w.confidence;
  if (sum <= 0.0) return 0;
  TrustWeights scaled{wq / sum, wf / sum, 1.0 - wq / sum - wf / sum};
  return weighted_trust(t.quality.value_or(0.0), t.f1.value_or(0.0), t.confidence, scaled);
}

std::array<std::uint8_t, 3> overlay_color(LesionKind kind) {
  switch (kind) {
    case LesionKind::kMA: return {0, 255, 0};
    case LesionKind::kHEM: return {0, 96, 255};
    case LesionKind::kSE: return {255, 0, 255};
    case LesionKind::kHE: return {255, 255, 0};
  }
  return {255, 255, 255};
}

}  // namespace

// --- preprocess --------------------------------------------------------------

int cmd_preprocess(const CommandContext& ctx, const fs::path& in_dir, const fs::path& out_dir) {
  const auto images = list_images(in_dir);
  fs::create_directories(out_dir);
  const std::string fingerprint = config_fingerprint(ctx.config);
  std::mutex io;
  const auto errors = run_indexed(images.size(), ctx.jobs, [&](std::size_t i) {
    const fs::path& src = images[i];
    const std::string id = src.stem().string();
    const RgbImage img = load_rgb(src);
    const SampleFiles files = locate_sample(in_dir, id);
    const auto disc = optional_mask(files.disc, img, "disc");
    const auto vessels = optional_mask(files.vessels, img, "vessel");
    const RgbImage out = preprocess_chain(img, ctx.config.preprocess, disc ? &*disc : nullptr,
                                          vessels ? &*vessels : nullptr);
    ordered_json sidecar;
    sidecar["source"] = src.filename().string();
    sidecar["width"] = img.width();
    sidecar["height"] = img.height();
    sidecar["params"] = params_json(ctx.config.preprocess);
    sidecar["disc_removed"] = disc.has_value();
    sidecar["vessels_removed"] = vessels.has_value();
    sidecar["config_fingerprint"] = fingerprint;
    std::lock_guard lock(io);
    save_rgb(out, out_dir / (id + ".png"));
    write_text(out_dir / (id + ".json"), sidecar.dump(2) + "\n");
    *ctx.out << "preprocessed " << src.filename().string() << "\n";
  });
  int status = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (errors[i].empty()) continue;
    *ctx.err << "error: " << images[i].filename().string() << ": " << errors[i] << "\n";
    status = 1;
  }
  return status;
}

// --- train -------------------------------------------------------------------

TrainOutcome train_all(const FeatureDataset& train_raw, const FeatureDataset& val_raw, const Hyperparams& hp,
                       WeightBasis basis, std::uint64_t seed, unsigned jobs) {
  train_raw.validate();
  val_raw.validate();
  require(train_raw.dimension() == val_raw.dimension(), ErrorKind::kDimensionMismatch,
          "training features have d=" + std::to_string(train_raw.dimension()) + " but validation features have d=" +
              std::to_string(val_raw.dimension()));
  const auto counts = train_raw.class_counts();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    require(counts[c] > 0, ErrorKind::kMissingClass,
            "training split has no rows of class " + std::string(label_name(label_at(c))));
  }
  hp.validate();

  TrainOutcome out;
  out.scaler = fit_scaler(train_raw);
  const FeatureDataset train_std = apply_scaler(train_raw, out.scaler);
  const FeatureDataset val_std = apply_scaler(val_raw, out.scaler);

  std::vector<std::shared_ptr<const TrainedModel>> models(kAllModelKinds.size());
  const auto errors = run_indexed(kAllModelKinds.size(), jobs, [&](std::size_t m) {
    models[m] = std::make_shared<const TrainedModel>(train(kAllModelKinds[m], train_std, hp, Rng::derive(seed, m)));
  });
  for (std::size_t m = 0; m < errors.size(); ++m) {
    if (!errors[m].empty()) {
      fail(ErrorKind::kInvalidArgument,
           "training " + std::string(model_kind_name(kAllModelKinds[m])) + " failed: " + errors[m]);
    }
  }
  out.models = models;
  for (std::size_t m = 0; m < models.size(); ++m) out.metrics.push_back({kAllModelKinds[m], validate(*models[m], val_std)});
  out.ensemble = fit_weights(models, val_std, basis);
  out.ensemble_validation = ensemble_validation(*out.ensemble, val_std);
  return out;
}

ordered_json metrics_to_json(const TrainOutcome& outcome) {
  ordered_json j;
  j["models"] = ordered_json::array();
  for (std::size_t m = 0; m < outcome.metrics.size(); ++m) {
    const auto& mm = outcome.metrics[m];
    ordered_json row;
    row["model"] = model_kind_name(mm.kind);
    row["display_name"] = model_display_name(mm.kind);
    const ordered_json v = validation_json(mm.validation);
    row["accuracy"] = v["accuracy"];
    row["per_class"] = v["per_class"];
    if (outcome.ensemble) row["weights"] = outcome.ensemble->weights()[m].by_class;
    j["models"].push_back(row);
  }
  ordered_json ens = validation_json(outcome.ensemble_validation);
  if (outcome.ensemble) ens["weight_basis"] = weight_basis_name(outcome.ensemble->basis());
  j["ensemble"] = ens;
  return j;
}

std::string render_metrics_table(const TrainOutcome& outcome) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-24s %8s %8s %10s %8s\n", "Model", "No-DR", "Mild-DR", "Severe-DR", "Overall");
  os << buf;
  auto row = [&](const std::string& name, const ValidationResult& v) {
    auto cell = [](double x) { return std::isnan(x) ? std::string("-") : pct(x); };
    std::snprintf(buf, sizeof buf, "%-24s %8s %8s %10s %8s\n", name.c_str(), cell(v.per_class[0]).c_str(),
                  cell(v.per_class[1]).c_str(), cell(v.per_class[2]).c_str(), pct(v.accuracy).c_str());
    os << buf;
  };
  for (const auto& mm : outcome.metrics) row(std::string(model_display_name(mm.kind)), mm.validation);
  row("Weighted-vote ensemble", outcome.ensemble_validation);
  return os.str();
}

int cmd_train(const CommandContext& ctx, const fs::path& train_csv, const fs::path& val_csv, const fs::path& out_dir) {
  // Everything that can fail on the inputs happens before the first write.
  const FeatureDataset train_ds = load_features(train_csv);
  const FeatureDataset val_ds = load_features(val_csv);
  const TrainOutcome outcome =
      train_all(train_ds, val_ds, ctx.config.hyperparams, ctx.config.weight_basis, ctx.seed, ctx.jobs);

  fs::create_directories(out_dir);
  std::vector<fs::path> paths;
  for (const auto& model : outcome.models) {
    paths.push_back(out_dir / (std::string(model_kind_name(model->kind())) + ".model.json"));
    save_model(*model, paths.back());
  }
  save_ensemble(*outcome.ensemble, paths, out_dir / "ensemble.json", outcome.scaler);
  const ordered_json metrics = metrics_to_json(outcome);
  const std::string table = render_metrics_table(outcome);
  write_text(out_dir / "metrics.json", metrics.dump(2) + "\n");
  write_text(out_dir / "metrics.txt", table);
  if (ctx.format == OutputFormat::kJson) {
    *ctx.out << metrics.dump(2) << "\n";
  } else {
    *ctx.out << table;
  }
  return 0;
}

// --- grade -------------------------------------------------------------------

std::map<LesionKind, LesionQuality> load_lesion_metadata(const fs::path& path) {
  const json doc = read_json(path);
  require(doc.is_object(), ErrorKind::kCorruptPayload, "lesion metadata '" + path.string() + "' must be an object");
  std::map<LesionKind, LesionQuality> out;
  for (const auto& [code, entry] : doc.items()) {
    const LesionKind kind = parse_lesion_kind(code);
    LesionQuality q;
    for (const char* key : {"f1", "iou"}) {
      if (!entry.contains(key) || entry.at(key).is_null()) continue;
      const json& v = entry.at(key);
      require(v.is_number() && v.get<double>() >= 0.0 && v.get<double>() <= 1.0, ErrorKind::kOutOfRange,
              "lesion metadata '" + path.string() + "': " + code + "." + key + " must be a number in [0,1]");
      (std::string_view(key) == "f1" ? q.f1 : q.iou) = v.get<double>();
    }
    out[kind] = q;
  }
  return out;
}

GradeResources load_grade_resources(const PipelineConfig& config) {
  std::vector<std::string> missing;
  if (!config.ensemble) {
    missing.push_back("models.ensemble is not set in the config");
  } else if (!fs::exists(*config.ensemble)) {
    missing.push_back("ensemble file '" + config.ensemble->string() + "' does not exist");
  } else {
    const json doc = read_json(*config.ensemble);
    if (doc.contains("member_paths") && doc.at("member_paths").is_array()) {
      for (const auto& p : doc.at("member_paths")) {
        fs::path mp(p.get<std::string>());
        if (mp.is_relative()) mp = config.ensemble->parent_path() / mp;
        if (!fs::exists(mp)) missing.push_back("model file '" + mp.string() + "' does not exist");
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing grade inputs:";
    for (const auto& m : missing) msg += "\n  " + m;
    fail(ErrorKind::kMissingFile, msg);
  }

  GradeResources r;
  LoadedEnsemble loaded = load_ensemble(*config.ensemble);
  r.ensemble = std::make_shared<const EnsembleModel>(std::move(loaded.model));
  r.scaler = std::move(loaded.scaler);
  switch (config.features.backend) {
    case FeatureBackend::kFile:
      r.extractor = std::make_shared<const FileExtractor>(FileExtractor::from_csv(config.features.csv));
      break;
    case FeatureBackend::kChannelStats:
      r.extractor = std::make_shared<const ChannelStatsExtractor>();
      break;
    case FeatureBackend::kOnnx:
      r.extractor = make_onnx_extractor(config.features.onnx);
      break;
  }
  if (config.reference_image) r.reference = to_gray(load_rgb(*config.reference_image));
  if (config.lesion_metadata) r.lesion_quality = load_lesion_metadata(*config.lesion_metadata);
  return r;
}

RgbImage render_overlay(const RgbImage& base, const std::map<LesionKind, BinaryMask>& masks) {
  RgbImage out = base;
  for (const auto& [kind, mask] : masks) {
    require(mask.same_shape(base), ErrorKind::kDimensionMismatch, "overlay mask does not match the base image");
    const auto color = overlay_color(kind);
    for (std::size_t y = 0; y < base.height(); ++y) {
      for (std::size_t x = 0; x < base.width(); ++x) {
        if (!mask.at(x, y)) continue;
        for (std::size_t c = 0; c < 3; ++c) out.at(x, y, c) = color[c];
      }
    }
  }
  return out;
}

GradingReport grade_image(const PipelineConfig& config, const GradeResources& res, const GradeRequest& req) {
  const SampleFiles files = locate_sample(req.mask_dir, req.source_id);
  {
    std::vector<std::string> missing;
    if (req.image.empty() || !fs::exists(req.image)) missing.push_back("image for '" + req.source_id + "'");
    for (auto kind : kAllLesionKinds) {
      if (!files.probability.count(kind)) {
        missing.push_back("probability map " + (req.mask_dir / (req.source_id + "_" + std::string(lesion_code(kind)) +
                                                                ".pfmap")).string());
      }
    }
    if (!missing.empty()) {
      std::string msg = "missing inputs for '" + req.source_id + "':";
      for (const auto& m : missing) msg += "\n  " + m;
      fail(ErrorKind::kMissingEntry, msg);
    }
  }

  GradingReport report;
  report.source_id = req.source_id;
  report.config_fingerprint = config_fingerprint(config);

  auto t0 = Clock::now();
  const RgbImage img = load_rgb(req.image);
  const auto disc = optional_mask(files.disc, img, "disc");
  const auto vessels = optional_mask(files.vessels, img, "vessel");
  const RgbImage pre = preprocess_chain(img, config.preprocess, disc ? &*disc : nullptr, vessels ? &*vessels : nullptr);
  report.timings_ms.emplace_back("preprocess", elapsed_ms(t0));

  t0 = Clock::now();
  FeatureVector fv = res.extractor->extract(pre, req.source_id);
  if (res.scaler) fv.values = res.scaler->transform(fv.values);
  const VoteResult vr = vote(*res.ensemble, fv);
  report.ensemble_label = vr.label;
  report.ensemble_scores = vr.scores;
  for (std::size_t m = 0; m < vr.member_votes.size(); ++m) {
    report.member_votes.emplace_back(res.ensemble->members()[m]->kind(), vr.member_votes[m]);
  }
  report.timings_ms.emplace_back("classify", elapsed_ms(t0));

  t0 = Clock::now();
  const Point center = fundus_center(fundus_mask(img));
  std::map<LesionKind, ProbMask> probs;
  std::map<LesionKind, LesionAnalysis> analyses;
  for (auto kind : kAllLesionKinds) {
    ProbMask p = load_probmask(files.probability.at(kind));
    require(p.width() == img.width() && p.height() == img.height(), ErrorKind::kDimensionMismatch,
            "probability map " + files.probability.at(kind).string() + " does not match the image size");
    analyses.emplace(kind, analyze_lesion(kind, p, config.lesion_policy(kind)));
    probs.emplace(kind, std::move(p));
  }
  std::map<LesionKind, LesionMap> maps;
  for (const auto& [kind, a] : analyses) maps.emplace(kind, a.map);
  report.stage = stage(maps, img.width(), img.height(), center);
  for (auto kind : kAllLesionKinds) {
    const LesionAnalysis& a = analyses.at(kind);
    report.lesions.push_back(
        {kind, a.threshold, a.otsu_fallback, a.map.components.size(), quadrant_counts(a.map, img.width(), img.height(), center)});
  }
  report.combined = combine_decisions(report.ensemble_label, report.stage.three);
  report.timings_ms.emplace_back("lesions", elapsed_ms(t0));

  t0 = Clock::now();
  std::optional<double> quality;
  if (res.reference) quality = mse_quality(to_gray(img), *res.reference).quality;
  for (auto kind : kAllLesionKinds) {
    LesionTrust t;
    t.confidence = entropy_confidence(probs.at(kind));
    t.quality = quality;
    if (const auto it = res.lesion_quality.find(kind); it != res.lesion_quality.end()) {
      t.f1 = it->second.f1;
      t.iou = it->second.iou;
    }
    t.trust_pct = trust_percent(t, config.trust_weights);
    report.trust[kind] = t;
  }
  report.timings_ms.emplace_back("trust", elapsed_ms(t0));

  if (req.overlay) {
    std::map<LesionKind, BinaryMask> masks;
    for (const auto& [kind, a] : analyses) masks.emplace(kind, a.mask);
    save_rgb(render_overlay(pre, masks), *req.overlay);
  }
  return report;
}

int cmd_grade(const CommandContext& ctx, const std::vector<std::string>& inputs,
              const std::optional<fs::path>& mask_dir, const fs::path& out_dir, bool overlays) {
  const GradeResources res = load_grade_resources(ctx.config);
  fs::create_directories(out_dir);

  std::vector<GradeRequest> requests;
  for (const auto& input : inputs) {
    GradeRequest r;
    const fs::path as_path(input);
    if (fs::is_regular_file(as_path)) {
      r.image = as_path;
      r.source_id = as_path.stem().string();
      r.mask_dir = mask_dir.value_or(ctx.config.mask_dir.value_or(as_path.parent_path()));
    } else {
      r.source_id = input;
      r.mask_dir = mask_dir.value_or(ctx.config.mask_dir.value_or(fs::current_path()));
      r.image = locate_sample(r.mask_dir, input).image;
    }
    if (overlays) r.overlay = out_dir / (r.source_id + "_overlay.png");
    requests.push_back(std::move(r));
  }

  std::vector<std::optional<GradingReport>> reports(requests.size());
  const auto errors = run_indexed(requests.size(), ctx.jobs, [&](std::size_t i) {
    reports[i] = grade_image(ctx.config, res, requests[i]);
  });

  // Writing is serialised and in input order.
  int status = 0;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (!errors[i].empty()) {
      *ctx.err << "error: " << requests[i].source_id << ": " << errors[i] << "\n";
      status = 1;
      continue;
    }
    const ordered_json doc = report_to_json(*reports[i]);
    write_text(out_dir / (requests[i].source_id + ".report.json"), doc.dump(2) + "\n");
    if (ctx.format == OutputFormat::kJson) {
      *ctx.out << doc.dump(2) << "\n";
    } else {
      *ctx.out << render_report_text(*reports[i]) << "\n";
    }
  }
  return status;
}

// --- evaluate ----------------------------------------------------------------

EvaluationResult evaluate_masks(const PipelineConfig& config, const fs::path& pred_dir, const fs::path& truth_dir) {
  auto scan = [](const fs::path& dir, bool allow_pfmap) {
    std::map<std::string, fs::path> out;
    if (!fs::is_directory(dir)) fail(ErrorKind::kMissingFile, "'" + dir.string() + "' is not a directory");
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      const auto ext = e.path().extension().string();
      if (ext != ".png" && !(allow_pfmap && ext == ".pfmap")) continue;
      const std::string stem = e.path().stem().string();
      if (!split_mask_stem(stem)) continue;
      // A PNG prediction wins over a probability map with the same stem.
      if (out.count(stem) && ext == ".pfmap") continue;
      out[stem] = e.path();
    }
    return out;
  };
  const auto pred = scan(pred_dir, true);
  const auto truth = scan(truth_dir, false);

  EvaluationResult r;
  for (const auto& [stem, path] : pred) {
    if (!truth.count(stem)) r.unpaired.push_back(path.string());
  }
  for (const auto& [stem, path] : truth) {
    if (!pred.count(stem)) r.unpaired.push_back(path.string());
  }

  struct Pool {
    std::size_t inter = 0, uni = 0, pred = 0, truth = 0;
    std::vector<int> pred_presence, truth_presence;
  };
  std::map<LesionKind, Pool> pools;
  std::vector<int> all_pred, all_truth;
  for (const auto& [stem, truth_path] : truth) {
    const auto it = pred.find(stem);
    if (it == pred.end()) continue;
    const LesionKind kind = split_mask_stem(stem)->second;
    try {
      const BinaryMask t = load_binary_mask(truth_path);
      BinaryMask p = it->second.extension() == ".pfmap"
                         ? analyze_lesion(kind, load_probmask(it->second), config.lesion_policy(kind)).mask
                         : load_binary_mask(it->second);
      require(p.same_shape(t), ErrorKind::kDimensionMismatch, "prediction and truth differ in size");
      Pool& pool = pools[kind];
      const auto pd = p.data();
      const auto td = t.data();
      for (std::size_t i = 0; i < pd.size(); ++i) {
        pool.inter += pd[i] && td[i];
        pool.uni += pd[i] || td[i];
        pool.pred += pd[i] != 0;
        pool.truth += td[i] != 0;
      }
      const int pp = count_foreground(p) > 0, tp = count_foreground(t) > 0;
      pool.pred_presence.push_back(pp);
      pool.truth_presence.push_back(tp);
      all_pred.push_back(pp);
      all_truth.push_back(tp);
      ++r.pairs;
    } catch (const std::exception& e) {
      r.errors.push_back(stem + ": " + e.what());
    }
  }
  require(r.pairs > 0 || !r.errors.empty(), ErrorKind::kEmptyInput,
          "no pairs: no <id>_<KIND> mask in '" + pred_dir.string() + "' matches one in '" + truth_dir.string() + "'");
  for (const auto& [kind, pool] : pools) {
    KindMetrics m;
    m.images = pool.pred_presence.size();
    m.iou = pool.uni == 0 ? 1.0 : static_cast<double>(pool.inter) / static_cast<double>(pool.uni);
    const std::size_t denom = pool.pred + pool.truth;
    m.f1 = denom == 0 ? 1.0 : 2.0 * static_cast<double>(pool.inter) / static_cast<double>(denom);
    m.kappa = cohen_kappa(pool.pred_presence, pool.truth_presence);
    r.per_kind[kind] = m;
  }
  if (!all_pred.empty()) r.overall_kappa = cohen_kappa(all_pred, all_truth);
  return r;
}

ordered_json evaluation_to_json(const EvaluationResult& r) {
  ordered_json j;
  j["pairs"] = r.pairs;
  ordered_json kinds = ordered_json::object();
  for (auto kind : kAllLesionKinds) {
    const auto it = r.per_kind.find(kind);
    if (it == r.per_kind.end()) continue;
    const KindMetrics& m = it->second;
    kinds[std::string(lesion_code(kind))] = {{"images", m.images},
                                             {"iou", m.iou},
                                             {"f1", m.f1},
                                             {"kappa", m.kappa.kappa},
                                             {"kappa_band", m.kappa.band}};
  }
  j["per_kind"] = kinds;
  j["overall"] = {{"kappa", r.overall_kappa.kappa}, {"kappa_band", r.overall_kappa.band}};
  j["unpaired"] = r.unpaired;
  j["errors"] = r.errors;
  return j;
}

int cmd_evaluate(const CommandContext& ctx, const fs::path& pred_dir, const fs::path& truth_dir,
                 const std::optional<fs::path>& out_path) {
  const EvaluationResult r = evaluate_masks(ctx.config, pred_dir, truth_dir);
  const ordered_json doc = evaluation_to_json(r);
  if (out_path) write_text(*out_path, doc.dump(2) + "\n");
  if (ctx.format == OutputFormat::kJson) {
    *ctx.out << doc.dump(2) << "\n";
  } else {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-5s %7s %8s %8s %8s\n", "Kind", "Images", "IoU", "F1", "Kappa");
    *ctx.out << buf;
    for (const auto& [kind, m] : r.per_kind) {
      std::snprintf(buf, sizeof buf, "%-5s %7zu %8.4f %8.4f %8.4f\n", std::string(lesion_code(kind)).c_str(), m.images,
                    m.iou, m.f1, m.kappa.kappa);
      *ctx.out << buf;
    }
    *ctx.out << "overall kappa " << r.overall_kappa.kappa << " (" << r.overall_kappa.band << ")\n";
  }
  for (const auto& u : r.unpaired) *ctx.err << "unpaired: " << u << "\n";
  for (const auto& e : r.errors) *ctx.err << "error: " << e << "\n";
  return r.unpaired.empty() && r.errors.empty() ? 0 : 1;
}

// --- report ------------------------------------------------------------------

int cmd_report(const CommandContext& ctx, const fs::path& report_path) {
  const GradingReport r = report_from_json(read_json(report_path));
  if (ctx.format == OutputFormat::kJson) {
    *ctx.out << report_to_json(r).dump(2) << "\n";
  } else {
    *ctx.out << render_report_text(r);
  }
  return 0;
}

// --- synthgen ----------------------------------------------------------------

namespace {

FundusSpec stage_spec(int stage, std::uint32_t w, std::uint32_t h) {
  FundusSpec spec;
  spec.width = w;
  spec.height = h;
  auto add = [&](LesionKind kind, std::array<std::size_t, 4> q) { spec.lesions[kind] = default_lesion_spec(kind, q); };
  switch (stage) {
    case 1:
      add(LesionKind::kMA, {2, 1, 2, 1});
      break;
    case 2:
      add(LesionKind::kMA, {1, 1, 1, 1});
      add(LesionKind::kHEM, {3, 2, 3, 2});
      add(LesionKind::kHE, {2, 1, 1, 2});
      add(LesionKind::kSE, {1, 0, 1, 0});
      break;
    case 3:
      add(LesionKind::kMA, {1, 1, 1, 1});
      add(LesionKind::kHEM, {21, 21, 21, 21});
      add(LesionKind::kHE, {1, 1, 1, 1});
      break;
    default:
      break;
  }
  return spec;
}

ClassLabel stage_label(int stage) {
  return stage == 0 ? ClassLabel::kNoDR : stage == 3 ? ClassLabel::kSevereDR : ClassLabel::kMildDR;
}

}  // namespace

int cmd_synthgen(const CommandContext& ctx, const fs::path& out_dir, const SynthgenOptions& opt) {
  constexpr int kStages = 4;
  const std::uint64_t seed = ctx.seed;
  fs::create_directories(out_dir / "features");
  fs::create_directories(out_dir / "images");

  // Image ids and their class, in a fixed order.
  std::vector<std::pair<std::string, int>> images;
  for (int s = 0; s < kStages; ++s) {
    for (std::size_t k = 0; k < opt.images_per_stage; ++k) {
      char id[32];
      std::snprintf(id, sizeof id, "s%d_%03zu", s, k);
      images.emplace_back(id, s);
    }
  }

  // Features: one draw, so train/val/image rows share the class geometry.
  std::array<std::size_t, kNumClasses> image_rows{};
  for (const auto& [id, s] : images) ++image_rows[index_of(stage_label(s))];
  std::size_t per_class = opt.train_per_class + opt.val_per_class;
  per_class += *std::max_element(image_rows.begin(), image_rows.end());
  const FeatureDataset all = gen_features(Rng::derive(seed, 1), per_class, opt.dimension, opt.separation);
  FeatureDataset train_ds, val_ds, image_ds;
  std::array<std::size_t, kNumClasses> used{};
  std::array<std::vector<FeatureVector>, kNumClasses> image_pool;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto c = index_of(all.labels[i]);
    const std::size_t k = used[c]++;
    if (k < image_rows[c]) {
      image_pool[c].push_back(all.vectors[i]);
    } else if (k < image_rows[c] + opt.val_per_class) {
      val_ds.vectors.push_back(all.vectors[i]);
      val_ds.labels.push_back(all.labels[i]);
    } else if (k < image_rows[c] + opt.val_per_class + opt.train_per_class) {
      train_ds.vectors.push_back(all.vectors[i]);
      train_ds.labels.push_back(all.labels[i]);
    }
  }
  std::array<std::size_t, kNumClasses> taken{};
  for (const auto& [id, s] : images) {
    const auto c = index_of(stage_label(s));
    FeatureVector fv = image_pool[c][taken[c]++];
    fv.source_id = id;
    image_ds.vectors.push_back(std::move(fv));
    image_ds.labels.push_back(stage_label(s));
  }
  save_features(train_ds, out_dir / "features" / "train.csv");
  save_features(val_ds, out_dir / "features" / "val.csv");
  save_features(image_ds, out_dir / "features" / "images.csv");

  // Fundus images, ground truth, probability maps.
  struct Pooled {
    std::size_t inter = 0, uni = 0, pred = 0, truth = 0;
  };
  std::vector<std::map<LesionKind, Pooled>> pooled(images.size());
  const fs::path img_dir = out_dir / "images";
  const auto errors = run_indexed(images.size(), ctx.jobs, [&](std::size_t i) {
    const auto& [id, s] = images[i];
    const SyntheticFundus f = gen_fundus(Rng::derive(seed, 100 + i), stage_spec(s, opt.width, opt.height));
    save_rgb(f.image, img_dir / (id + ".png"));
    save_binary_mask(f.disc, img_dir / (id + "_disc.png"));
    save_binary_mask(f.vessels, img_dir / (id + "_vessels.png"));
    for (auto kind : kAllLesionKinds) {
      const BinaryMask& truth = f.lesions.at(kind);
      const std::string base = id + "_" + std::string(lesion_code(kind));
      save_binary_mask(truth, img_dir / (base + ".png"));
      // An empty map is written noise-free: Otsu would otherwise split pure
      // noise into spurious lesions.
      const bool empty = count_foreground(truth) == 0;
      const ProbMask p = soft_probability(truth, Rng::derive(seed, 10000 + 8 * i + static_cast<std::size_t>(kind)),
                                          0.92f, 0.04f, empty ? 0.0f : 0.03f);
      save_probmask(p, img_dir / (base + ".pfmap"));
      const BinaryMask pred = analyze_lesion(kind, p, LesionPolicy{}).mask;
      Pooled& acc = pooled[i][kind];
      for (std::size_t k = 0; k < pred.pixel_count(); ++k) {
        const bool a = pred.data()[k] != 0, b = truth.data()[k] != 0;
        acc.inter += a && b;
        acc.uni += a || b;
        acc.pred += a;
        acc.truth += b;
      }
    }
  });
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) fail(ErrorKind::kSpecOverflow, images[i].first + ": " + errors[i]);
  }

  ordered_json metadata;
  for (auto kind : kAllLesionKinds) {
    Pooled total;
    for (const auto& per_image : pooled) {
      const Pooled& p = per_image.at(kind);
      total.inter += p.inter;
      total.uni += p.uni;
      total.pred += p.pred;
      total.truth += p.truth;
    }
    const double iou_v = total.uni ? static_cast<double>(total.inter) / static_cast<double>(total.uni) : 1.0;
    const std::size_t denom = total.pred + total.truth;
    const double f1_v = denom ? 2.0 * static_cast<double>(total.inter) / static_cast<double>(denom) : 1.0;
    metadata[std::string(lesion_code(kind))] = {{"f1", f1_v}, {"iou", iou_v}};
  }
  write_text(out_dir / "lesion_metadata.json", metadata.dump(2) + "\n");

  const SyntheticFundus ref = gen_fundus(Rng::derive(seed, 2), stage_spec(0, opt.width, opt.height));
  save_rgb(ref.image, out_dir / "reference.png");
  const ColorStats stats = color_stats(ref.image, fundus_mask(ref.image));

  ordered_json cfg;
  cfg["seed"] = seed;
  cfg["preprocess"] = {{"color_reference", {{"mean", stats.mean}, {"std", stats.stddev}}}};
  cfg["features"] = {{"backend", "file"}, {"csv", "features/images.csv"}};
  cfg["models"] = {{"ensemble", "models/ensemble.json"}};
  cfg["lesions"] = {{"mask_dir", "images"}, {"min_area", 5}};
  cfg["trust"] = {{"reference_image", "reference.png"}, {"metadata", "lesion_metadata.json"}};
  write_text(out_dir / "config.json", cfg.dump(2) + "\n");

  if (ctx.format == OutputFormat::kJson) {
    *ctx.out << ordered_json{{"out_dir", out_dir.string()}, {"images", images.size()}, {"train_rows", train_ds.size()},
                             {"val_rows", val_ds.size()}}
                    .dump(2)
             << "\n";
  } else {
    *ctx.out << "wrote " << images.size() << " images, " << train_ds.size() << " training rows and " << val_ds.size()
             << " validation rows to " << out_dir.string() << "\n";
  }
  return 0;
}

}  // namespace drgrade::pipeline
