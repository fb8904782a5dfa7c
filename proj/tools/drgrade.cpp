#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drgrade/error.hpp"
#include "drgrade/pipeline/commands.hpp"
#include "drgrade/pipeline/config.hpp"

namespace fs = std::filesystem;
using namespace drgrade;
using namespace drgrade::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"Diabetic-retinopathy grading pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string format = "text";
  app.add_option("--config", config_path, "Pipeline config JSON")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed, overrides the config");
  app.add_option("--jobs", jobs, "Worker threads for batch commands")->check(CLI::Range(1u, 1024u));
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "text"}));

  std::string in_dir, out_dir, train_csv, val_csv, pred_dir, truth_dir, report_path;
  std::vector<std::string> grade_inputs;
  std::string mask_dir, eval_out;
  bool overlays = false;
  SynthgenOptions synth;
  std::uint32_t synth_size = 256;

  auto* pre = app.add_subcommand("preprocess", "Run the preprocessing chain over a folder of images");
  pre->add_option("in_dir", in_dir)->required()->check(CLI::ExistingDirectory);
  pre->add_option("out_dir", out_dir)->required();

  auto* trn = app.add_subcommand("train", "Train the six classifiers and fit the ensemble");
  trn->add_option("train_csv", train_csv)->required()->check(CLI::ExistingFile);
  trn->add_option("val_csv", val_csv)->required()->check(CLI::ExistingFile);
  trn->add_option("out_dir", out_dir)->required();

  auto* grd = app.add_subcommand("grade", "Grade images (paths or source ids)");
  grd->add_option("inputs", grade_inputs)->required();
  grd->add_option("--out", out_dir, "Report directory")->required();
  grd->add_option("--masks", mask_dir, "Directory with <id>_<KIND>.pfmap maps")->check(CLI::ExistingDirectory);
  grd->add_flag("--overlay", overlays, "Write <id>_overlay.png");

  auto* evl = app.add_subcommand("evaluate", "Compare predicted and ground-truth lesion masks");
  evl->add_option("pred_dir", pred_dir)->required()->check(CLI::ExistingDirectory);
  evl->add_option("truth_dir", truth_dir)->required()->check(CLI::ExistingDirectory);
  evl->add_option("--out", eval_out, "Also write the metrics JSON here");

  auto* rpt = app.add_subcommand("report", "Render a grading report");
  rpt->add_option("report", report_path)->required()->check(CLI::ExistingFile);

  auto* syn = app.add_subcommand("synthgen", "Write a synthetic fixture tree");
  syn->add_option("out_dir", out_dir)->required();
  syn->add_option("--images-per-stage", synth.images_per_stage)->capture_default_str();
  syn->add_option("--size", synth_size, "Image width and height")->check(CLI::Range(128u, 4096u))->capture_default_str();
  syn->add_option("--train-per-class", synth.train_per_class)->capture_default_str();
  syn->add_option("--val-per-class", synth.val_per_class)->capture_default_str();
  syn->add_option("--dim", synth.dimension)->check(CLI::Range(std::size_t{2}, std::size_t{100000}))->capture_default_str();
  syn->add_option("--separation", synth.separation)->check(CLI::NonNegativeNumber)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    CommandContext ctx;
    ctx.config = config_path.empty() ? default_config() : load_config(config_path);
    ctx.seed = seed.value_or(ctx.config.seed);
    ctx.jobs = jobs;
    ctx.format = format == "json" ? OutputFormat::kJson : OutputFormat::kText;

    if (*pre) return cmd_preprocess(ctx, in_dir, out_dir);
    if (*trn) return cmd_train(ctx, train_csv, val_csv, out_dir);
    if (*grd) {
      const std::optional<fs::path> masks = mask_dir.empty() ? std::nullopt : std::optional<fs::path>(mask_dir);
      return cmd_grade(ctx, grade_inputs, masks, out_dir, overlays);
    }
    if (*evl) {
      const std::optional<fs::path> out = eval_out.empty() ? std::nullopt : std::optional<fs::path>(eval_out);
      return cmd_evaluate(ctx, pred_dir, truth_dir, out);
    }
    if (*rpt) return cmd_report(ctx, report_path);
    if (*syn) {
      synth.width = synth.height = synth_size;
      return cmd_synthgen(ctx, out_dir, synth);
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
