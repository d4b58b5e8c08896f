// pointmix - labeled LiDAR frame mixing and dataset tooling
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Flags override the TOML config, which is itself
// overridden by POINTMIX_SEED for the seed. Exit codes: 0 ok, 1 data error,
// 2 config/usage error. Failures print a JSON error report on stderr.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pointmix/pointmix.hpp"

namespace {

using namespace pointmix;

template <class T>
void set_if(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

void set_path(PipelineConfig& cfg, const char* key, const std::optional<std::string>& v) {
  if (v) cfg.paths[key] = *v;
}

int report_error(const char* kind, const std::string& message, int code) {
  nlohmann::json err = {{"status", "error"}, {"kind", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << err.dump() << '\n';
  return code;
}

struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> output_dir;

  std::optional<std::string> input, source, target, gtdb, predictions, labeled, pseudo, gt;
  std::optional<double> fraction;
  std::optional<double> cm_probability, half_min, half_max, range_tol;
  std::optional<std::size_t> cm_emissions, gt_max;
  std::optional<double> mx_probability, lambda, score_threshold, margin;
  std::optional<std::size_t> mx_emissions;
  std::optional<std::size_t> scenes, objects;
  std::optional<double> dropout;
  bool shared_scenes = false;
  std::optional<std::string> category, frames;
  std::optional<double> ap_model, ap_source_only, ap_oracle;
  bool raw_pr = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pointmix: cross-domain LiDAR frame mixing and dataset tooling"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "TOML pipeline config");
  app.add_option("--seed", f.seed, "Seed (overrides config and POINTMIX_SEED)");
  app.add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--output-dir", f.output_dir, "Output directory");

  auto* split = app.add_subcommand("split", "Tag every k-th target frame as labeled");
  split->add_option("--input", f.input, "Target manifest");
  split->add_option("--fraction", f.fraction, "Labeled fraction in (0, 1]");

  auto* gtdb = app.add_subcommand("gtdb", "Build the ground-truth object database from labeled frames");
  gtdb->add_option("--input", f.input, "Split target manifest");

  auto* stage1 = app.add_subcommand("stage1", "Inter-domain region mixing of source and labeled target frames");
  stage1->add_option("--source", f.source, "Source manifest");
  stage1->add_option("--target", f.target, "Split target manifest");
  stage1->add_option("--gtdb", f.gtdb, "Ground-truth database directory");
  stage1->add_option("--apply-probability", f.cm_probability);
  stage1->add_option("--half-extent-min", f.half_min);
  stage1->add_option("--half-extent-max", f.half_max);
  stage1->add_option("--range-tolerance", f.range_tol);
  stage1->add_option("--emissions", f.cm_emissions);
  stage1->add_option("--gt-max-per-class", f.gt_max);

  auto* filter = app.add_subcommand("filter", "Score-filter pseudo labels of the unlabeled frames");
  filter->add_option("--input", f.input, "Split target manifest");
  filter->add_option("--predictions", f.predictions, "Directory of <frame id>.json prediction files");
  filter->add_option("--score-threshold", f.score_threshold);

  auto* stage2 = app.add_subcommand("stage2", "Intra-domain scene mixing of real- and pseudo-labeled frames");
  stage2->add_option("--labeled", f.labeled, "Split target manifest");
  stage2->add_option("--pseudo", f.pseudo, "Manifest written by filter");
  stage2->add_option("--apply-probability", f.mx_probability);
  stage2->add_option("--lambda", f.lambda, "Fixed mixing ratio");
  stage2->add_option("--collision-margin", f.margin);
  stage2->add_option("--emissions", f.mx_emissions);

  auto* synth = app.add_subcommand("synth", "Render a synthetic source/target domain pair");
  synth->add_option("--scenes", f.scenes);
  synth->add_option("--objects", f.objects, "Objects per scene");
  synth->add_option("--dropout", f.dropout, "Per-ray dropout probability");
  synth->add_flag("--shared-scenes", f.shared_scenes, "Render the same scenes in both domains");

  auto* ev = app.add_subcommand("eval", "Center-distance AP and closed gap");
  ev->add_option("--gt", f.gt, "Ground-truth manifest");
  ev->add_option("--predictions", f.predictions, "Directory of <frame id>.json prediction files");
  ev->add_option("--category", f.category);
  ev->add_option("--frames", f.frames, "all | labeled | unlabeled");
  ev->add_option("--ap-model", f.ap_model, "Model AP for the closed gap (percent)");
  ev->add_option("--ap-source-only", f.ap_source_only, "Source-only AP (percent)");
  ev->add_option("--ap-oracle", f.ap_oracle, "Oracle AP (percent)");
  ev->add_flag("--raw-pr-integration", f.raw_pr);

  auto* stats = app.add_subcommand("stats", "Per-frame counts and range histograms as CSV");
  stats->add_option("--input", f.input, "Manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("UsageError", e.what(), 2);
  }

  try {
    PipelineConfig cfg = f.config ? load_config(*f.config) : PipelineConfig{};
    apply_seed_env(cfg);
    if (f.seed) cfg.seed.value = *f.seed;
    set_if(f.workers, cfg.workers);
    set_path(cfg, "output_dir", f.output_dir);
    set_if(f.fraction, cfg.split.fraction);
    set_if(f.cm_probability, cfg.cutmix.apply_probability);
    set_if(f.half_min, cfg.cutmix.half_extent_min);
    set_if(f.half_max, cfg.cutmix.half_extent_max);
    set_if(f.range_tol, cfg.cutmix.range_tolerance);
    set_if(f.cm_emissions, cfg.cutmix.emissions);
    set_if(f.gt_max, cfg.augment.gt_sample_max_per_class);
    set_if(f.mx_probability, cfg.mixup.apply_probability);
    if (f.lambda) cfg.mixup.lambda = mixup::LambdaPolicy::fixed(*f.lambda);
    set_if(f.score_threshold, cfg.mixup.score_threshold);
    set_if(f.margin, cfg.mixup.collision_margin);
    set_if(f.mx_emissions, cfg.mixup.emissions);
    set_if(f.scenes, cfg.synth.scenes);
    set_if(f.objects, cfg.synth.scene.n_objects);
    if (f.dropout) cfg.synth.source.dropout_probability = cfg.synth.target.dropout_probability = *f.dropout;
    if (f.shared_scenes) cfg.synth.shared_scenes = true;
    set_if(f.category, cfg.eval.category);
    set_if(f.frames, cfg.eval_frames);
    if (f.ap_source_only) cfg.gap.ap_source_only = f.ap_source_only;
    if (f.ap_oracle) cfg.gap.ap_oracle = f.ap_oracle;
    if (f.raw_pr) cfg.eval.raw_pr_integration = true;

    set_path(cfg, "input_manifest", f.input);
    set_path(cfg, "source_manifest", f.source);
    set_path(cfg, "target_manifest", f.target);
    set_path(cfg, "gtdb_dir", f.gtdb);
    set_path(cfg, "predictions_dir", f.predictions);
    set_path(cfg, "labeled_manifest", f.labeled);
    set_path(cfg, "pseudo_manifest", f.pseudo);
    set_path(cfg, "gt_manifest", f.gt);
    cfg.validate();

    pipeline::Hooks hooks;
    hooks.log = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };

    pipeline::RunRecord rec;
    if (split->parsed()) rec = pipeline::run_split(cfg, hooks);
    else if (gtdb->parsed()) rec = pipeline::run_gtdb(cfg, hooks);
    else if (stage1->parsed()) rec = pipeline::run_stage1(cfg, hooks);
    else if (filter->parsed()) rec = pipeline::run_filter(cfg, hooks);
    else if (stage2->parsed()) rec = pipeline::run_stage2(cfg, hooks);
    else if (synth->parsed()) rec = pipeline::run_synth(cfg, hooks);
    else if (ev->parsed()) rec = pipeline::run_eval(cfg, hooks, f.ap_model);
    else if (stats->parsed()) rec = pipeline::run_stats(cfg, hooks);

    std::cout << nlohmann::json{{"status", "ok"}, {"subcommand", rec.subcommand}, {"counts", rec.counts}}.dump()
              << '\n';
    return 0;
  } catch (const ConfigError& e) {
    return report_error(e.kind(), e.what(), 2);
  } catch (const Error& e) {
    return report_error(e.kind(), e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("Error", e.what(), 1);
  }
}
