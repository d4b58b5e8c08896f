// pointmix - labeled LiDAR frame mixing and dataset tooling
// SPDX-License-Identifier: Apache-2.0

#ifndef POINTMIX_PIPELINE_HPP
#define POINTMIX_PIPELINE_HPP

#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pointmix/augment.hpp"
#include "pointmix/config.hpp"
#include "pointmix/core.hpp"
#include "pointmix/cutmix.hpp"
#include "pointmix/eval.hpp"
#include "pointmix/io.hpp"
#include "pointmix/mixup.hpp"
#include "pointmix/parallel.hpp"
#include "pointmix/synth.hpp"

/**
 * Dataset-level stages. Every stage reads datasets from disk, writes its
 * outputs under `output_dir` (frames/, manifest.json) and a run_record.json
 * holding the seed, the tunables and their hash, the inputs and the counts.
 *
 *   synth  -> source.json, target.json
 *   split  -> target manifest with labeled/unlabeled tags
 *   gtdb   -> ground-truth object database from the labeled frames
 *   stage1 -> region-mixed source/target frames (+ GT sampling, world aug, crop)
 *   filter -> score-filtered pseudo labels for the unlabeled frames
 *   stage2 -> scene-mixed real/pseudo frames (+ world aug, crop)
 *   eval   -> eval_report.json
 *   stats  -> frames.csv, range_hist.csv
 */
namespace pointmix::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Seed streams per stage, so stages never share random sequences.
inline constexpr std::uint64_t kStreamCutMix = 1;
inline constexpr std::uint64_t kStreamMixUp = 2;
inline constexpr std::uint64_t kStreamAugment = 3;
inline constexpr std::uint64_t kStreamGtSample = 4;
inline constexpr std::uint64_t kStreamSynth = 5;

struct RunRecord {
  std::string subcommand;
  Seed seed;
  std::string config_hash;
  json config;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::uint64_t> counts;
  std::vector<std::string> warnings;
};

inline json to_json(const RunRecord& r) {
  return {{"subcommand", r.subcommand}, {"seed", r.seed.value}, {"config_hash", r.config_hash},
          {"config", r.config},         {"inputs", r.inputs},   {"counts", r.counts},
          {"warnings", r.warnings}};
}

struct Hooks {
  /// Called per stage1 emission with the mixed frame (before augmentation) and the final frame.
  std::function<void(const cutmix::Emission&, const Frame&)> on_stage1;
  std::function<void(const mixup::Emission&, const Frame&)> on_stage2;
  std::function<void(const std::string&)> log;
};

namespace detail {

inline const std::string& require_path(const PipelineConfig& cfg, const std::string& key) {
  const auto it = cfg.paths.find(key);
  if (it == cfg.paths.end() || it->second.empty()) throw ConfigError("missing required path '" + key + "'");
  return it->second;
}

inline std::optional<std::string> optional_path(const PipelineConfig& cfg, const std::string& key) {
  const auto it = cfg.paths.find(key);
  if (it == cfg.paths.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

inline RunRecord start(const std::string& sub, const PipelineConfig& cfg) {
  cfg.validate();
  RunRecord r;
  r.subcommand = sub;
  r.seed = cfg.seed;
  r.config = tunables_to_json(cfg);
  r.config_hash = config_hash(cfg);
  for (const auto& [k, v] : cfg.paths)
    if (k != "output_dir") r.inputs[k] = v;
  return r;
}

inline void warn(RunRecord& r, const Hooks& hooks, std::string msg) {
  if (hooks.log) hooks.log(msg);
  r.warnings.push_back(std::move(msg));
}

inline void finish(const RunRecord& r, const fs::path& out_dir) {
  io::detail::write_text(out_dir / "run_record.json", io::dump_canonical(to_json(r)));
}

/// Frames of a manifest subset, intensity-normalized on load when configured.
class InputFrames {
public:
  InputFrames(std::vector<ManifestEntry> entries, std::optional<std::pair<double, double>> intensity)
      : frames_(std::move(entries)), intensity_(intensity) {}

  std::size_t size() const { return frames_.size(); }
  Frame at(std::size_t i) const {
    Frame f = frames_.at(i);
    if (intensity_) f = augment::normalize_intensity(std::move(f), intensity_->first, intensity_->second);
    return f;
  }

private:
  io::ManifestFrames frames_;
  std::optional<std::pair<double, double>> intensity_;
};

/// Writes frames to <out>/frames/ and collects their manifest entries.
class FrameWriter {
public:
  FrameWriter(fs::path out_dir, SplitTag split) : out_(std::move(out_dir)), split_(split) {}

  void write(const Frame& f) {
    ManifestEntry e{f.id, out_ / "frames" / (f.id + ".bin"), out_ / "frames" / (f.id + ".json"), f.domain,
                    split_};
    io::write_frame(f, e.cloud_path, e.label_path);
    manifest_.frames.push_back(std::move(e));
  }
  void close() { io::write_manifest(out_ / "manifest.json", manifest_); }
  std::size_t size() const { return manifest_.frames.size(); }

private:
  fs::path out_;
  SplitTag split_;
  DatasetManifest manifest_;
};

inline Frame finish_frame(Frame f, const augment::AugmentConfig& aug, Seed seed) {
  f = augment::random_world_augment(std::move(f), aug, seed);
  return crop_to_range(f, aug.crop);
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline RunRecord run_synth(const PipelineConfig& cfg, const Hooks& = {}) {
  RunRecord rec = detail::start("synth", cfg);
  const fs::path out = detail::require_path(cfg, "output_dir");
  const auto [src, tgt] = synth::make_domain_pair(cfg.synth, derive_seed(cfg.seed, kStreamSynth), out);
  std::uint64_t src_points = 0, tgt_points = 0, src_boxes = 0, tgt_boxes = 0;
  for (const auto& e : src.frames) {
    src_points += std::filesystem::file_size(e.cloud_path) / io::kBytesPerPoint;
    src_boxes += io::read_labels(e.label_path).boxes.size();
  }
  for (const auto& e : tgt.frames) {
    tgt_points += std::filesystem::file_size(e.cloud_path) / io::kBytesPerPoint;
    tgt_boxes += io::read_labels(e.label_path).boxes.size();
  }
  rec.counts = {{"source_frames", src.frames.size()}, {"target_frames", tgt.frames.size()},
                {"source_points", src_points},        {"target_points", tgt_points},
                {"source_boxes", src_boxes},          {"target_boxes", tgt_boxes}};
  detail::finish(rec, out);
  return rec;
}

inline RunRecord run_split(const PipelineConfig& cfg, const Hooks& = {}) {
  RunRecord rec = detail::start("split", cfg);
  const fs::path out = detail::require_path(cfg, "output_dir");
  const DatasetManifest in = io::read_manifest(detail::require_path(cfg, "input_manifest"));
  const DatasetManifest split = make_ssda_split(in, cfg.split.fraction);
  io::write_manifest(out / "manifest.json", split);
  rec.counts = {{"frames", split.frames.size()},
                {"labeled", count_split(split, SplitTag::labeled)},
                {"unlabeled", count_split(split, SplitTag::unlabeled)}};
  detail::finish(rec, out);
  return rec;
}

inline RunRecord run_gtdb(const PipelineConfig& cfg, const Hooks& = {}) {
  RunRecord rec = detail::start("gtdb", cfg);
  const fs::path out = detail::require_path(cfg, "output_dir");
  const DatasetManifest in = io::read_manifest(detail::require_path(cfg, "input_manifest"));
  const auto labeled = io::select(in, SplitTag::labeled);
  if (labeled.empty()) throw InvalidArgument("gtdb: manifest has no frames tagged labeled");
  const detail::InputFrames frames(labeled, cfg.augment.intensity_range);

  augment::GtDatabase db;
  std::uint64_t empty = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Frame f = frames.at(i);
    auto part = augment::build_gt_database(std::span<const Frame>(&f, 1));
    for (auto& e : part.entries) {
      empty += e.empty();
      db.entries.push_back(std::move(e));
    }
  }
  augment::save_gt_database(db, out);
  rec.counts = {{"frames", frames.size()}, {"entries", db.entries.size()}, {"empty_entries", empty}};
  detail::finish(rec, out);
  return rec;
}

inline RunRecord run_stage1(const PipelineConfig& cfg, const Hooks& hooks = {}) {
  RunRecord rec = detail::start("stage1", cfg);
  const fs::path out = detail::require_path(cfg, "output_dir");
  const DatasetManifest src_m = io::read_manifest(detail::require_path(cfg, "source_manifest"));
  const DatasetManifest tgt_m = io::read_manifest(detail::require_path(cfg, "target_manifest"));
  const auto labeled = io::select(tgt_m, SplitTag::labeled);
  if (labeled.empty()) throw InvalidArgument("stage1: target manifest has no frames tagged labeled");
  const detail::InputFrames sources(src_m.frames, cfg.augment.intensity_range);
  const detail::InputFrames targets(labeled, cfg.augment.intensity_range);
  if (sources.size() == 0) throw InvalidArgument("stage1: source manifest is empty");

  std::optional<augment::GtDatabase> db;
  if (const auto dir = detail::optional_path(cfg, "gtdb_dir")) db = augment::load_gt_database(*dir);
  const bool sample_gt = db && !db->entries.empty() && cfg.augment.gt_sample_max_per_class > 0;

  const Seed mix_seed = derive_seed(cfg.seed, kStreamCutMix);
  const Seed aug_seed = derive_seed(cfg.seed, kStreamAugment);
  const Seed gt_seed = derive_seed(cfg.seed, kStreamGtSample);
  cfg.cutmix.validate();

  struct Item {
    cutmix::Emission em;
    std::optional<Frame> final_frame;
  };
  detail::FrameWriter writer(out, SplitTag::labeled);
  std::uint64_t mixed = 0, skipped = 0;
  const std::size_t n = cutmix::emission_count(cfg.cutmix.emissions, targets.size());
  ordered_parallel_for(
      n, cfg.workers,
      [&](std::size_t i) {
        Item it{cutmix::cutmix_emit(sources, targets, cfg.cutmix, mix_seed, i), std::nullopt};
        if (it.em.frame) {
          Frame f = *it.em.frame;
          if (sample_gt) f = augment::gt_sample(std::move(f), *db, cfg.augment, derive_seed(gt_seed, i));
          it.final_frame = detail::finish_frame(std::move(f), cfg.augment, derive_seed(aug_seed, i));
        }
        return it;
      },
      [&](Item it) {
        if (!it.final_frame) {
          ++skipped;
          detail::warn(rec, hooks, "stage1 emission " + std::to_string(it.em.index) + " skipped: " + it.em.error);
          return;
        }
        mixed += it.em.mixed;
        if (hooks.on_stage1) hooks.on_stage1(it.em, *it.final_frame);
        writer.write(*it.final_frame);
      });
  writer.close();
  rec.counts = {{"emitted", writer.size()}, {"mixed", mixed}, {"skipped", skipped},
                {"source_frames", sources.size()}, {"target_frames", targets.size()}};
  detail::finish(rec, out);
  return rec;
}

inline RunRecord run_filter(const PipelineConfig& cfg, const Hooks& hooks = {}) {
  RunRecord rec = detail::start("filter", cfg);
  const fs::path out = detail::require_path(cfg, "output_dir");
  const DatasetManifest in = io::read_manifest(detail::require_path(cfg, "input_manifest"));
  const fs::path preds = detail::require_path(cfg, "predictions_dir");

  DatasetManifest result;
  std::uint64_t boxes_in = 0, boxes_kept = 0, missing = 0;
  for (const auto& e : io::select(in, SplitTag::unlabeled)) {
    const fs::path pred_file = preds / (e.id + ".json");
    if (!fs::exists(pred_file)) {
      ++missing;
      detail::warn(rec, hooks, "filter: no predictions for frame '" + e.id + "'");
      continue;
    }
    const auto lf = io::read_labels(pred_file, io::LabelKind::prediction);
    const auto kept = mixup::filter_pseudo_labels(lf.boxes, cfg.mixup.score_threshold);
    boxes_in += lf.boxes.size();
    boxes_kept += kept.size();
    ManifestEntry me = e;
    me.label_path = out / "labels" / (e.id + ".json");
    io::write_labels(me.label_path, e.id, kept);
    result.frames.push_back(std::move(me));
  }
  io::write_manifest(out / "manifest.json", result);
  rec.counts = {{"frames", result.frames.size()}, {"missing_predictions", missing},
                {"boxes_in", boxes_in},           {"boxes_kept", boxes_kept}};
  detail::finish(rec, out);
  return rec;
}

inline RunRecord run_stage2(const PipelineConfig& cfg, const Hooks& hooks = {}) {
  RunRecord rec = detail::start("stage2", cfg);
  const fs::path out = detail::require_path(cfg, "output_dir");
  const DatasetManifest lab_m = io::read_manifest(detail::require_path(cfg, "labeled_manifest"));
  const DatasetManifest pse_m = io::read_manifest(detail::require_path(cfg, "pseudo_manifest"));
  const auto labeled_entries = io::select(lab_m, SplitTag::labeled);
  if (labeled_entries.empty()) throw InvalidArgument("stage2: labeled manifest has no frames tagged labeled");
  if (pse_m.frames.empty()) throw InvalidArgument("stage2: pseudo manifest is empty");
  const detail::InputFrames labeled(labeled_entries, cfg.augment.intensity_range);
  const detail::InputFrames pseudo(pse_m.frames, cfg.augment.intensity_range);

  const Seed mix_seed = derive_seed(cfg.seed, kStreamMixUp);
  const Seed aug_seed = derive_seed(cfg.seed, kStreamAugment);
  cfg.mixup.validate();

  struct Item {
    mixup::Emission em;
    std::optional<Frame> final_frame;
  };
  detail::FrameWriter writer(out, SplitTag::labeled);
  std::uint64_t mixed = 0, skipped = 0;
  const std::size_t n = cutmix::emission_count(cfg.mixup.emissions, labeled.size() + pseudo.size());
  ordered_parallel_for(
      n, cfg.workers,
      [&](std::size_t i) {
        Item it{mixup::mixup_emit(labeled, pseudo, cfg.mixup, mix_seed, i), std::nullopt};
        if (it.em.frame) it.final_frame = detail::finish_frame(*it.em.frame, cfg.augment, derive_seed(aug_seed, i));
        return it;
      },
      [&](Item it) {
        if (!it.final_frame) {
          ++skipped;
          detail::warn(rec, hooks, "stage2 emission " + std::to_string(it.em.index) + " skipped: " + it.em.error);
          return;
        }
        mixed += it.em.mixed;
        if (hooks.on_stage2) hooks.on_stage2(it.em, *it.final_frame);
        writer.write(*it.final_frame);
      });
  writer.close();
  rec.counts = {{"emitted", writer.size()}, {"mixed", mixed}, {"skipped", skipped},
                {"labeled_frames", labeled.size()}, {"pseudo_frames", pseudo.size()}};
  detail::finish(rec, out);
  return rec;
}

/// Evaluates prediction files (<predictions_dir>/<frame id>.json) against the
/// ground truth of gt_manifest. Without a gt_manifest only the closed gap of
/// the supplied AP values is computed.
inline RunRecord run_eval(const PipelineConfig& cfg, const Hooks& hooks = {},
                          std::optional<double> ap_model = std::nullopt) {
  RunRecord rec = detail::start("eval", cfg);
  const fs::path out = detail::require_path(cfg, "output_dir");
  json report = json::object();

  std::optional<double> model_ap = ap_model;
  if (const auto gt_path = detail::optional_path(cfg, "gt_manifest")) {
    const DatasetManifest gt_m = io::read_manifest(*gt_path);
    const fs::path preds_dir = detail::require_path(cfg, "predictions_dir");
    std::vector<eval::FrameBoxes> preds, gts;
    std::uint64_t missing = 0;
    for (const auto& e : gt_m.frames) {
      if (cfg.eval_frames == "labeled" && e.split != SplitTag::labeled) continue;
      if (cfg.eval_frames == "unlabeled" && e.split != SplitTag::unlabeled) continue;
      gts.push_back(io::read_labels(e.label_path).boxes);
      const fs::path pf = preds_dir / (e.id + ".json");
      if (fs::exists(pf)) {
        preds.push_back(io::read_labels(pf, io::LabelKind::prediction).boxes);
      } else {
        ++missing;
        detail::warn(rec, hooks, "eval: no predictions for frame '" + e.id + "', counted as empty");
        preds.emplace_back();
      }
    }
    const eval::EvalReport r = eval::evaluate(preds, gts, cfg.eval);
    report = eval::to_json(r);
    if (r.mean_ap && !model_ap) model_ap = *r.mean_ap * 100.0;
    rec.counts = {{"frames", gts.size()}, {"missing_predictions", missing}, {"n_gt", r.n_gt}, {"n_pred", r.n_pred}};
  }
  if (cfg.gap.ap_source_only && cfg.gap.ap_oracle && model_ap) {
    report["closed_gap"] = {{"ap_model", *model_ap},
                            {"ap_source_only", *cfg.gap.ap_source_only},
                            {"ap_oracle", *cfg.gap.ap_oracle},
                            {"percent", eval::closed_gap(*model_ap, *cfg.gap.ap_source_only, *cfg.gap.ap_oracle)}};
  } else if (!detail::optional_path(cfg, "gt_manifest")) {
    throw ConfigError("eval needs gt_manifest, or ap_model with ap_source_only and ap_oracle");
  }
  io::detail::write_text(out / "eval_report.json", io::dump_canonical(report));
  detail::finish(rec, out);
  return rec;
}

/// Per-frame counts and BEV range histograms (2 m bins, last bin open-ended).
inline RunRecord run_stats(const PipelineConfig& cfg, const Hooks& = {}) {
  RunRecord rec = detail::start("stats", cfg);
  const fs::path out = detail::require_path(cfg, "output_dir");
  const DatasetManifest in = io::read_manifest(detail::require_path(cfg, "input_manifest"));
  constexpr double kBin = 2.0;
  constexpr std::size_t kBins = 40;
  std::array<std::uint64_t, kBins> point_hist{}, box_hist{};
  auto bin_of = [&](double r) { return std::min(kBins - 1, static_cast<std::size_t>(r / kBin)); };

  fs::create_directories(out);
  std::ofstream frames_csv(out / "frames.csv", std::ios::binary | std::ios::trunc);
  frames_csv << "id,domain,split,n_points,n_boxes,n_real,n_pseudo\n";
  std::uint64_t total_points = 0, total_boxes = 0;
  for (const auto& e : in.frames) {
    const Frame f = io::read_frame(e);
    std::size_t n_real = 0;
    for (const auto& l : f.labels) n_real += l.provenance == Provenance::real;
    frames_csv << f.id << ',' << to_string(e.domain) << ',' << to_string(e.split) << ',' << f.cloud.size() << ','
               << f.labels.size() << ',' << n_real << ',' << f.labels.size() - n_real << '\n';
    for (const auto& p : f.cloud) ++point_hist[bin_of(geom::bev_range(p))];
    for (const auto& l : f.labels) ++box_hist[bin_of(geom::bev_range(geom::bev(l.box.center)))];
    total_points += f.cloud.size();
    total_boxes += f.labels.size();
  }
  std::ofstream hist_csv(out / "range_hist.csv", std::ios::binary | std::ios::trunc);
  hist_csv << "bin_lo,bin_hi,points,boxes\n";
  for (std::size_t b = 0; b < kBins; ++b) {
    hist_csv << b * kBin << ',';
    if (b + 1 < kBins) hist_csv << (b + 1) * kBin;
    else hist_csv << "inf";
    hist_csv << ',' << point_hist[b] << ',' << box_hist[b] << '\n';
  }
  rec.counts = {{"frames", in.frames.size()}, {"points", total_points}, {"boxes", total_boxes}};
  detail::finish(rec, out);
  return rec;
}

}  // namespace pointmix::pipeline

#endif  // POINTMIX_PIPELINE_HPP
