#pragma once

// End-to-end orchestration: strategy configuration, dataset manifests,
// change detection for one pair, the four-strategy benchmark, and the
// synthetic dataset writer.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dacd/error.hpp"
#include "dacd/eval.hpp"
#include "dacd/features.hpp"
#include "dacd/image.hpp"
#include "dacd/locgrid.hpp"
#include "dacd/match.hpp"
#include "dacd/mining.hpp"
#include "dacd/overlay.hpp"
#include "dacd/pairing.hpp"
#include "dacd/synth.hpp"
#include "dacd/translate.hpp"

namespace dacd {

namespace fs = std::filesystem;

enum class MiningStrategy : std::uint8_t { WithMining, WithoutMining };

struct StrategyConfig {
  MergeStrategy merge = MergeStrategy::WithMerge;
  MiningStrategy mining = MiningStrategy::WithoutMining;
  CompareParams compare;
  ExtractionConfig extraction;
  TranslatorSpec translator;
  std::uint64_t seed = 0;
  double overlay_fraction = 0.05;
  int min_box_side = 10;

  bool merged() const { return merge == MergeStrategy::WithMerge; }
  bool mined() const { return mining == MiningStrategy::WithMining; }
};

inline std::string strategy_key(MergeStrategy m, MiningStrategy n) {
  return std::string(m == MergeStrategy::WithMerge ? "merge" : "nomerge") + "_" +
         (n == MiningStrategy::WithMining ? "mining" : "nomining");
}

inline std::string strategy_label(MergeStrategy m, MiningStrategy n) {
  return std::string(m == MergeStrategy::WithMerge ? "w/ merge" : "w/o merge") + ", " +
         (n == MiningStrategy::WithMining ? "w/ mining" : "w/o mining");
}

// ---------------------------------------------------------------------------
// Config file (JSON mirror of StrategyConfig; every field optional)

inline StrategyConfig config_from_json(const nlohmann::json& j) {
  StrategyConfig cfg;
  try {
    if (j.contains("merge")) cfg.merge = j["merge"].get<bool>() ? MergeStrategy::WithMerge : MergeStrategy::WithoutMerge;
    if (j.contains("mining")) {
      cfg.mining = j["mining"].get<bool>() ? MiningStrategy::WithMining : MiningStrategy::WithoutMining;
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.overlay_fraction = j.value("overlay_fraction", cfg.overlay_fraction);
    cfg.min_box_side = j.value("min_box_side", cfg.min_box_side);
    if (j.contains("compare")) {
      const auto& c = j["compare"];
      cfg.compare.radius = c.value("radius", cfg.compare.radius);
      cfg.compare.d_a = c.value("d_a", cfg.compare.d_a);
      cfg.compare.d_b = c.value("d_b", cfg.compare.d_b);
      cfg.compare.ratio_threshold = c.value("ratio_threshold", cfg.compare.ratio_threshold);
      cfg.compare.loc_ceiling = c.value("loc_ceiling", cfg.compare.loc_ceiling);
    }
    if (j.contains("extraction")) {
      const auto& e = j["extraction"];
      auto& x = cfg.extraction;
      x.scales = e.value("scales", x.scales);
      x.harris_k = e.value("harris_k", x.harris_k);
      x.threshold_rel = e.value("threshold_rel", x.threshold_rel);
      x.nms_radius = e.value("nms_radius", x.nms_radius);
      x.differentiation_ratio = e.value("differentiation_ratio", x.differentiation_ratio);
      x.stride = e.value("stride", x.stride);
      x.dense_scale = e.value("dense_scale", x.dense_scale);
      x.descriptor_smoothing = e.value("descriptor_smoothing", x.descriptor_smoothing);
      x.use_corners = e.value("use_corners", x.use_corners);
      x.use_dense = e.value("use_dense", x.use_dense);
    }
    if (j.contains("translator")) {
      const auto& t = j["translator"];
      cfg.translator.kind = translator_kind_from_string(t.value("kind", std::string("identity")));
      if (t.contains("stats") && !t["stats"].is_null()) cfg.translator.stats = read_stats(t["stats"].get<std::string>());
      if (t.contains("dir") && !t["dir"].is_null()) cfg.translator.directory = t["dir"].get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  cfg.compare.validate();
  return cfg;
}

inline StrategyConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("file not found: " + path.string());
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("config: " + path.string() + ": " + e.what());
  }
}

inline nlohmann::json config_to_json(const StrategyConfig& cfg) {
  const auto& x = cfg.extraction;
  nlohmann::json t = {{"kind", to_string(cfg.translator.kind)}};
  if (!cfg.translator.directory.empty()) t["dir"] = cfg.translator.directory.string();
  return {{"merge", cfg.merged()},
          {"mining", cfg.mined()},
          {"seed", cfg.seed},
          {"overlay_fraction", cfg.overlay_fraction},
          {"min_box_side", cfg.min_box_side},
          {"compare",
           {{"radius", cfg.compare.radius},
            {"d_a", cfg.compare.d_a},
            {"d_b", cfg.compare.d_b},
            {"ratio_threshold", cfg.compare.ratio_threshold},
            {"loc_ceiling", cfg.compare.loc_ceiling}}},
          {"extraction",
           {{"scales", x.scales},
            {"harris_k", x.harris_k},
            {"threshold_rel", x.threshold_rel},
            {"nms_radius", x.nms_radius},
            {"differentiation_ratio", x.differentiation_ratio},
            {"stride", x.stride},
            {"dense_scale", x.dense_scale},
            {"descriptor_smoothing", x.descriptor_smoothing},
            {"use_corners", x.use_corners},
            {"use_dense", x.use_dense}}},
          {"translator", std::move(t)}};
}

// ---------------------------------------------------------------------------
// Per-pair detection

struct DetectionResult {
  std::string image_id;
  LocGrid loc_grid;
  std::optional<std::string> mined_id;
  std::vector<ScoredFeature> scored;
};

/// Scores query features against one reference set and pools them.
inline LocGrid compare_feature_sets(const FeatureSet& query, const FeatureSet& refs, const CompareParams& params,
                                    std::vector<ScoredFeature>* scored_out = nullptr) {
  const RefIndex index = build_index(refs);
  auto scored = score_image(query, index, params);
  LocGrid grid = pool_loc(scored, query.width, query.height);
  if (scored_out) *scored_out = std::move(scored);
  return grid;
}

/// Feature-level detection. With mining enabled the gallery entry nearest to
/// the query (NBNN) replaces the default virtual set.
inline DetectionResult detect_from_features(const FeatureSet& query, const FeatureSet& raw_ref,
                                            const FeatureSet& virtual_ref, const Gallery* gallery,
                                            const StrategyConfig& strategy, bool keep_scores = false) {
  DetectionResult result;
  result.image_id = query.image_id;
  const FeatureSet* virt = &virtual_ref;
  if (strategy.mined()) {
    if (!gallery || gallery->empty()) throw Error("detect: mining requested but the virtual gallery is empty");
    const std::size_t best = argmin_first(nbnn_distances(query, *gallery));
    result.mined_id = gallery->entries[best].first;
    virt = &gallery->entries[best].second;
  }
  const FeatureSet refs = merge_feature_sets(raw_ref, *virt, strategy.merge);
  result.loc_grid = compare_feature_sets(query, refs, strategy.compare, keep_scores ? &result.scored : nullptr);
  return result;
}

struct DetectionContext {
  std::string image_id;                 // query id, reported in the result
  std::string ref_id;                   // key for ExternalDir translation
  std::optional<Image> virtual_ref;     // precomputed virtual image, bypasses the translator
  const Gallery* gallery = nullptr;     // virtual gallery for mining
  bool keep_scores = false;
};

inline DetectionResult detect_changes(const Image& query, const Image& raw_ref, const DetectionContext& ctx,
                                      const StrategyConfig& strategy) {
  strategy.compare.validate();
  const Image q = resize_canonical(query);
  const Image r = resize_canonical(raw_ref);
  const Image v = ctx.virtual_ref ? resize_canonical(*ctx.virtual_ref) : translate(r, strategy.translator, ctx.ref_id);
  const FeatureSet qf = extract(q, strategy.extraction, Origin::Query, ctx.image_id);
  const FeatureSet rf = extract(r, strategy.extraction, Origin::RawRef, ctx.ref_id);
  const FeatureSet vf = extract(v, strategy.extraction, Origin::VirtualRef, ctx.ref_id);
  return detect_from_features(qf, rf, vf, ctx.gallery, strategy, ctx.keep_scores);
}

inline nlohmann::json detection_to_json(const DetectionResult& r, const StrategyConfig& strategy) {
  nlohmann::json top = nlohmann::json::array();
  for (const auto& c : top_fraction_cells(r.loc_grid, strategy.overlay_fraction)) top.push_back({c.col, c.row});
  double max_loc = 0.0;
  for (double v : r.loc_grid.values) max_loc = std::max(max_loc, v);
  return {{"image_id", r.image_id},
          {"grid_w", r.loc_grid.w},
          {"grid_h", r.loc_grid.h},
          {"mined_id", r.mined_id ? nlohmann::json(*r.mined_id) : nlohmann::json(nullptr)},
          {"strategy", strategy_label(strategy.merge, strategy.mining)},
          {"max_loc", max_loc},
          {"top_fraction", strategy.overlay_fraction},
          {"top_cells", std::move(top)},
          {"loc", r.loc_grid.values}};
}

// ---------------------------------------------------------------------------
// Datasets

struct PairEntry {
  std::string query_id;
  std::string ref_id;
  bool operator==(const PairEntry&) const = default;
};

/// Directory layout: query/<id>.png, ref/<id>.png, gt/<query_id>.gt.json,
/// optional virtual/<ref_id>.png and train/*.png, manifest.json listing the
/// pairs (or query_poses.csv + ref_poses.csv to pair by viewpoint).
struct DatasetManifest {
  fs::path root;
  std::vector<PairEntry> pairs;
  bool has_virtual = false;
  bool has_gt = false;
  bool has_poses = false;
  bool has_train = false;

  fs::path query_path(const std::string& id) const { return root / "query" / (id + ".png"); }
  fs::path ref_path(const std::string& id) const { return root / "ref" / (id + ".png"); }
  fs::path gt_path(const std::string& id) const { return root / "gt" / (id + ".gt.json"); }
  fs::path virtual_dir() const { return root / "virtual"; }
  fs::path train_dir() const { return root / "train"; }
};

inline std::vector<fs::path> list_pngs(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline DatasetManifest load_manifest(const fs::path& root) {
  DatasetManifest m;
  m.root = root;
  if (!fs::is_directory(root)) throw Error("dataset not found: " + root.string());
  m.has_poses = fs::exists(root / "query_poses.csv") && fs::exists(root / "ref_poses.csv");
  const fs::path manifest_file = root / "manifest.json";
  if (fs::exists(manifest_file)) {
    try {
      std::ifstream in(manifest_file);
      const auto j = nlohmann::json::parse(in);
      for (const auto& p : j.at("pairs")) m.pairs.push_back({p.at("query").get<std::string>(), p.at("ref").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error("manifest: " + manifest_file.string() + ": " + e.what());
    }
  } else if (m.has_poses) {
    for (auto& [q, r] : pair_by_viewpoint(read_poses_csv(root / "query_poses.csv"), read_poses_csv(root / "ref_poses.csv"))) {
      m.pairs.push_back({q, r});
    }
  } else {
    throw Error("dataset: " + root.string() + " has neither manifest.json nor pose files");
  }
  m.has_virtual = fs::is_directory(m.virtual_dir());
  m.has_gt = fs::is_directory(root / "gt");
  m.has_train = !list_pngs(m.train_dir()).empty();
  for (const auto& p : m.pairs) {
    if (!fs::exists(m.query_path(p.query_id))) throw Error("dataset: missing query image " + m.query_path(p.query_id).string());
    if (!fs::exists(m.ref_path(p.ref_id))) throw Error("dataset: missing reference image " + m.ref_path(p.ref_id).string());
  }
  return m;
}

inline void write_manifest(const DatasetManifest& m, std::uint64_t seed) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : m.pairs) pairs.push_back({{"query", p.query_id}, {"ref", p.ref_id}});
  write_text(m.root / "manifest.json", nlohmann::json{{"version", 1}, {"seed", seed}, {"pairs", std::move(pairs)}}.dump(2) + "\n");
}

inline std::string numbered_id(char prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%03d", prefix, i);
  return buf;
}

inline constexpr int kSynthTrainImages = 20;

/// Writes query/, ref/, gt/, train/, pose CSVs and manifest.json under out_dir.
inline DatasetManifest synth_dataset(std::uint64_t seed, int n_pairs, const fs::path& out_dir,
                                     const PhotometricShift& shift = {}) {
  if (n_pairs < 1) throw Error("synth: need at least one pair");
  std::error_code ec;
  for (const char* sub : {"query", "ref", "gt", "train"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw Error("synth: cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }
  SynthRng master(seed);
  std::vector<Pose> query_poses;
  std::vector<Pose> ref_poses;
  for (int i = 0; i < n_pairs; ++i) {
    SynthRng rng(master.next());
    const SynthPair pair = synth_pair(rng, shift);
    const std::string qid = numbered_id('q', i);
    const std::string rid = numbered_id('r', i);
    save_png(pair.query, out_dir / "query" / (qid + ".png"));
    save_png(pair.ref, out_dir / "ref" / (rid + ".png"));
    write_text(out_dir / "gt" / (qid + ".gt.json"), gt_to_json({qid, pair.boxes}).dump(2) + "\n");
    const double px = 5.0 * i + rng.uniform(-0.5, 0.5);
    const double py = rng.uniform(-0.5, 0.5);
    ref_poses.push_back({rid, px, py, static_cast<double>(i)});
    query_poses.push_back({qid, px + 0.3 * rng.normal(), py + 0.3 * rng.normal(), 1000.0 + i});
  }
  for (int i = 0; i < kSynthTrainImages; ++i) {
    SynthRng rng(master.next());
    save_png(apply_shift(render_scene(rng), shift, rng), out_dir / "train" / (numbered_id('t', i) + ".png"));
  }
  write_text(out_dir / "query_poses.csv", poses_to_csv(query_poses));
  write_text(out_dir / "ref_poses.csv", poses_to_csv(ref_poses));

  DatasetManifest m;
  m.root = out_dir;
  for (auto& [q, r] : pair_by_viewpoint(query_poses, ref_poses)) m.pairs.push_back({q, r});
  m.has_gt = true;
  m.has_poses = true;
  m.has_train = true;
  write_manifest(m, seed);
  return m;
}

// ---------------------------------------------------------------------------
// Benchmark

struct StrategyRun {
  MergeStrategy merge;
  MiningStrategy mining;
  EvalReport report;
  std::map<std::string, LocGrid> grids;  // by query id
  std::map<std::string, std::string> mined;
};

struct BenchmarkResult {
  std::vector<StrategyRun> runs;  // fixed order: see benchmark_strategies()
  double seconds_total = 0.0;
  std::vector<double> seconds_per_pair;  // extraction + 4 comparisons
};

inline std::vector<std::pair<MergeStrategy, MiningStrategy>> benchmark_strategies() {
  return {{MergeStrategy::WithoutMerge, MiningStrategy::WithoutMining},
          {MergeStrategy::WithMerge, MiningStrategy::WithoutMining},
          {MergeStrategy::WithoutMerge, MiningStrategy::WithMining},
          {MergeStrategy::WithMerge, MiningStrategy::WithMining}};
}

/// Fills in translator inputs the dataset can provide: pooled train/ stats
/// for histogram matching, virtual/ for the external translator.
inline TranslatorSpec resolve_translator(const DatasetManifest& m, TranslatorSpec spec) {
  if (spec.kind == TranslatorKind::HistogramMatch && !spec.stats) {
    if (!m.has_train) throw Error("bench: histogram matching needs stats (config translator.stats or train/ images)");
    std::vector<Image> train;
    for (const auto& p : list_pngs(m.train_dir())) train.push_back(load_image(p));
    spec.stats = fit_domain_stats(train);
  }
  if (spec.kind == TranslatorKind::ExternalDir && spec.directory.empty()) {
    if (!m.has_virtual) throw Error("bench: external translator needs virtual/ images");
    spec.directory = m.virtual_dir();
  }
  return spec;
}

inline BenchmarkResult run_benchmark(const DatasetManifest& manifest, const StrategyConfig& base) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  base.compare.validate();
  if (manifest.pairs.empty()) throw Error("bench: manifest has no pairs");
  const TranslatorSpec translator = resolve_translator(manifest, base.translator);

  struct Prepared {
    std::string query_id;
    std::string ref_id;
    FeatureSet query;
    std::optional<GtMask> gt;
  };
  std::vector<Prepared> pairs;
  std::map<std::string, FeatureSet> raw_refs;
  Gallery gallery;
  std::map<std::string, std::size_t> gallery_pos;
  BenchmarkResult result;

  for (const auto& p : manifest.pairs) {
    const auto tp = clock::now();
    Prepared prep{p.query_id, p.ref_id, {}, std::nullopt};
    const Image q = resize_canonical(load_image(manifest.query_path(p.query_id)));
    prep.query = extract(q, base.extraction, Origin::Query, p.query_id);
    if (!raw_refs.count(p.ref_id)) {
      const Image r = resize_canonical(load_image(manifest.ref_path(p.ref_id)));
      raw_refs.emplace(p.ref_id, extract(r, base.extraction, Origin::RawRef, p.ref_id));
      const Image v = translate(r, translator, p.ref_id);
      gallery_pos[p.ref_id] = gallery.size();
      gallery.add(p.ref_id, extract(v, base.extraction, Origin::VirtualRef, p.ref_id));
    }
    const auto gt_file = manifest.gt_path(p.query_id);
    if (!fs::exists(gt_file)) throw Error("bench: missing ground truth " + gt_file.string());
    const auto boxes = filter_small_changes(read_gt(gt_file).boxes, base.min_box_side);
    GtMask mask = rasterize_gt(boxes, kCanonicalSize, kCanonicalSize);
    if (mask.positives() > 0) prep.gt = std::move(mask);
    pairs.push_back(std::move(prep));
    result.seconds_per_pair.push_back(std::chrono::duration<double>(clock::now() - tp).count());
  }

  // NBNN distances are shared by both mining strategies.
  std::vector<std::size_t> mined(pairs.size());
  {
    std::vector<DescriptorMatrix> entries;
    entries.reserve(gallery.size());
    for (const auto& e : gallery.entries) entries.emplace_back(e.second);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto tp = clock::now();
      const DescriptorMatrix qm(pairs[i].query);
      std::vector<double> d;
      d.reserve(entries.size());
      for (const auto& em : entries) d.push_back(nbnn_distance(qm, em));
      mined[i] = argmin_first(d);
      result.seconds_per_pair[i] += std::chrono::duration<double>(clock::now() - tp).count();
    }
  }

  for (const auto& [merge, mining] : benchmark_strategies()) {
    StrategyRun run{merge, mining, {}, {}, {}};
    run.report.strategy = strategy_label(merge, mining);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto tp = clock::now();
      const auto& p = pairs[i];
      const FeatureSet& virt = mining == MiningStrategy::WithMining
                                   ? gallery.entries[mined[i]].second
                                   : gallery.entries[gallery_pos.at(p.ref_id)].second;
      if (mining == MiningStrategy::WithMining) run.mined[p.query_id] = gallery.entries[mined[i]].first;
      const FeatureSet refs = merge_feature_sets(raw_refs.at(p.ref_id), virt, merge);
      LocGrid grid = compare_feature_sets(p.query, refs, base.compare);
      if (p.gt) {
        run.report.images.push_back(evaluate_image(p.query_id, grid, *p.gt));
      } else if (merge == MergeStrategy::WithoutMerge && mining == MiningStrategy::WithoutMining) {
        std::cerr << "warning: " << p.query_id << " has no positive ground-truth cells; excluded from mAP\n";
      }
      if (!p.gt) run.report.skipped.push_back(p.query_id);
      run.grids.emplace(p.query_id, std::move(grid));
      result.seconds_per_pair[i] += std::chrono::duration<double>(clock::now() - tp).count();
    }
    finalize_report(run.report);
    result.runs.push_back(std::move(run));
  }
  result.seconds_total = std::chrono::duration<double>(clock::now() - t0).count();
  return result;
}

inline std::string summary_csv(const BenchmarkResult& r) {
  std::string out = "strategy,X,mAP\n";
  for (const auto& run : r.runs) {
    for (const auto& [x, v] : run.report.map_at) {
      out += strategy_key(run.merge, run.mining) + "," + std::to_string(x) + "," + format_double(100.0 * v) + "\n";
    }
  }
  return out;
}

/// Reports, summary, per-image grids and overlays under out_dir.
inline void write_benchmark(const BenchmarkResult& r, const DatasetManifest& manifest, const StrategyConfig& base,
                            const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("bench: cannot create " + out_dir.string());
  std::map<std::string, std::vector<GtBox>> gt_boxes;
  for (const auto& p : manifest.pairs) {
    gt_boxes[p.query_id] = filter_small_changes(read_gt(manifest.gt_path(p.query_id)).boxes, base.min_box_side);
  }
  for (const auto& run : r.runs) {
    const std::string key = strategy_key(run.merge, run.mining);
    auto j = report_to_json(run.report);
    j["key"] = key;
    if (!run.mined.empty()) j["mined"] = run.mined;
    write_text(out_dir / ("report_" + key + ".json"), j.dump(2) + "\n");
    const fs::path grid_dir = out_dir / "grids" / key;
    const fs::path overlay_dir = out_dir / "overlays" / key;
    fs::create_directories(grid_dir);
    fs::create_directories(overlay_dir);
    for (const auto& [qid, grid] : run.grids) {
      write_text(grid_dir / (qid + ".csv"), grid_to_csv(grid));
      const Image query = load_image(manifest.query_path(qid));
      save_png(render_overlay(query, grid, gt_boxes.at(qid), base.overlay_fraction), overlay_dir / (qid + ".png"));
    }
  }
  write_text(out_dir / "summary.csv", summary_csv(r));
}

}  // namespace dacd
