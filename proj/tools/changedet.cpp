// changedet: command-line front end for the domain-adaptive change detector.
//
//   changedet synth  --seed N --pairs N --out DIR
//   changedet detect --query PNG --ref PNG [--virtual PNG|--virtual-dir DIR]
//                    [--mine] [--no-merge] [--config FILE] --out DIR
//   changedet bench  --dataset DIR [--config FILE] --out DIR
//   changedet pair   --src-poses CSV --dst-poses CSV --out CSV
//   changedet stats  --images GLOB --out JSON

#include <glob.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dacd/dacd.hpp"

namespace fs = std::filesystem;
using namespace dacd;

namespace {

std::vector<fs::path> expand_glob(const std::string& pattern) {
  glob_t g{};
  std::vector<fs::path> out;
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  globfree(&g);
  std::sort(out.begin(), out.end());
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
}

int cmd_synth(std::uint64_t seed, int pairs, const fs::path& out) {
  const auto m = synth_dataset(seed, pairs, out);
  std::cout << "wrote " << m.pairs.size() << " pairs to " << out.string() << "\n";
  return 0;
}

struct DetectArgs {
  fs::path query;
  fs::path ref;
  std::string virtual_png;
  std::string virtual_dir;
  bool mine = false;
  bool no_merge = false;
  std::string config;
  std::string gt;
  std::optional<double> tau;
  bool dump_scores = false;
  fs::path out;
};

int cmd_detect(const DetectArgs& a) {
  StrategyConfig cfg = a.config.empty() ? StrategyConfig{} : load_config(a.config);
  if (a.no_merge) cfg.merge = MergeStrategy::WithoutMerge;
  if (a.mine) cfg.mining = MiningStrategy::WithMining;

  const Image query = load_image(a.query);
  const Image ref = load_image(a.ref);
  DetectionContext ctx;
  ctx.image_id = a.query.stem().string();
  ctx.ref_id = a.ref.stem().string();
  ctx.keep_scores = a.dump_scores;

  Gallery gallery;
  if (!a.virtual_png.empty()) {
    ctx.virtual_ref = load_image(a.virtual_png);
    if (cfg.mined()) {
      gallery.add(fs::path(a.virtual_png).stem().string(),
                  extract(*ctx.virtual_ref, cfg.extraction, Origin::VirtualRef, fs::path(a.virtual_png).stem().string()));
    }
  } else if (!a.virtual_dir.empty()) {
    const auto own = fs::path(a.virtual_dir) / (ctx.ref_id + ".png");
    if (fs::exists(own)) {
      ctx.virtual_ref = load_image(own);
    } else if (!cfg.mined()) {
      throw Error("translate: missing virtual image: " + own.string());
    }
    if (cfg.mined()) {
      for (const auto& p : list_pngs(a.virtual_dir)) {
        gallery.add(p.stem().string(), extract(load_image(p), cfg.extraction, Origin::VirtualRef, p.stem().string()));
      }
    }
    if (!ctx.virtual_ref) {
      // Mining picks the virtual set; the default slot only needs matching dimensions.
      ctx.virtual_ref = load_image(list_pngs(a.virtual_dir).at(0));
    }
  } else if (cfg.mined()) {
    const Image v = translate(resize_canonical(ref), cfg.translator, ctx.ref_id);
    gallery.add(ctx.ref_id, extract(v, cfg.extraction, Origin::VirtualRef, ctx.ref_id));
    ctx.virtual_ref = v;
  }
  if (cfg.mined()) ctx.gallery = &gallery;

  const DetectionResult result = detect_changes(query, ref, ctx, cfg);

  std::vector<GtBox> boxes;
  if (!a.gt.empty()) boxes = filter_small_changes(read_gt(a.gt).boxes, cfg.min_box_side);

  ensure_dir(a.out);
  write_text(a.out / "grid.csv", grid_to_csv(result.loc_grid));
  const ChangeMask mask = a.tau ? threshold_mask(result.loc_grid, *a.tau)
                                : cells_to_mask(top_fraction_cells(result.loc_grid, cfg.overlay_fraction),
                                                result.loc_grid.w, result.loc_grid.h);
  save_png(mask_to_image(mask), a.out / "mask.png");
  save_png(render_overlay(query, result.loc_grid, boxes, cfg.overlay_fraction), a.out / "overlay.png");
  auto j = detection_to_json(result, cfg);
  if (a.tau) j["mask_tau"] = *a.tau;
  write_text(a.out / "result.json", j.dump(2) + "\n");
  if (a.dump_scores) write_text(a.out / "scores.json", scores_to_json(result.scored).dump(2) + "\n");
  std::cout << "wrote " << (a.out / "result.json").string() << "\n";
  return 0;
}

int cmd_bench(const fs::path& dataset, const std::string& config, const fs::path& out) {
  const DatasetManifest m = load_manifest(dataset);
  StrategyConfig cfg;
  if (!config.empty()) {
    cfg = load_config(config);
  } else if (m.has_virtual) {
    cfg.translator.kind = TranslatorKind::ExternalDir;
  } else if (m.has_train) {
    cfg.translator.kind = TranslatorKind::HistogramMatch;
  }
  const BenchmarkResult r = run_benchmark(m, cfg);
  write_benchmark(r, m, cfg, out);
  write_text(out / "config.json", config_to_json(cfg).dump(2) + "\n");
  std::cout << "translator: " << to_string(cfg.translator.kind) << ", pairs: " << m.pairs.size() << "\n";
  std::cout << "strategy                 mAP@10   mAP@20   mAP@50  mAP@100\n";
  for (const auto& run : r.runs) {
    std::printf("%-24s", run.report.strategy.c_str());
    for (const auto& [x, v] : run.report.map_at) std::printf(" %7.2f%%", 100.0 * v);
    std::printf("\n");
  }
  auto times = r.seconds_per_pair;
  std::sort(times.begin(), times.end());
  std::printf("median per-pair time: %.3f s (total %.1f s)\n", times[times.size() / 2], r.seconds_total);
  return 0;
}

int cmd_pair(const fs::path& src, const fs::path& dst, const fs::path& out) {
  const auto pairs = pair_by_viewpoint(read_poses_csv(src), read_poses_csv(dst));
  write_text(out, pairs_to_csv(pairs));
  std::cout << "wrote " << pairs.size() << " pairs to " << out.string() << "\n";
  return 0;
}

int cmd_stats(const std::string& pattern, const fs::path& out) {
  const auto paths = expand_glob(pattern);
  if (paths.empty()) throw Error("stats: no images match " + pattern);
  std::vector<Image> images;
  for (const auto& p : paths) images.push_back(load_image(p));
  write_stats(fit_domain_stats(images), out);
  std::cout << "fitted stats from " << images.size() << " images\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-adaptive change detection"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int pairs = 0;
  fs::path synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic cross-domain dataset");
  synth->add_option("--seed", seed)->required();
  synth->add_option("--pairs", pairs)->required()->check(CLI::PositiveNumber);
  synth->add_option("--out", synth_out)->required();

  DetectArgs da;
  auto* detect = app.add_subcommand("detect", "Detect changes between a query and a reference image");
  detect->add_option("--query", da.query)->required()->check(CLI::ExistingFile);
  detect->add_option("--ref", da.ref)->required()->check(CLI::ExistingFile);
  auto* vpng = detect->add_option("--virtual", da.virtual_png, "Precomputed virtual reference PNG");
  auto* vdir = detect->add_option("--virtual-dir", da.virtual_dir, "Directory of virtual PNGs (<id>.png)");
  vpng->excludes(vdir);
  detect->add_flag("--mine", da.mine, "Select the virtual reference by NBNN background mining");
  detect->add_flag("--no-merge", da.no_merge, "Use virtual features alone");
  detect->add_option("--config", da.config);
  detect->add_option("--gt", da.gt, "Ground-truth .gt.json for overlay markers");
  detect->add_option("--tau", da.tau, "Mask threshold (default: top overlay_fraction cells)");
  detect->add_flag("--dump-scores", da.dump_scores, "Write per-feature scores to scores.json");
  detect->add_option("--out", da.out)->required();

  fs::path dataset, bench_out;
  std::string bench_config;
  auto* bench = app.add_subcommand("bench", "Run the four-strategy benchmark on a dataset");
  bench->add_option("--dataset", dataset)->required();
  bench->add_option("--config", bench_config);
  bench->add_option("--out", bench_out)->required();

  fs::path src_poses, dst_poses, pair_out;
  auto* pair = app.add_subcommand("pair", "Pair images by nearest viewpoint");
  pair->add_option("--src-poses", src_poses)->required();
  pair->add_option("--dst-poses", dst_poses)->required();
  pair->add_option("--out", pair_out)->required();

  std::string pattern;
  fs::path stats_out;
  auto* stats = app.add_subcommand("stats", "Fit per-channel domain statistics");
  stats->add_option("--images", pattern)->required();
  stats->add_option("--out", stats_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(seed, pairs, synth_out);
    if (*detect) return cmd_detect(da);
    if (*bench) return cmd_bench(dataset, bench_config, bench_out);
    if (*pair) return cmd_pair(src_poses, dst_poses, pair_out);
    if (*stats) return cmd_stats(pattern, stats_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
