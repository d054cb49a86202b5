#include "pmag/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <limits>
#include <memory>
#include <optional>

#include "pmag/errors.hpp"
#include "pmag/io_formats.hpp"
#include "pmag/magnifier.hpp"
#include "pmag/postprocess.hpp"
#include "pmag/refinement.hpp"

namespace pmag::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kDefaultBlend = 0.5;

struct ProviderSource {
  std::string manifest;
  std::string synthetic;
};

struct RefineOptions {
  ProviderSource source;
  RefinementConfig cfg;
};

struct PostOptions {
  double alpha = 10.0;
  std::size_t kernel = 3;
};

void add_provider_flags(CLI::App* cmd, ProviderSource& src) {
  auto* m = cmd->add_option("--manifest", src.manifest, "Replay manifest (JSON) listing attention dumps");
  auto* s = cmd->add_option("--synthetic", src.synthetic, "Synthetic blob provider spec (JSON)");
  m->excludes(s);
}

void add_refine_flags(CLI::App* cmd, RefinementConfig& cfg) {
  cmd->add_option("--layer-start", cfg.start_layer, "First aggregated layer (0-based)")
      ->capture_default_str();
  cmd->add_option("--beta", cfg.beta, "Attention-mass termination threshold")->capture_default_str();
  cmd->add_option("--max-iters", cfg.max_iters, "Maximum refinement passes")->capture_default_str();
}

void add_post_flags(CLI::App* cmd, PostOptions& post) {
  cmd->add_option("--alpha", post.alpha, "Variance scaling coefficient")->capture_default_str();
  cmd->add_option("--kernel", post.kernel, "Uniform smoothing kernel size (odd)")->capture_default_str();
}

std::unique_ptr<AttentionProvider> open_provider(const ProviderSource& src, std::string& kind) {
  if (!src.manifest.empty()) {
    kind = "replay";
    return make_replay_provider(load_manifest_stacks(src.manifest));
  }
  if (!src.synthetic.empty()) {
    kind = "synthetic";
    return make_synthetic_provider(read_synthetic_spec(src.synthetic));
  }
  throw ValidationError("one of --manifest or --synthetic is required");
}

// Everything crossing a file boundary is stored as float32; in-process
// compositions round the same way so they match the file-level commands.
Grid2<double> round_to_f32(const Grid2<double>& g) { return grid_from_npy(to_npy(g)); }

nlohmann::ordered_json trace_json(const RefinementTrace& trace, const RefinementConfig& cfg,
                                  const std::string& provider_kind,
                                  const std::optional<PostOptions>& post) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json config;
  config["start_layer"] = cfg.start_layer;
  config["beta"] = cfg.beta;
  config["max_iters"] = cfg.max_iters;
  if (post) {
    config["alpha"] = post->alpha;
    config["kernel"] = post->kernel;
  }
  j["config"] = config;
  j["provider"] = provider_kind;
  j["grid_h"] = trace.aggregate.rows();
  j["grid_w"] = trace.aggregate.cols();
  j["iterations"] = trace.steps.size();
  j["termination_reason"] = std::string(to_string(trace.reason));
  auto steps = nlohmann::ordered_json::array();
  for (const auto& s : trace.steps) {
    nlohmann::ordered_json e;
    e["iteration"] = s.iteration;
    e["total_mass"] = s.total_mass;
    e["attendable_tokens"] = s.mask.count_attendable();
    e["selected_tokens"] = s.selected.size();
    e["terminal"] = s.terminal;
    steps.push_back(std::move(e));
  }
  j["steps"] = std::move(steps);
  std::uint32_t min_count = std::numeric_limits<std::uint32_t>::max();
  for (auto c : trace.counts.values()) min_count = std::min(min_count, c);
  j["min_visit_count"] = min_count;
  return j;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Grid2<double> unit_range(const Grid2<double>& map) {
  for (double v : map.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      return normalize_unit(TokenHeatmap(map.rows(), map.cols(), map.storage()));
    }
  }
  return map;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

}  // namespace

int run_guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return kOk;
  } catch (const ProviderError& e) {
    err << "pmag: provider error: " << e.what() << '\n';
    return kProviderError;
  } catch (const ValidationError& e) {
    err << "pmag: validation error: " << e.what() << '\n';
    return kValidationError;
  } catch (const FormatError& e) {
    err << "pmag: format error: " << e.what() << '\n';
    return kFormatError;
  } catch (const fs::filesystem_error& e) {
    err << "pmag: format error: " << e.what() << '\n';
    return kFormatError;
  } catch (const std::exception& e) {
    err << "pmag: internal error: " << e.what() << '\n';
    return kInternal;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Perception-guided image magnification from layered attention"};
  app.require_subcommand(1);

  // heatmap
  std::string hm_in, hm_out;
  std::size_t hm_layer = RefinementConfig{}.start_layer;
  auto* heatmap = app.add_subcommand("heatmap", "Aggregate an attention stack into a token heatmap");
  heatmap->add_option("attn", hm_in, "Attention stack (.npy, [layers, heads, h, w])")->required();
  heatmap->add_option("--layer-start", hm_layer, "First aggregated layer (0-based)")->capture_default_str();
  heatmap->add_option("--out", hm_out, "Output heatmap (.npy)")->required();

  // refine
  RefineOptions rf;
  std::string rf_out, rf_trace;
  auto* refine_cmd = app.add_subcommand("refine", "Iteratively refine a heatmap by masking dominant tokens");
  add_provider_flags(refine_cmd, rf.source);
  add_refine_flags(refine_cmd, rf.cfg);
  refine_cmd->add_option("--out", rf_out, "Output refined heatmap (.npy)")->required();
  refine_cmd->add_option("--trace", rf_trace, "Output trace (.json)");

  // postprocess
  std::string pp_in, pp_out;
  PostOptions pp;
  std::size_t pp_w = 0, pp_h = 0;
  auto* post_cmd = app.add_subcommand("postprocess", "Turn a token heatmap into a pixel perception map");
  post_cmd->add_option("heat", pp_in, "Token heatmap (.npy)")->required();
  add_post_flags(post_cmd, pp);
  post_cmd->add_option("--width", pp_w, "Perception map width in pixels")->required();
  post_cmd->add_option("--height", pp_h, "Perception map height in pixels")->required();
  post_cmd->add_option("--out", pp_out, "Output perception map (.npy)")->required();

  // magnify
  std::string mg_img, mg_map, mg_out;
  std::size_t mg_w = 0, mg_h = 0;
  auto* mag_cmd = app.add_subcommand("magnify", "Warp an image so attended regions are enlarged");
  mag_cmd->add_option("image", mg_img, "Input image (.png)")->required();
  mag_cmd->add_option("pmap", mg_map, "Perception map (.npy) at image resolution")->required();
  mag_cmd->add_option("--out", mg_out, "Output image (.png)")->required();
  mag_cmd->add_option("--out-width", mg_w, "Output width (default: input width)");
  mag_cmd->add_option("--out-height", mg_h, "Output height (default: input height)");

  // render
  std::string rd_in, rd_overlay, rd_out;
  double rd_blend = kDefaultBlend;
  auto* render_cmd = app.add_subcommand("render", "Colormap a heatmap or perception map");
  render_cmd->add_option("map", rd_in, "Heatmap or perception map (.npy)")->required();
  render_cmd->add_option("--overlay", rd_overlay, "Image to blend under the colormap (.png)");
  render_cmd->add_option("--blend", rd_blend, "Colormap opacity in [0, 1]")->capture_default_str();
  render_cmd->add_option("--out", rd_out, "Output image (.png)")->required();

  // pipeline
  std::string pl_img, pl_dir;
  RefineOptions pl;
  PostOptions pl_post;
  std::size_t pl_w = 0, pl_h = 0;
  double pl_blend = kDefaultBlend;
  auto* pipe_cmd = app.add_subcommand("pipeline", "refine -> postprocess -> magnify -> render");
  pipe_cmd->add_option("image", pl_img, "Input image (.png)")->required();
  add_provider_flags(pipe_cmd, pl.source);
  add_refine_flags(pipe_cmd, pl.cfg);
  add_post_flags(pipe_cmd, pl_post);
  pipe_cmd->add_option("--out-width", pl_w, "Magnified width (default: input width)");
  pipe_cmd->add_option("--out-height", pl_h, "Magnified height (default: input height)");
  pipe_cmd->add_option("--blend", pl_blend, "Colormap opacity for viz.png")->capture_default_str();
  pipe_cmd->add_option("--out-dir", pl_dir, "Directory for all artifacts")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "pmag: " << e.what() << '\n';
    return kValidationError;
  }

  if (heatmap->parsed()) {
    return run_guarded([&] {
      const AttnStack attn = stack_from_npy(read_npy(hm_in));
      ensure_parent(hm_out);
      write_npy(hm_out, to_npy(aggregate_heatmap(attn, hm_layer)));
    }, err);
  }

  if (refine_cmd->parsed()) {
    return run_guarded([&] {
      rf.cfg.validate();
      std::string kind;
      auto provider = open_provider(rf.source, kind);
      const RefinementTrace trace = refine(*provider, rf.cfg);
      ensure_parent(rf_out);
      write_npy(rf_out, to_npy(trace.aggregate));
      if (!rf_trace.empty()) {
        ensure_parent(rf_trace);
        write_json(rf_trace, trace_json(trace, rf.cfg, kind, std::nullopt));
      }
    }, err);
  }

  if (post_cmd->parsed()) {
    return run_guarded([&] {
      const PostprocessConfig cfg{pp.alpha, pp.kernel, pp_h, pp_w};
      cfg.validate();
      const Grid2<double> g = grid_from_npy(read_npy(pp_in));
      const PerceptionMap pmap = postprocess_pipeline(TokenHeatmap(g.rows(), g.cols(), g.storage()), cfg);
      ensure_parent(pp_out);
      write_npy(pp_out, to_npy(pmap));
    }, err);
  }

  if (mag_cmd->parsed()) {
    return run_guarded([&] {
      const ImageBuffer image = read_image(mg_img);
      const Grid2<double> g = grid_from_npy(read_npy(mg_map));
      const PerceptionMap pmap(g.rows(), g.cols(), g.storage());
      const std::size_t oh = mg_h ? mg_h : image.height();
      const std::size_t ow = mg_w ? mg_w : image.width();
      ensure_parent(mg_out);
      write_image(mg_out, magnify(image, pmap, oh, ow));
    }, err);
  }

  if (render_cmd->parsed()) {
    return run_guarded([&] {
      const Grid2<double> map = unit_range(grid_from_npy(read_npy(rd_in)));
      ImageBuffer viz = rd_overlay.empty() ? render_heat(map)
                                           : render_heat(map, read_image(rd_overlay), rd_blend);
      ensure_parent(rd_out);
      write_image(rd_out, viz);
    }, err);
  }

  if (pipe_cmd->parsed()) {
    return run_guarded([&] {
      pl.cfg.validate();
      const ImageBuffer image = read_image(pl_img);
      const PostprocessConfig post_cfg{pl_post.alpha, pl_post.kernel, image.height(), image.width()};
      post_cfg.validate();
      std::string kind;
      auto provider = open_provider(pl.source, kind);

      const fs::path dir(pl_dir);
      fs::create_directories(dir);

      const RefinementTrace trace = refine(*provider, pl.cfg);
      write_npy(dir / "hstar.npy", to_npy(trace.aggregate));
      write_json(dir / "trace.json", trace_json(trace, pl.cfg, kind, pl_post));

      const Grid2<double> hstar = round_to_f32(trace.aggregate);
      const PerceptionMap pmap_raw =
          postprocess_pipeline(TokenHeatmap(hstar.rows(), hstar.cols(), hstar.storage()), post_cfg);
      write_npy(dir / "pmap.npy", to_npy(pmap_raw));

      const Grid2<double> pmap_f = round_to_f32(pmap_raw);
      const PerceptionMap pmap(pmap_f.rows(), pmap_f.cols(), pmap_f.storage());
      const std::size_t oh = pl_h ? pl_h : image.height();
      const std::size_t ow = pl_w ? pl_w : image.width();
      write_image(dir / "magnified.png", magnify(image, pmap, oh, ow));
      write_image(dir / "viz.png", render_heat(pmap, image, pl_blend));
    }, err);
  }

  return kValidationError;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("pmag");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace pmag::cli
