#include "pmag/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include "pmag/errors.hpp"

namespace pmag {

void RefinementConfig::validate() const {
  if (!std::isfinite(beta) || beta < 0.0) throw ValidationError("beta must be finite and >= 0");
  if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::BelowThreshold:
      return "below-threshold";
    case StopReason::NoDominantTokens:
      return "no-dominant-tokens";
    case StopReason::IterationCap:
      return "iteration-cap";
  }
  return "unknown";
}

RefinementTrace refine(AttentionProvider& provider, const RefinementConfig& cfg) {
  cfg.validate();
  const StackShape shape = provider.shape();
  if (shape.elements() == 0) throw ValidationError("provider reports an empty attention shape");
  if (cfg.start_layer >= shape.layers) {
    throw RangeError("start layer " + std::to_string(cfg.start_layer) + " out of range for " +
                     std::to_string(shape.layers) + " layers");
  }

  const std::size_t gh = shape.grid_h;
  const std::size_t gw = shape.grid_w;
  RefinementTrace trace;
  TokenMask mask = TokenMask::all(gh, gw);
  Grid2<double> sum(gh, gw, 0.0);
  trace.counts = CountMask(gh, gw, 0u);

  for (std::size_t i = 0; i < cfg.max_iters; ++i) {
    AttnStack attn;
    try {
      attn = provider.attend(mask, i);
    } catch (const std::exception& e) {
      throw ProviderError(i, e.what());
    }
    if (attn.shape() != shape) {
      throw ValidationError("provider changed attention shape at iteration " + std::to_string(i));
    }

    RefinementStep step;
    step.iteration = i;
    step.mask = mask;
    step.heatmap = aggregate_heatmap(attn, cfg.start_layer);

    auto acc = sum.values();
    auto cnt = trace.counts.values();
    const auto h = step.heatmap.values();
    const auto m = mask.values();
    for (std::size_t t = 0; t < acc.size(); ++t) {
      acc[t] += h[t];
      cnt[t] += m[t] != 0 ? 1u : 0u;
    }
    step.total_mass = std::accumulate(h.begin(), h.end(), 0.0);
    if (mask.count_attendable() > 0) step.selected = cluster_high_group(step.heatmap, mask);

    const bool below = step.total_mass < cfg.beta;
    if (below || step.selected.empty()) {
      trace.reason = below ? StopReason::BelowThreshold : StopReason::NoDominantTokens;
      step.terminal = true;
      trace.steps.push_back(std::move(step));
      break;
    }
    for (const auto& t : step.selected) mask(t.row, t.col) = 0;
    if (i + 1 == cfg.max_iters) {
      trace.reason = StopReason::IterationCap;
      step.terminal = true;
    }
    trace.steps.push_back(std::move(step));
  }

  trace.aggregate = TokenHeatmap(gh, gw, 0.0);
  auto out = trace.aggregate.values();
  const auto acc = sum.values();
  const auto cnt = trace.counts.values();
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = acc[t] / static_cast<double>(cnt[t]);
  return trace;
}

namespace {

class ReplayProvider final : public AttentionProvider {
 public:
  explicit ReplayProvider(std::vector<AttnStack> dumps) : dumps_(std::move(dumps)) {
    if (dumps_.empty()) throw ValidationError("replay provider needs at least one stack");
    for (const auto& d : dumps_) {
      if (d.shape() != dumps_.front().shape()) {
        throw ValidationError("replay stacks have inconsistent shapes");
      }
    }
  }

  StackShape shape() const override { return dumps_.front().shape(); }

  AttnStack attend(const TokenMask& mask, std::size_t iteration) override {
    return apply_mask(dumps_[std::min(iteration, dumps_.size() - 1)], mask);
  }

 private:
  std::vector<AttnStack> dumps_;
};

class SyntheticProvider final : public AttentionProvider {
 public:
  explicit SyntheticProvider(SyntheticSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    const std::size_t gh = spec_.grid_h;
    const std::size_t gw = spec_.grid_w;
    for (const auto& b : spec_.blobs) {
      Grid2<double> bump(gh, gw, 0.0);
      double total = 0.0;
      for (std::size_t r = 0; r < gh; ++r) {
        for (std::size_t c = 0; c < gw; ++c) {
          const double dy = static_cast<double>(r) - b.center_row;
          const double dx = static_cast<double>(c) - b.center_col;
          const double g = std::exp(-(dy * dy + dx * dx) / (2.0 * b.sigma * b.sigma));
          bump(r, c) = g;
          total += g;
        }
      }
      for (double& v : bump.values()) v = b.weight * v / total;
      bumps_.push_back(std::move(bump));
      centers_.push_back({nearest(b.center_row, gh), nearest(b.center_col, gw)});
    }
  }

  StackShape shape() const override { return {spec_.num_layers, 1, spec_.grid_h, spec_.grid_w}; }

  AttnStack attend(const TokenMask& mask, std::size_t) override {
    if (!mask.same_shape(spec_.grid_h, spec_.grid_w)) {
      throw ValidationError("mask shape does not match synthetic grid");
    }
    Grid2<double> mix(spec_.grid_h, spec_.grid_w, 0.0);
    bool any = false;
    for (std::size_t b = 0; b < bumps_.size(); ++b) {
      if (!mask.attendable(centers_[b].row, centers_[b].col)) continue;
      any = true;
      auto dst = mix.values();
      const auto src = bumps_[b].values();
      for (std::size_t t = 0; t < dst.size(); ++t) dst[t] += src[t];
    }
    const auto m = mask.values();
    if (!any) {
      const std::size_t n = mask.count_attendable();
      if (n > 0) {
        const double share = spec_.leak / static_cast<double>(n);
        auto dst = mix.values();
        for (std::size_t t = 0; t < dst.size(); ++t) dst[t] = share;
      }
    }

    AttnStack out(shape());
    const std::size_t last = spec_.num_layers - 1;
    for (std::size_t r = 0; r < spec_.grid_h; ++r) {
      for (std::size_t c = 0; c < spec_.grid_w; ++c) {
        if (m[r * spec_.grid_w + c] != 0) out.at(last, 0, r, c) = static_cast<float>(mix(r, c));
      }
    }
    return out;
  }

 private:
  static std::size_t nearest(double coord, std::size_t extent) {
    const double r = std::floor(coord + 0.5);
    return static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(extent - 1)));
  }

  SyntheticSpec spec_;
  std::vector<Grid2<double>> bumps_;
  std::vector<TokenCoord> centers_;
};

}  // namespace

void SyntheticSpec::validate() const {
  if (grid_h == 0 || grid_w == 0) throw ValidationError("synthetic grid must be at least 1x1");
  if (num_layers == 0) throw ValidationError("synthetic num_layers must be >= 1");
  if (blobs.empty()) throw ValidationError("synthetic provider needs at least one blob");
  if (!(leak >= 0.0 && leak < 1.0)) throw ValidationError("leak must lie in [0, 1)");
  for (const auto& b : blobs) {
    if (!std::isfinite(b.center_row) || !std::isfinite(b.center_col)) {
      throw ValidationError("blob center must be finite");
    }
    if (!(b.sigma > 0.0) || !std::isfinite(b.sigma)) throw ValidationError("blob width must be > 0");
    if (!(b.weight > 0.0) || !std::isfinite(b.weight)) {
      throw ValidationError("blob weight must be > 0");
    }
  }
}

std::unique_ptr<AttentionProvider> make_replay_provider(std::vector<AttnStack> dumps) {
  return std::make_unique<ReplayProvider>(std::move(dumps));
}

std::unique_ptr<AttentionProvider> make_synthetic_provider(SyntheticSpec spec) {
  return std::make_unique<SyntheticProvider>(std::move(spec));
}

}  // namespace pmag
