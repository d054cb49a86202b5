#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "pmag/attention_map.hpp"
#include "pmag/grid.hpp"

namespace pmag {

struct RefinementConfig {
  std::size_t start_layer = 12;
  double beta = 0.3;
  std::size_t max_iters = 8;

  /// Throws ValidationError when beta is negative or non-finite, or max_iters is 0.
  void validate() const;
};

/// Stand-in for re-forwarding the model under a token mask.
///
/// Implementations must return stacks of the same shape on every call and
/// must zero non-attendable tokens.
class AttentionProvider {
 public:
  virtual ~AttentionProvider() = default;

  virtual StackShape shape() const = 0;
  /// Attention for refinement pass `iteration` under `mask`.
  virtual AttnStack attend(const TokenMask& mask, std::size_t iteration) = 0;
};

enum class StopReason { BelowThreshold, NoDominantTokens, IterationCap };

std::string_view to_string(StopReason reason);

struct RefinementStep {
  std::size_t iteration = 0;
  TokenMask mask;
  TokenHeatmap heatmap;
  double total_mass = 0.0;
  std::vector<TokenCoord> selected;
  bool terminal = false;
};

struct RefinementTrace {
  std::vector<RefinementStep> steps;
  StopReason reason = StopReason::IterationCap;
  /// Count-normalized accumulation.
  TokenHeatmap aggregate;
  CountMask counts;
};

/// Iterative mask-and-re-attend loop. Each pass aggregates the provider's
/// stack, accumulates it, picks the dominant token group, and masks it out
/// for the next pass. Stops when the pass mass drops below beta, when no
/// dominant group exists, or after max_iters passes. The returned trace's
/// `aggregate` is the accumulated heatmap divided by the visit counts.
RefinementTrace refine(AttentionProvider& provider, const RefinementConfig& cfg);

/// Replays pre-dumped stacks: pass i yields dumps[min(i, n-1)] with the mask
/// applied.
std::unique_ptr<AttentionProvider> make_replay_provider(std::vector<AttnStack> dumps);

struct Blob {
  double center_row = 0.0;
  double center_col = 0.0;
  double sigma = 1.0;
  double weight = 1.0;
};

struct SyntheticSpec {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::vector<Blob> blobs;
  double leak = 0.0;
  /// The blob mixture occupies the last layer; earlier layers are zero so
  /// any start layer below num_layers sees the same heatmap.
  std::size_t num_layers = 1;

  void validate() const;
};

/// Closed-form blob mixture. Each blob is a sampled isotropic Gaussian
/// normalized so that it sums to its weight over the full grid. A blob
/// contributes only while the token nearest its center is attendable. When
/// no blob contributes, `leak` is spread uniformly over attendable tokens.
std::unique_ptr<AttentionProvider> make_synthetic_provider(SyntheticSpec spec);

}  // namespace pmag
