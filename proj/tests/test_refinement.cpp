#include <doctest.h>

#include <numeric>
#include <random>
#include <stdexcept>

#include "oracles.hpp"
#include "pmag/errors.hpp"
#include "pmag/refinement.hpp"

using namespace pmag;

namespace {

SyntheticSpec two_blob_spec(std::size_t layers = 32) {
  SyntheticSpec s;
  s.grid_h = s.grid_w = 24;
  s.num_layers = layers;
  s.leak = 0.1;
  s.blobs = {{6, 6, 1.5, 1.0}, {17, 17, 2.5, 0.5}};
  return s;
}

double total(const AttnStack& a) {
  return std::accumulate(a.values().begin(), a.values().end(), 0.0);
}

AttnStack constant_stack(StackShape s, float v) {
  return AttnStack(s, std::vector<float>(s.elements(), v));
}

class ThrowingProvider final : public AttentionProvider {
 public:
  explicit ThrowingProvider(std::size_t fail_at) : fail_at_(fail_at) {}
  StackShape shape() const override { return {1, 1, 2, 2}; }
  AttnStack attend(const TokenMask& mask, std::size_t i) override {
    if (i == fail_at_) throw std::runtime_error("model crashed");
    AttnStack a({1, 1, 2, 2}, {0.9f, 0.1f, 0.1f, 0.1f});
    return apply_mask(a, mask);
  }

 private:
  std::size_t fail_at_;
};

class DriftingProvider final : public AttentionProvider {
 public:
  StackShape shape() const override { return {1, 1, 2, 2}; }
  AttnStack attend(const TokenMask&, std::size_t i) override {
    if (i == 0) return AttnStack({1, 1, 2, 2}, {0.9f, 0.1f, 0.1f, 0.1f});
    return AttnStack({1, 1, 3, 2});
  }
};

}  // namespace

TEST_CASE("RefinementConfig defaults") {
  const RefinementConfig cfg;
  CHECK(cfg.start_layer == 12);
  CHECK(cfg.beta == 0.3);
  CHECK(cfg.max_iters == 8);
  CHECK_THROWS_AS((RefinementConfig{0, -0.1, 8}.validate()), ValidationError);
  CHECK_THROWS_AS((RefinementConfig{0, 0.3, 0}.validate()), ValidationError);
}

TEST_CASE("refine stops immediately when the first pass is below beta") {
  AttnStack a({1, 1, 2, 2}, {0.01f, 0.02f, 0.03f, 0.04f});
  auto p = make_replay_provider({a});
  const auto trace = refine(*p, {0, 0.3, 8});
  REQUIRE(trace.steps.size() == 1);
  CHECK(trace.reason == StopReason::BelowThreshold);
  CHECK(trace.steps[0].terminal);
  CHECK(trace.aggregate == trace.steps[0].heatmap);
  for (auto c : trace.counts.values()) CHECK(c == 1);
}

TEST_CASE("refine with max_iters 1 returns the first heatmap") {
  std::mt19937_64 rng(5);
  auto p = make_replay_provider({oracle::random_stack(rng, {3, 2, 4, 4})});
  const auto trace = refine(*p, {1, 0.0, 1});
  REQUIRE(trace.steps.size() == 1);
  CHECK(trace.reason == StopReason::IterationCap);
  CHECK(trace.aggregate == trace.steps[0].heatmap);
}

TEST_CASE("refine stops when no dominant group exists") {
  auto p = make_replay_provider({constant_stack({1, 1, 3, 3}, 0.2f)});
  const auto trace = refine(*p, {0, 0.3, 8});
  REQUIRE(trace.steps.size() == 1);
  CHECK(trace.reason == StopReason::NoDominantTokens);
  CHECK(trace.steps[0].selected.empty());
}

TEST_CASE("refine on the two-blob synthetic provider") {
  auto p = make_synthetic_provider(two_blob_spec());
  const auto trace = refine(*p, RefinementConfig{});
  // Frozen from a step-by-step numpy simulation of the loop on the same mixture.
  REQUIRE(trace.steps.size() == 3);
  CHECK(trace.reason == StopReason::BelowThreshold);
  CHECK(trace.steps[0].total_mass == doctest::Approx(1.5).epsilon(1e-7));
  CHECK(trace.steps[1].total_mass == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(trace.steps[2].total_mass == doctest::Approx(0.1).epsilon(1e-7));
  CHECK(trace.steps[0].selected.size() == 13);
  CHECK(trace.steps[1].selected.size() == 45);
  CHECK(trace.steps[2].selected.empty());
  CHECK(trace.aggregate(6, 6) == doctest::Approx(0.07073625821974854).epsilon(1e-6));
  CHECK(trace.aggregate(17, 17) == doctest::Approx(0.012845956271156775).epsilon(1e-6));
  CHECK(trace.counts(6, 6) == 1);
  CHECK(trace.counts(17, 17) == 2);
  CHECK(trace.counts(0, 23) == 3);
}

TEST_CASE("refine propagates provider failures with the iteration index") {
  ThrowingProvider p(1);
  try {
    refine(p, {0, 0.0, 8});
    FAIL("expected ProviderError");
  } catch (const ProviderError& e) {
    CHECK(e.iteration() == 1);
  }
}

TEST_CASE("refine rejects shape drift") {
  DriftingProvider p;
  CHECK_THROWS_AS(refine(p, {0, 0.0, 8}), ValidationError);
}

TEST_CASE("refine rejects a start layer beyond the provider's layers") {
  auto p = make_synthetic_provider(two_blob_spec(4));
  CHECK_THROWS_AS(refine(*p, RefinementConfig{}), RangeError);
}

TEST_CASE("refine invariants on random replay providers") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const StackShape s{1 + rng() % 3, 1 + rng() % 3, 2 + rng() % 6, 2 + rng() % 6};
    std::vector<AttnStack> dumps;
    const std::size_t n = 1 + rng() % 4;
    for (std::size_t i = 0; i < n; ++i) dumps.push_back(oracle::random_stack(rng, s));
    const RefinementConfig cfg{rng() % s.layers, std::uniform_real_distribution<double>(0, 3)(rng),
                               1 + rng() % 8};
    auto p = make_replay_provider(dumps);
    const auto trace = refine(*p, cfg);

    REQUIRE(!trace.steps.empty());
    CHECK(trace.steps.size() <= cfg.max_iters);
    CHECK(trace.steps.back().terminal);

    for (std::size_t i = 1; i < trace.steps.size(); ++i) {
      const auto& prev = trace.steps[i - 1].mask;
      const auto& cur = trace.steps[i].mask;
      for (std::size_t t = 0; t < cur.size(); ++t) CHECK(cur.values()[t] <= prev.values()[t]);
      CHECK(cur.count_attendable() < prev.count_attendable());
    }
    for (std::size_t t = 0; t < trace.counts.size(); ++t) {
      std::uint32_t visits = 0;
      double max_pass = 0;
      for (const auto& st : trace.steps) {
        visits += st.mask.values()[t] != 0;
        max_pass = std::max(max_pass, st.heatmap.values()[t]);
      }
      CHECK(trace.counts.values()[t] == visits);
      CHECK(visits >= 1);
      CHECK(trace.aggregate.values()[t] <= max_pass * (1 + 1e-12));
    }

    // Bit-identical replay.
    auto p2 = make_replay_provider(dumps);
    const auto again = refine(*p2, cfg);
    CHECK(again.aggregate == trace.aggregate);
    CHECK(again.counts == trace.counts);
    CHECK(again.steps.size() == trace.steps.size());
  }
}

TEST_CASE("the terminating pass still contributes to the aggregate") {
  // Pass 0 has one dominant token; pass 1 (second dump) is below beta but nonzero.
  AttnStack d0({1, 1, 1, 3}, {0.9f, 0.1f, 0.1f});
  AttnStack d1({1, 1, 1, 3}, {0.0f, 0.05f, 0.15f});
  auto p = make_replay_provider({d0, d1});
  const auto trace = refine(*p, {0, 0.3, 8});
  REQUIRE(trace.steps.size() == 2);
  CHECK(trace.reason == StopReason::BelowThreshold);
  CHECK(trace.aggregate(0, 0) == doctest::Approx(0.9));
  CHECK(trace.aggregate(0, 1) == doctest::Approx((0.1 + 0.05) / 2));
  CHECK(trace.aggregate(0, 2) == doctest::Approx((0.1 + 0.15) / 2));
}

TEST_CASE("replay provider") {
  std::mt19937_64 rng(1);
  const auto a = oracle::random_stack(rng, {2, 2, 3, 3});
  const auto b = oracle::random_stack(rng, {2, 2, 3, 3});

  SUBCASE("single dump, all attendable") {
    auto p = make_replay_provider({a});
    CHECK(p->attend(TokenMask::all(3, 3), 0) == a);
  }
  SUBCASE("iterations past the end clamp to the last dump") {
    auto p = make_replay_provider({a});
    auto m = TokenMask::all(3, 3);
    m(0, 0) = 0;
    CHECK(p->attend(m, 3) == apply_mask(a, m));
  }
  SUBCASE("second dump under a mask") {
    auto p = make_replay_provider({a, b});
    auto m = TokenMask::all(3, 3);
    m(2, 1) = 0;
    const auto out = p->attend(m, 1);
    for (std::size_t l = 0; l < 2; ++l)
      for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t y = 0; y < 3; ++y)
          for (std::size_t x = 0; x < 3; ++x)
            CHECK(out.at(l, h, y, x) == (y == 2 && x == 1 ? 0.0f : b.at(l, h, y, x)));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(make_replay_provider({}), ValidationError);
    CHECK_THROWS_AS(make_replay_provider({a, oracle::random_stack(rng, {2, 2, 3, 4})}), ValidationError);
  }
}

TEST_CASE("synthetic provider") {
  SUBCASE("one blob peaks at its center") {
    SyntheticSpec s{9, 11, {{4, 6, 1.2, 1.0}}, 0.0, 1};
    auto p = make_synthetic_provider(s);
    const auto a = p->attend(TokenMask::all(9, 11), 0);
    CHECK(a.shape() == StackShape{1, 1, 9, 11});
    float best = -1;
    std::size_t br = 0, bc = 0;
    for (std::size_t y = 0; y < 9; ++y)
      for (std::size_t x = 0; x < 11; ++x)
        if (a.at(0, 0, y, x) > best) best = a.at(0, 0, y, x), br = y, bc = x;
    CHECK(br == 4);
    CHECK(bc == 6);
  }
  SUBCASE("masking a center removes that blob") {
    SyntheticSpec s{16, 16, {{4, 4, 1.0, 1.0}, {11, 11, 1.0, 0.5}}, 0.0, 1};
    auto p = make_synthetic_provider(s);
    auto m = TokenMask::all(16, 16);
    m(4, 4) = 0;
    const auto a = p->attend(m, 0);
    CHECK(total(a) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(a.at(0, 0, 4, 5) < 1e-6f);
  }
  SUBCASE("blob weights set the total mass") {
    // sigma <= grid / 8: truncated Gaussian sums checked by direct grid summation
    SyntheticSpec s{32, 32, {{10, 12, 4.0, 1.0}, {22, 20, 2.0, 0.5}}, 0.0, 1};
    auto p = make_synthetic_provider(s);
    CHECK(std::abs(total(p->attend(TokenMask::all(32, 32), 0)) - 1.5) < 1e-6);
  }
  SUBCASE("leak spreads uniformly when no center is attendable") {
    SyntheticSpec s{4, 4, {{1, 1, 1.0, 1.0}}, 0.2, 1};
    auto p = make_synthetic_provider(s);
    auto m = TokenMask::all(4, 4);
    m(1, 1) = 0;
    m(0, 0) = 0;
    const auto a = p->attend(m, 0);
    CHECK(total(a) == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(a.at(0, 0, 0, 0) == 0.0f);
    CHECK(a.at(0, 0, 3, 3) == doctest::Approx(0.2 / 14).epsilon(1e-6));
  }
  SUBCASE("mixture lives in the last layer") {
    auto p = make_synthetic_provider(two_blob_spec(5));
    const auto a = p->attend(TokenMask::all(24, 24), 0);
    CHECK(a.layers() == 5);
    for (std::size_t l = 0; l < 4; ++l) CHECK(a.at(l, 0, 6, 6) == 0.0f);
    CHECK(aggregate_heatmap(a, 0) == aggregate_heatmap(a, 4));
  }
  SUBCASE("invalid parameters") {
    CHECK_THROWS_AS(make_synthetic_provider({4, 4, {}, 0.0, 1}), ValidationError);
    CHECK_THROWS_AS(make_synthetic_provider({4, 4, {{1, 1, 0.0, 1.0}}, 0.0, 1}), ValidationError);
    CHECK_THROWS_AS(make_synthetic_provider({4, 4, {{1, 1, 1.0, -1.0}}, 0.0, 1}), ValidationError);
    CHECK_THROWS_AS(make_synthetic_provider({4, 4, {{1, 1, 1.0, 1.0}}, 1.0, 1}), ValidationError);
  }
}
