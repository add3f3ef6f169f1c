#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "protattn/metrics.hpp"
#include "protattn/tensors.hpp"

namespace protattn {

inline constexpr double kFamilyAlpha = 0.05;

struct ZTestResult {
  double z = 0.0;
  double p = 1.0;  // two-sided
  // Pooled proportion is 0 or 1: z is undefined and reported as 0 with p = 1.
  bool degenerate = false;
};

// Upper tail of the standard normal, via erfc. Values below 1e-300 clamp to 0.
double normal_sf(double z) noexcept;
double two_sided_p(double z) noexcept;

// Pooled two-proportion z-test of k1/n1 against k2/n2.
// Throws InvalidArgument unless 0 <= k <= n and n > 0 for both samples.
ZTestResult two_proportion_ztest(std::uint64_t k1, std::uint64_t n1, std::uint64_t k2,
                                 std::uint64_t n2);

// raw_p < alpha / m. Throws InvalidArgument when m == 0.
bool bonferroni_significant(double raw_p, std::size_t m, double alpha = kFamilyAlpha);

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

// Wilson score interval for k/n at the given two-sided confidence level.
Interval wilson_interval(std::uint64_t k, std::uint64_t n, double confidence);

struct SignificanceResult {
  double z = 0.0;
  double p = 1.0;
  bool degenerate = false;
  bool significant = false;  // Bonferroni-adjusted at kFamilyAlpha
  double ci_lo = 0.0;        // Wilson interval at level 1 - alpha/m
  double ci_hi = 1.0;
};

// Tests hits/arcs against the background proportion with m hypotheses.
SignificanceResult significance(std::uint64_t hits, std::uint64_t arcs,
                                const BackgroundCounts& background, std::size_t m,
                                double alpha = kFamilyAlpha);

// One entry per head (layer-major); nullopt for ABSENT heads. m is the number
// of heads in the model.
std::vector<std::optional<SignificanceResult>> significance_table(const HeadScoreTable& table,
                                                                  double alpha = kFamilyAlpha);

// Null model: every non-PAD row of every head has its weights over non-PAD
// columns replaced by a uniform random permutation. Deterministic in
// (seed, protein id, layer, head, row).
AttentionTensor shuffle_null(const AttentionTensor& tensor, std::uint64_t seed);

// Wraps another source and shuffles every tensor it yields.
class ShuffledAttention final : public AttentionSource {
 public:
  ShuffledAttention(std::shared_ptr<const AttentionSource> base, std::uint64_t seed)
      : base_(std::move(base)), seed_(seed) {}
  std::shared_ptr<const AttentionTensor> load(const ProteinRecord& record) const override;

 private:
  std::shared_ptr<const AttentionSource> base_;
  std::uint64_t seed_;
};

// Sample Pearson correlation. Throws InvalidArgument for mismatched or short
// inputs and ZeroVariance when either input is constant.
double pearson(std::span<const double> xs, std::span<const double> ys);

}  // namespace protattn
