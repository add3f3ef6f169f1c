#include "protattn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "protattn/error.hpp"
#include "protattn/rng.hpp"

namespace protattn {

double normal_sf(double z) noexcept {
  const double p = 0.5 * std::erfc(z / std::numbers::sqrt2);
  return p < 1e-300 ? 0.0 : p;
}

double two_sided_p(double z) noexcept {
  const double p = std::erfc(std::abs(z) / std::numbers::sqrt2);
  return p < 1e-300 ? 0.0 : std::min(1.0, p);
}

ZTestResult two_proportion_ztest(std::uint64_t k1, std::uint64_t n1, std::uint64_t k2,
                                 std::uint64_t n2) {
  if (n1 == 0 || n2 == 0 || k1 > n1 || k2 > n2) {
    throw Error(ErrorCode::InvalidArgument, "z-test requires 0 <= k <= n and n > 0");
  }
  const double dn1 = static_cast<double>(n1);
  const double dn2 = static_cast<double>(n2);
  const double pooled = static_cast<double>(k1 + k2) / (dn1 + dn2);
  ZTestResult r;
  if (k1 + k2 == 0 || k1 + k2 == n1 + n2) {
    r.degenerate = true;
    return r;
  }
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / dn1 + 1.0 / dn2));
  r.z = (static_cast<double>(k1) / dn1 - static_cast<double>(k2) / dn2) / se;
  r.p = two_sided_p(r.z);
  return r;
}

bool bonferroni_significant(double raw_p, std::size_t m, double alpha) {
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "Bonferroni correction needs m >= 1");
  return raw_p < alpha / static_cast<double>(m);
}

Interval wilson_interval(std::uint64_t k, std::uint64_t n, double confidence) {
  if (n == 0 || k > n) throw Error(ErrorCode::InvalidArgument, "Wilson interval needs 0 <= k <= n, n > 0");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "confidence must lie in (0, 1)");
  }
  const boost::math::normal_distribution<double> standard;
  const double z = boost::math::quantile(standard, 1.0 - (1.0 - confidence) / 2.0);
  const double dn = static_cast<double>(n);
  const double phat = static_cast<double>(k) / dn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / dn;
  const double centre = (phat + z2 / (2.0 * dn)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / dn + z2 / (4.0 * dn * dn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

SignificanceResult significance(std::uint64_t hits, std::uint64_t arcs,
                                const BackgroundCounts& background, std::size_t m, double alpha) {
  const ZTestResult z = two_proportion_ztest(hits, arcs, background.positives, background.total);
  SignificanceResult r;
  r.z = z.z;
  r.p = z.p;
  r.degenerate = z.degenerate;
  r.significant = !z.degenerate && bonferroni_significant(z.p, m, alpha);
  const Interval ci = wilson_interval(hits, arcs, 1.0 - alpha / static_cast<double>(m));
  r.ci_lo = ci.lo;
  r.ci_hi = ci.hi;
  return r;
}

std::vector<std::optional<SignificanceResult>> significance_table(const HeadScoreTable& table,
                                                                  double alpha) {
  std::vector<std::optional<SignificanceResult>> out(table.heads.size());
  const std::size_t m = table.heads.size();
  if (table.background.total == 0) return out;
  for (std::size_t k = 0; k < m; ++k) {
    const HeadScore& h = table.heads[k];
    if (!h.score || h.arc_count == 0) continue;
    out[k] = significance(h.hits, h.arc_count, table.background, m, alpha);
  }
  return out;
}

AttentionTensor shuffle_null(const AttentionTensor& tensor, std::uint64_t seed) {
  AttentionTensor out = tensor;
  const auto flags = tensor.flags();
  std::vector<std::size_t> columns;
  for (std::size_t t = 0; t < flags.size(); ++t) {
    if (flags[t] != TokenFlag::Pad) columns.push_back(t);
  }
  const std::uint64_t protein = hash_string(tensor.protein_id());
  std::vector<float> values(columns.size());
  for (std::size_t l = 0; l < tensor.n_layers(); ++l) {
    for (std::size_t h = 0; h < tensor.n_heads(); ++h) {
      for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i] == TokenFlag::Pad) continue;
        auto row = out.mutable_row(l, h, i);
        for (std::size_t c = 0; c < columns.size(); ++c) values[c] = row[columns[c]];
        Rng rng(stream_seed(seed, protein, l, h, i));
        rng.shuffle(std::span<float>(values));
        for (std::size_t c = 0; c < columns.size(); ++c) row[columns[c]] = values[c];
      }
    }
  }
  return out;
}

std::shared_ptr<const AttentionTensor> ShuffledAttention::load(const ProteinRecord& record) const {
  return std::make_shared<const AttentionTensor>(shuffle_null(*base_->load(record), seed_));
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "pearson needs two equal-length inputs of size >= 2");
  }
  const auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(xs) || constant(ys)) throw Error(ErrorCode::ZeroVariance, "constant input to pearson");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw Error(ErrorCode::ZeroVariance, "constant input to pearson");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace protattn
