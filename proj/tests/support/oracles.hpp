#pragma once

// Reference implementations used to cross-check the library. They follow the
// definitions literally and favor obviousness over speed.

#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "protattn/corpus.hpp"
#include "protattn/properties.hpp"
#include "protattn/rng.hpp"
#include "protattn/tensors.hpp"

namespace oracle {

using protattn::AttentionTensor;
using protattn::ProteinRecord;
using protattn::TokenFlag;

inline std::vector<std::pair<std::size_t, std::size_t>> contacts(const ProteinRecord& r,
                                                                  double cutoff = 8.0,
                                                                  std::size_t sep = 6) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const auto& c = *r.coords;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = i + 1; j < c.size(); ++j) {
      if (!c[i] || !c[j] || j - i < sep) continue;
      const double dx = c[i]->x - c[j]->x;
      const double dy = c[i]->y - c[j]->y;
      const double dz = c[i]->z - c[j]->z;
      if (std::sqrt(dx * dx + dy * dy + dz * dz) < cutoff) out.emplace_back(i, j);
    }
  }
  return out;
}

struct Head {
  std::uint64_t hits = 0;
  std::uint64_t arcs = 0;
  double weighted_hits = 0.0;
  double weighted_total = 0.0;
};

// Quadruple loop over (protein, layer, head, from, to) straight from the
// metric definition: both endpoints must be non-PAD and not excluded, and
// residue pairs must be defined for the indicator.
inline std::vector<Head> score(const std::vector<AttentionTensor>& tensors,
                               const std::vector<protattn::PropertyIndicator>& indicators,
                               double theta, const std::set<TokenFlag>& exclude) {
  std::vector<Head> heads(tensors.front().n_layers() * tensors.front().n_heads());
  for (std::size_t p = 0; p < tensors.size(); ++p) {
    const auto& t = tensors[p];
    const auto& f = indicators[p];
    std::vector<long> residue(t.n_tokens(), -1);
    long next = 0;
    for (std::size_t k = 0; k < t.n_tokens(); ++k) {
      if (t.flags()[k] == TokenFlag::Residue) residue[k] = next++;
    }
    auto ok = [&](std::size_t k) {
      return t.flags()[k] != TokenFlag::Pad && !exclude.count(t.flags()[k]);
    };
    for (std::size_t l = 0; l < t.n_layers(); ++l) {
      for (std::size_t h = 0; h < t.n_heads(); ++h) {
        Head& acc = heads[l * t.n_heads() + h];
        for (std::size_t a = 0; a < t.n_tokens(); ++a) {
          for (std::size_t b = 0; b < t.n_tokens(); ++b) {
            if (!ok(a) || !ok(b)) continue;
            bool hit = false;
            if (residue[a] >= 0 && residue[b] >= 0) {
              const auto i = static_cast<std::size_t>(residue[a]);
              const auto j = static_cast<std::size_t>(residue[b]);
              if (!f.defined(i, j)) continue;
              hit = f(i, j);
            }
            const float w = t.weight(l, h, a, b);
            acc.weighted_total += w;
            if (hit) acc.weighted_hits += w;
            if (w > static_cast<float>(theta)) {
              ++acc.arcs;
              if (hit) ++acc.hits;
            }
          }
        }
      }
    }
  }
  return heads;
}

struct ZTest {
  double z;
  double p;
};

// Pearson chi-square on the 2x2 table; for one degree of freedom chi2 = z^2,
// and the chi-square upper tail equals the two-sided normal p-value.
inline ZTest chi_square_ztest(std::uint64_t k1, std::uint64_t n1, std::uint64_t k2,
                              std::uint64_t n2) {
  const double a = static_cast<double>(k1), b = static_cast<double>(n1 - k1);
  const double c = static_cast<double>(k2), d = static_cast<double>(n2 - k2);
  const double n = a + b + c + d;
  const double num = a * d - b * c;
  const double chi2 = n * num * num / ((a + b) * (c + d) * (a + c) * (b + d));
  boost::math::chi_squared dist(1.0);
  const double z = std::copysign(std::sqrt(chi2), num);
  const double p = boost::math::cdf(boost::math::complement(dist, chi2));
  return {z, p};
}

// Central differences of a scalar function.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = x[k];
    x[k] = saved + h;
    const double up = f(x);
    x[k] = saved - h;
    const double down = f(x);
    x[k] = saved;
    g[k] = (up - down) / (2 * h);
  }
  return g;
}

// Random row-stochastic attention over non-PAD columns; PAD rows are zero.
// Some entries are snapped to exactly theta to exercise the strict comparison.
inline AttentionTensor random_tensor(protattn::Rng& rng, const std::string& id,
                                     std::vector<TokenFlag> flags, std::size_t layers,
                                     std::size_t heads, double theta = 0.3) {
  const std::size_t n = flags.size();
  std::vector<float> w(layers * heads * n * n, 0.0f);
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        if (flags[i] == TokenFlag::Pad) continue;
        float* row = w.data() + ((l * heads + h) * n + i) * n;
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          if (flags[j] == TokenFlag::Pad) continue;
          double v = rng.uniform();
          v = v * v * v;
          row[j] = static_cast<float>(v);
          sum += v;
        }
        if (sum == 0.0) sum = 1.0;
        for (std::size_t j = 0; j < n; ++j) row[j] = static_cast<float>(row[j] / sum);
        if (rng.below(4) == 0) {
          const std::size_t j = static_cast<std::size_t>(rng.below(n));
          if (flags[j] != TokenFlag::Pad) row[j] = static_cast<float>(theta);
        }
      }
    }
  }
  return AttentionTensor(id, layers, heads, std::move(flags), std::move(w));
}

}  // namespace oracle
