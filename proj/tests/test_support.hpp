#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ripple/market_graph.hpp"
#include "ripple/propagator.hpp"
#include "ripple/rng.hpp"

namespace ripple::testing {

inline std::vector<FirmId> tickers(std::size_t n) {
  std::vector<FirmId> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string t;
    std::size_t k = i;
    do {
      t.insert(t.begin(), static_cast<char>('A' + k % 26));
      k /= 26;
    } while (k-- > 0);
    out.emplace_back("F" + t);
  }
  return out;
}

inline EdgeRecord edge(const char* src, const char* dst, RelationKind kind, double weight,
                       int sign = 1, Month month = Month{2023, 1}) {
  return EdgeRecord{month, FirmId(src), FirmId(dst), kind, weight, sign};
}

/// Random multi-layer edge list over n firms, all in one month.
inline std::vector<EdgeRecord> random_edges(Rng& rng, std::size_t n, double density,
                                            Month month = Month{2023, 1}) {
  const auto firms = tickers(n);
  std::vector<EdgeRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      for (auto kind : kAllRelations) {
        if (!is_directed(kind) && j < i) continue;
        if (!rng.bernoulli(density)) continue;
        out.push_back({month, firms[i], firms[j], kind, rng.uniform(0.1, 5.0),
                       rng.bernoulli(0.2) ? -1 : 1});
      }
    }
  }
  return out;
}

}  // namespace ripple::testing

namespace ripple::testing {

/// Least squares via the normal equations X'X b = X'y, solved by Gaussian
/// elimination with partial pivoting. Independent of the Eigen code paths.
inline std::vector<double> normal_equations(const std::vector<std::vector<double>>& x,
                                            const std::vector<double>& y) {
  const std::size_t n = x.size(), k = x.front().size();
  std::vector<std::vector<double>> a(k, std::vector<double>(k + 1, 0.0));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) a[i][j] += x[r][i] * x[r][j];
      a[i][k] += x[r][i] * y[r];
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < k; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < k; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t j = c; j <= k; ++j) a[r][j] -= f * a[c][j];
    }
  }
  std::vector<double> b(k);
  for (std::size_t i = 0; i < k; ++i) b[i] = a[i][k] / a[i][i];
  return b;
}

/// Plain k x k matrix inverse via Gauss-Jordan.
inline std::vector<std::vector<double>> invert(std::vector<std::vector<double>> a) {
  const std::size_t k = a.size();
  for (std::size_t i = 0; i < k; ++i) {
    a[i].resize(2 * k, 0.0);
    a[i][k + i] = 1.0;
  }
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < k; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    const double p = a[c][c];
    for (auto& v : a[c]) v /= p;
    for (std::size_t r = 0; r < k; ++r) {
      if (r == c) continue;
      const double f = a[r][c];
      for (std::size_t j = 0; j < 2 * k; ++j) a[r][j] -= f * a[c][j];
    }
  }
  std::vector<std::vector<double>> inv(k, std::vector<double>(k));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) inv[i][j] = a[i][k + j];
  return inv;
}

/// HC1 standard errors from the explicit sandwich
/// n/(n-k) (X'X)^-1 [sum_r e_r^2 x_r x_r'] (X'X)^-1, using normal_equations
/// for the coefficients.
inline std::vector<double> hc1_oracle(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
  const std::size_t n = x.size(), k = x.front().size();
  const auto b = normal_equations(x, y);
  std::vector<std::vector<double>> xtx(k, std::vector<double>(k, 0.0)), meat(k, std::vector<double>(k, 0.0));
  for (std::size_t r = 0; r < n; ++r) {
    double e = y[r];
    for (std::size_t i = 0; i < k; ++i) e -= x[r][i] * b[i];
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        xtx[i][j] += x[r][i] * x[r][j];
        meat[i][j] += e * e * x[r][i] * x[r][j];
      }
    }
  }
  const auto bread = invert(xtx);
  std::vector<double> se(k);
  for (std::size_t i = 0; i < k; ++i) {
    double v = 0.0;
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t c = 0; c < k; ++c) v += bread[i][a] * meat[a][c] * bread[c][i];
    se[i] = std::sqrt(v * static_cast<double>(n) / static_cast<double>(n - k));
  }
  return se;
}

}  // namespace ripple::testing

namespace ripple::testing {

/// Enumerates every walk of length <= hops from each seed and sums the
/// products of decay_k * w_k * sign * normalized over the layer edges.
inline std::vector<double> path_sum(const GraphSnapshot& s, const std::vector<std::size_t>& seeds,
                                    const DiffusionParams& p) {
  std::vector<std::vector<double>> gain(s.size(), std::vector<double>(s.size(), 0.0));
  for (auto kind : kAllRelations) {
    for (const auto& [pair, e] : s.layer(kind))
      gain[pair.first][pair.second] += p.decay_of(kind) * s.config().weight(kind) * e.sign * e.normalized;
  }
  std::vector<double> v(s.size(), 0.0);
  const double seed_value = p.seed_scale * p.seed_score / 10.0;
  std::function<void(std::size_t, double, int)> walk = [&](std::size_t at, double weight, int depth) {
    v[at] += weight;
    if (depth == p.hops) return;
    for (std::size_t next = 0; next < s.size(); ++next)
      if (gain[at][next] != 0.0) walk(next, weight * gain[at][next], depth + 1);
  };
  for (auto seed : seeds) walk(seed, seed_value, 0);
  return v;
}

}  // namespace ripple::testing
