#include "narrative/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "narrative/error.hpp"

namespace narrative {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean(xs);
  double ss = 0.0;
  for (const double x : xs) ss += (x - mu) * (x - mu);
  return ss / static_cast<double>(xs.size() - 1);
}

double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

namespace {

double pooled_sd(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw DataError("degenerate: cohens_d needs two values per group");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double pooled = ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0);
  return std::sqrt(pooled);
}

}  // namespace

double cohens_d(std::span<const double> a, std::span<const double> b) {
  const double sd = pooled_sd(a, b);
  if (!(sd > 0.0)) throw DataError("degenerate: zero pooled variance");
  return (mean(a) - mean(b)) / sd;
}

double effect_size(std::span<const double> a, std::span<const double> b) {
  const double sd = pooled_sd(a, b);
  const double diff = mean(a) - mean(b);
  if (sd > 0.0) return diff / sd;
  if (diff == 0.0) return 0.0;
  return diff > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

std::vector<double> midranks(std::span<const double> pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

UTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b, bool two_sided) {
  if (a.empty() || b.empty()) throw DataError("mann_whitney_u: empty group");
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t n = na + nb;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);

  // Doubled midranks are integers, which keeps the exact distribution on a lattice.
  std::vector<std::int64_t> r2(n);
  for (std::size_t i = 0; i < n; ++i) r2[i] = static_cast<std::int64_t>(std::llround(2.0 * ranks[i]));
  std::int64_t sum_a2 = 0;
  for (std::size_t i = 0; i < na; ++i) sum_a2 += r2[i];

  UTestResult result;
  const double dna = static_cast<double>(na);
  const double dnb = static_cast<double>(nb);
  result.u = 0.5 * static_cast<double>(sum_a2) - dna * (dna + 1.0) / 2.0;

  if (na * nb <= kExactUTestLimit) {
    result.exact = true;
    // Count subsets of size k by doubled rank sum, k = the smaller group.
    const bool use_a = na <= nb;
    const std::size_t k = use_a ? na : nb;
    const std::int64_t total2 = std::accumulate(r2.begin(), r2.end(), std::int64_t{0});
    const std::int64_t observed = use_a ? sum_a2 : total2 - sum_a2;
    const std::size_t smax = static_cast<std::size_t>(total2);
    std::vector<double> ways((k + 1) * (smax + 1), 0.0);
    auto at = [&](std::size_t size, std::size_t s) -> double& { return ways[size * (smax + 1) + s]; };
    at(0, 0) = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto w = static_cast<std::size_t>(r2[i]);
      for (std::size_t size = std::min(k, i + 1); size >= 1; --size) {
        for (std::size_t s = smax; s >= w; --s) {
          const double prev = at(size - 1, s - w);
          if (prev != 0.0) at(size, s) += prev;
          if (s == w) break;
        }
      }
    }
    const std::int64_t expected2 = static_cast<std::int64_t>(k) * static_cast<std::int64_t>(n + 1);
    double hit = 0.0;
    double all = 0.0;
    for (std::size_t s = 0; s <= smax; ++s) {
      const double c = at(k, s);
      if (c == 0.0) continue;
      all += c;
      const auto ss = static_cast<std::int64_t>(s);
      bool extreme = false;
      if (two_sided) {
        extreme = std::llabs(ss - expected2) >= std::llabs(observed - expected2);
      } else if (use_a) {
        extreme = ss >= observed;
      } else {
        extreme = ss <= observed;  // small rank sum for b means a tends to be larger
      }
      if (extreme) hit += c;
    }
    result.p_value = std::min(1.0, hit / all);
    return result;
  }

  const double mu = dna * dnb / 2.0;
  double tie_term = 0.0;
  {
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
  }
  const double dn = static_cast<double>(n);
  const double var = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (!(var > 0.0)) {
    result.p_value = 1.0;
    return result;
  }
  const double sigma = std::sqrt(var);
  if (two_sided) {
    const double z = std::max(0.0, (std::abs(result.u - mu) - 0.5) / sigma);
    result.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  } else {
    const double z = (result.u - mu - 0.5) / sigma;
    result.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
  }
  return result;
}

}  // namespace narrative
