#include "caudit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace caudit::stats {

namespace {

// Comparisons on report-scale numbers; shields boundary arithmetic such as
// control.avg + control.std from last-ulp noise.
bool nearly_equal(double a, double b) {
  double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) <= 1e-12 * scale;
}

bool definitely_greater(double a, double b) { return a > b && !nearly_equal(a, b); }

// Midranks of the pooled sample; returns rank sum of the first n1 entries'
// values and the tie term sum(t^3 - t).
struct RankInfo {
  double rank_sum_a = 0.0;
  double tie_sum = 0.0;
  bool has_ties = false;
};

RankInfo midrank(std::span<const double> a, std::span<const double> b) {
  const size_t n = a.size() + b.size();
  std::vector<std::pair<double, bool>> pooled;  // value, belongs-to-a
  pooled.reserve(n);
  for (double v : a) pooled.emplace_back(v, true);
  for (double v : b) pooled.emplace_back(v, false);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  RankInfo info;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && pooled[j + 1].first == pooled[i].first) ++j;
    const size_t t = j - i + 1;
    const double rank = 0.5 * static_cast<double>(i + 1 + j + 1);  // average of 1-based ranks
    for (size_t k = i; k <= j; ++k) {
      if (pooled[k].second) info.rank_sum_a += rank;
    }
    if (t > 1) {
      info.has_ties = true;
      info.tie_sum += static_cast<double>(t) * t * t - static_cast<double>(t);
    }
    i = j + 1;
  }
  return info;
}

// Exact two-sided p by enumerating every assignment of group labels to the
// pooled ranks (tie-free, n <= 16): P(|U' - n1 n2 / 2| >= |u - n1 n2 / 2|).
double exact_two_sided_p(double u, unsigned n1, unsigned n2) {
  const unsigned n = n1 + n2;
  const double mu = 0.5 * n1 * n2;
  const double dist = std::fabs(u - mu);
  const uint32_t full = n == 32 ? 0xffffffffu : ((1u << n) - 1u);

  uint64_t count = 0, total = 0;
  uint32_t mask = (1u << n1) - 1u;
  while (mask <= full) {
    // U' from the rank-sum of the bits picked as group a.
    unsigned rank_sum = 0;
    for (uint32_t m = mask; m;) {
      unsigned bit = static_cast<unsigned>(__builtin_ctz(m));
      rank_sum += bit + 1;
      m &= m - 1;
    }
    double up = static_cast<double>(rank_sum) - 0.5 * n1 * (n1 + 1);
    if (std::fabs(up - mu) >= dist - 1e-12) ++count;
    ++total;

    // Gosper's hack: next subset of the same popcount.
    uint32_t c = mask & (~mask + 1u);
    uint32_t r = mask + c;
    if (r > full || r == 0) break;
    mask = (((r ^ mask) >> 2) / c) | r;
  }
  return static_cast<double>(count) / static_cast<double>(total);
}

UTestResult compute(std::span<const double> a, std::span<const double> b,
                    std::optional<TestMethod> forced) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("mann_whitney_u: both samples must be non-empty");
  }
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  const double n = n1 + n2;

  RankInfo ranks = midrank(a, b);
  UTestResult out;
  out.u = ranks.rank_sum_a - 0.5 * n1 * (n1 + 1.0);

  const double mu = 0.5 * n1 * n2;
  double var = (n1 * n2 / 12.0) * (n + 1.0 - ranks.tie_sum / (n * (n - 1.0)));
  if (var < 0.0) var = 0.0;
  const double sd = std::sqrt(var);

  if (sd > 0.0) {
    double d = out.u - mu;
    if (d > 0.5) {
      d -= 0.5;
    } else if (d < -0.5) {
      d += 0.5;
    } else {
      d = 0.0;
    }
    out.z = d / sd;
  } else {
    out.z = 0.0;  // all pooled values identical
  }

  TestMethod method;
  if (forced) {
    method = *forced;
  } else {
    method = (a.size() + b.size() <= 16 && !ranks.has_ties) ? TestMethod::Exact
                                                            : TestMethod::NormalApprox;
  }
  out.method = method;

  if (method == TestMethod::Exact) {
    if (ranks.has_ties || a.size() + b.size() > 16) {
      throw std::invalid_argument("exact method requires tie-free samples with n <= 16");
    }
    out.p = exact_two_sided_p(out.u, static_cast<unsigned>(a.size()),
                              static_cast<unsigned>(b.size()));
  } else {
    out.p = sd > 0.0 ? std::min(1.0, 2.0 * normal_sf(std::fabs(out.z))) : 1.0;
  }
  return out;
}

}  // namespace

std::optional<BidSummary> summarize(std::span<const double> values) {
  if (values.empty()) return std::nullopt;
  BidSummary s;
  s.n = values.size();
  s.avg = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  double ss = 0.0;
  for (double v : values) {
    double d = v - s.avg;
    ss += d * d;
  }
  s.std = std::sqrt(ss / static_cast<double>(s.n));
  return s;
}

MarkerClass classify_marker(const BidSummary& persona, const BidSummary& control) {
  const double upper = control.avg + control.std;
  const double lower = control.avg - control.std;
  if (definitely_greater(persona.avg, upper)) return MarkerClass::UpBeyondStd;
  if (definitely_greater(persona.avg, control.avg)) return MarkerClass::Up;
  if (definitely_greater(lower, persona.avg)) return MarkerClass::DownBeyondStd;
  return MarkerClass::Down;
}

bool marker_is_up(MarkerClass m) {
  return m == MarkerClass::Up || m == MarkerClass::UpBeyondStd;
}

std::string_view marker_glyph(MarkerClass m) {
  switch (m) {
    case MarkerClass::Up: return "^";
    case MarkerClass::UpBeyondStd: return "^!";
    case MarkerClass::Down: return "v";
    case MarkerClass::DownBeyondStd: return "v!";
  }
  return "";
}

std::string_view marker_arrow(MarkerClass m) {
  switch (m) {
    case MarkerClass::Up: return "↑";
    case MarkerClass::UpBeyondStd: return "**↑**";
    case MarkerClass::Down: return "↓";
    case MarkerClass::DownBeyondStd: return "**↓**";
  }
  return "";
}

UTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  return compute(a, b, std::nullopt);
}

UTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                           TestMethod method) {
  return compute(a, b, method);
}

EffectSize effect_size(const UTestResult& test, size_t n1, size_t n2, double alpha) {
  EffectSize e;
  if (test.p >= alpha) return e;
  e.defined = true;
  e.r = std::fabs(test.z) / std::sqrt(static_cast<double>(n1 + n2));
  e.tier = effect_tier(e.r);
  return e;
}

EffectTier effect_tier(double r) {
  if (r < 0.3) return EffectTier::Small;
  if (r <= 0.5) return EffectTier::Medium;
  return EffectTier::Large;
}

std::string_view tier_label(EffectTier t) {
  switch (t) {
    case EffectTier::Small: return "Small";
    case EffectTier::Medium: return "Medium";
    case EffectTier::Large: return "Large";
  }
  return "";
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

std::vector<UTestResult> u_test_batch(std::span<const SamplePair> pairs, Exec exec) {
  // Validate up front; throwing from inside the parallel region would abort.
  for (const auto& [a, b] : pairs) {
    if (a.empty() || b.empty()) {
      throw std::invalid_argument("u_test_batch: both samples must be non-empty");
    }
  }
  std::vector<UTestResult> out(pairs.size());
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
  if (exec == Exec::Parallel && effective_threads(exec) > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(effective_threads(exec))
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      out[static_cast<size_t>(i)] =
          mann_whitney_u(pairs[static_cast<size_t>(i)].first,
                         pairs[static_cast<size_t>(i)].second);
    }
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      out[static_cast<size_t>(i)] =
          mann_whitney_u(pairs[static_cast<size_t>(i)].first,
                         pairs[static_cast<size_t>(i)].second);
    }
  }
  return out;
}

}  // namespace caudit::stats
