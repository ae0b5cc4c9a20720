#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "caudit/exec.hpp"

namespace caudit::stats {

// Mean and population standard deviation of one persona/configuration cell.
struct BidSummary {
  size_t n = 0;
  double avg = 0.0;
  double std = 0.0;
};

// Position of a persona mean relative to the control band:
//   UpBeyondStd    avg  >  control.avg + control.std
//   Up             control.avg < avg <= control.avg + control.std
//   DownBeyondStd  avg  <  control.avg - control.std
//   Down           otherwise (ties classify Down)
enum class MarkerClass { Up, UpBeyondStd, Down, DownBeyondStd };

enum class TestMethod { Exact, NormalApprox };

struct UTestResult {
  double u = 0.0;  // U statistic of the first sample, from midranks
  double z = 0.0;  // tie-corrected, continuity-corrected normal deviate
  double p = 1.0;  // two-sided
  TestMethod method = TestMethod::NormalApprox;
};

enum class EffectTier { Small, Medium, Large };

struct EffectSize {
  bool defined = false;  // only when the paired test rejects at alpha
  double r = 0.0;        // |z| / sqrt(n1 + n2)
  EffectTier tier = EffectTier::Small;
};

// Empty input yields nullopt (rendered "--" downstream).
std::optional<BidSummary> summarize(std::span<const double> values);

MarkerClass classify_marker(const BidSummary& persona, const BidSummary& control);

bool marker_is_up(MarkerClass m);

// Machine-format glyph {^, ^!, v, v!} and markdown arrow for a marker.
std::string_view marker_glyph(MarkerClass m);
std::string_view marker_arrow(MarkerClass m);

// Two-sided Mann-Whitney U test. Exact enumeration over all label
// assignments when n1 + n2 <= 16 and the pooled sample is tie-free;
// otherwise normal approximation with tie-corrected variance and
// continuity correction. Both samples must be non-empty.
UTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

// Same statistic with the method forced (used for approximation studies).
UTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                           TestMethod method);

// Rank effect size r = |z|/sqrt(N); undefined when p >= alpha.
EffectSize effect_size(const UTestResult& test, size_t n1, size_t n2,
                       double alpha = 0.05);

// Small iff r < 0.3; Medium iff 0.3 <= r <= 0.5; Large iff r > 0.5.
EffectTier effect_tier(double r);
std::string_view tier_label(EffectTier t);

// Upper tail of the standard normal.
double normal_sf(double z);

// Data-parallel kernel: one U test per sample pair, results in input order.
using SamplePair = std::pair<std::vector<double>, std::vector<double>>;
std::vector<UTestResult> u_test_batch(std::span<const SamplePair> pairs,
                                      Exec exec = Exec::Parallel);

}  // namespace caudit::stats
