// Serial vs OpenMP timings for the three data-parallel kernels.
// Run: ./caudit_bench [--benchmark_filter=...]

#include <benchmark/benchmark.h>

#include <random>

#include "caudit/sim.hpp"
#include "caudit/stats.hpp"
#include "caudit/sync_detector.hpp"

using namespace caudit;

namespace {

std::vector<stats::SamplePair> make_pairs(size_t count, size_t n) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<stats::SamplePair> pairs(count);
  for (auto& [a, b] : pairs) {
    a.resize(n);
    b.resize(n);
    for (auto& x : a) x = dist(rng);
    for (auto& x : b) x = dist(rng);
  }
  return pairs;
}

void bm_utest_batch(benchmark::State& state, Exec exec) {
  auto pairs = make_pairs(96, static_cast<size_t>(state.range(0)));
  for (auto _ : state) {
    auto results = stats::u_test_batch(pairs, exec);
    benchmark::DoNotOptimize(results);
  }
}

struct SyncWorkload {
  std::vector<HttpEvent> events;
  std::vector<sync::IdentifierCandidate> ids;
};

SyncWorkload make_sync_workload(size_t n_events, size_t n_ids) {
  std::mt19937 rng(2);
  auto hexstr = [&](size_t len) {
    static const char* digits = "0123456789abcdef";
    std::string s(len, '0');
    for (auto& c : s) c = digits[rng() % 16];
    return s;
  };
  SyncWorkload w;
  SessionKey session{*Persona::from_label("Adult"), Regime::GDPR, Mechanism::OneTrust,
                     Consent::OptOut, 1};
  for (size_t i = 0; i < n_ids; ++i) {
    w.ids.push_back({"owner" + std::to_string(i) + ".com", "uid", hexstr(24),
                     sync::IdSource::CookieSet});
  }
  for (size_t i = 0; i < n_events; ++i) {
    HttpEvent e;
    e.event_id = "e" + std::to_string(i);
    e.session = session;
    std::string party = "party" + std::to_string(i % 40) + ".com";
    std::string token =
        i % 7 == 0 ? w.ids[i % n_ids].value : hexstr(24);  // some real hits
    e.url = "https://" + party + "/path/" + hexstr(12) + "?uid=" + token;
    e.party = party;
    e.request_headers = {{"Referer", "https://pub.com/page"}};
    w.events.push_back(std::move(e));
  }
  return w;
}

void bm_sync_scan(benchmark::State& state, Exec exec) {
  auto w = make_sync_workload(static_cast<size_t>(state.range(0)), 64);
  for (auto _ : state) {
    auto found = sync::detect_syncs(w.events, w.ids, {}, exec);
    benchmark::DoNotOptimize(found);
  }
}

sim::SimConfig bench_scenario() {
  sim::SimConfig config;
  config.name = "bench";
  config.sites = 6;
  config.bids_per_visit = 50;
  config.regimes = {Regime::GDPR};
  config.mechanisms = {Mechanism::OneTrust, Mechanism::CookieBot};
  for (int i = 0; i < 8; ++i) {
    sim::AdvertiserSpec spec;
    spec.identity = "adv" + std::to_string(i) + ".com";
    spec.profile = i < 4 ? sim::ComplianceProfile::NonCompliantProcessor
                         : sim::ComplianceProfile::Compliant;
    spec.uplift = i < 4 ? 2.0 : 1.0;
    spec.interest_coverage = 0.6;
    config.advertisers.push_back(std::move(spec));
  }
  return config;
}

void bm_simulate(benchmark::State& state, Exec exec) {
  auto config = bench_scenario();
  uint64_t seed = 1;
  for (auto _ : state) {
    auto result = sim::simulate(config, seed++, exec);
    benchmark::DoNotOptimize(result);
  }
}

}  // namespace

BENCHMARK_CAPTURE(bm_utest_batch, serial, Exec::Serial)->Arg(200)->Arg(1000);
BENCHMARK_CAPTURE(bm_utest_batch, parallel, Exec::Parallel)->Arg(200)->Arg(1000);
BENCHMARK_CAPTURE(bm_sync_scan, serial, Exec::Serial)->Arg(2000)->Arg(8000);
BENCHMARK_CAPTURE(bm_sync_scan, parallel, Exec::Parallel)->Arg(2000)->Arg(8000);
BENCHMARK_CAPTURE(bm_simulate, serial, Exec::Serial);
BENCHMARK_CAPTURE(bm_simulate, parallel, Exec::Parallel);

BENCHMARK_MAIN();
