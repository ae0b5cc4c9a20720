#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "caudit/audit.hpp"
#include "caudit/domain.hpp"
#include "caudit/exec.hpp"
#include "caudit/sync_detector.hpp"
#include "json.hpp"

namespace caudit::sim {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ComplianceProfile : uint8_t {
  Compliant,              // honors consent: discards knowledge and stops syncing on opt-out
  NonCompliantProcessor,  // applies interest uplift regardless of consent
  NonCompliantSharer      // processor behavior plus identifier forwarding to partners
};

std::string_view to_label(ComplianceProfile p);
std::optional<ComplianceProfile> profile_from_label(std::string_view s);

struct PartnerEdge {
  std::string partner;
  sync::SyncEncoding encoding = sync::SyncEncoding::Plain;
  sync::SyncChannel channel = sync::SyncChannel::UrlComponent;
};

struct AdvertiserSpec {
  std::string identity;  // registrable domain, doubles as the bidder identity
  ComplianceProfile profile = ComplianceProfile::Compliant;
  double base_mu = -2.0;         // log-space location of the bid distribution
  double base_sigma = 0.5;       // log-space scale
  double uplift = 1.0;           // >= 1; multiplier while holding usable knowledge
  double interest_coverage = 0.5;  // chance of serving a given interest category
  std::vector<PartnerEdge> partners;
};

struct SimConfig {
  std::string name = "scenario";
  std::vector<Persona> personas = Persona::categories();  // control is implicit
  size_t sites = 8;
  double site_coverage = 0.5;  // chance an advertiser runs on a measurement site
  size_t sites_visited = 50;   // persona-building visits (timeline metadata)
  size_t bids_per_visit = 50;
  int iterations = 3;
  std::vector<Regime> regimes = {Regime::GDPR};
  std::vector<Mechanism> mechanisms = {Mechanism::OneTrust};
  std::vector<AdvertiserSpec> advertisers;
};

SimConfig scenario_from_json(const nlohmann::json& doc);
SimConfig load_scenario(const std::string& path);
nlohmann::ordered_json scenario_to_json(const SimConfig& config);
void validate_config(const SimConfig& config);  // throws SimError

// One emitted identifier flow, anchored at the event where a detector should
// report it.
struct PlantedFlow {
  std::string sender;
  std::string receiver;
  sync::SyncEncoding encoding = sync::SyncEncoding::Plain;
  sync::SyncChannel channel = sync::SyncChannel::UrlComponent;
  SessionKey session;
  std::string event_id;
};

// Knowledge a partner gained through a sharer rather than directly.
struct KnowledgeEdge {
  std::string from;
  std::string to;
  Persona persona;
};

struct GroundTruth {
  std::string run_id;
  std::map<std::string, ComplianceProfile> profiles;
  std::map<Persona, std::set<std::string>> leaked;
  std::vector<PlantedFlow> planted;
  std::vector<KnowledgeEdge> knowledge_edges;
};

nlohmann::ordered_json ground_truth_to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const nlohmann::json& doc);
GroundTruth load_ground_truth(const std::string& path);

struct SimResult {
  std::vector<BidRecord> bids;
  std::vector<HttpEvent> events;
  audit::LeakedSet leaked;
  GroundTruth truth;
  std::string run_id;
};

// Deterministic: a fixed (config, seed) yields identical output regardless of
// execution policy or thread count. Phase 1 builds personas and records the
// leaked sets; phase 2 registers consent and emits three bid-collection
// visits per site for every (regime, mechanism, consent) arm.
SimResult simulate(const SimConfig& config, uint64_t seed, Exec exec = Exec::Parallel);

struct EvalResult {
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
  size_t tn = 0;
  std::optional<double> precision;  // nullopt when nothing was flagged
  double recall = 1.0;              // vacuously 1 without positives
};

// Advertiser-level precision/recall of audit verdicts against the profile
// labels. Throws SimError when the verdicts belong to a different run.
EvalResult evaluate_audit(const audit::AuditOutputs& outputs, const GroundTruth& truth);

}  // namespace caudit::sim
