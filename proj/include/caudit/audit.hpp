#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "caudit/domain.hpp"
#include "caudit/exec.hpp"
#include "caudit/ingest.hpp"
#include "caudit/stats.hpp"
#include "caudit/sync_detector.hpp"
#include "json.hpp"

namespace caudit::audit {

class AuditError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Advertisers observed while a persona was being built; bids from anyone
// else are the server-side-sharing signal. Control maps to the empty set.
struct LeakedSet {
  std::map<Persona, std::set<std::string>> leaked;
  std::string run_id;

  const std::set<std::string>& for_persona(Persona p) const;
  std::set<std::string> union_of_all() const;
};

nlohmann::ordered_json leaked_to_json(const LeakedSet& l);
LeakedSet leaked_from_json(const nlohmann::json& j);
LeakedSet load_leaked_set(const std::string& path);

struct AuditOptions {
  double alpha = 0.05;
  // Bonferroni over personas for the per-persona consent tables (off: the
  // single-comparison default).
  bool bonferroni_personas = false;
  // The advertiser-level rule always tests one advertiser across every
  // (regime, mechanism) configuration; its per-configuration alpha is
  // divided by the number of configurations unless disabled.
  bool advertiser_alpha_adjust = true;
  size_t prevalence_top_k = 5;  // 0 = all rows
  // Control restriction for the unknown-advertiser table: drop advertisers
  // leaked to any persona (persona-independent), or keep all.
  enum class ControlRestriction { UnionOfLeaked, None };
  ControlRestriction unknown_control = ControlRestriction::UnionOfLeaked;
};

struct BidCell {
  std::optional<stats::BidSummary> summary;
  std::optional<stats::MarkerClass> marker;
};

using ConfigColumn = std::pair<Mechanism, Consent>;

// Per-regime bid table: persona rows, (mechanism x consent) column groups,
// control row at the bottom.
struct BidTable {
  Regime regime = Regime::GDPR;
  std::vector<ConfigColumn> columns;
  std::map<Persona, std::map<ConfigColumn, BidCell>> rows;
  std::map<ConfigColumn, stats::BidSummary> control;
};

// Opt-out vs opt-in test per persona and mechanism.
struct ConsentCell {
  size_t n_optout = 0;
  size_t n_optin = 0;
  std::optional<stats::UTestResult> test;
  stats::EffectSize effect;
};

struct ConsentTable {
  Regime regime = Regime::GDPR;
  std::vector<Mechanism> mechanisms;
  std::map<Persona, std::map<Mechanism, ConsentCell>> rows;
};

// Bids from advertisers never leaked to, opt-out arm only. Summaries are
// mean/std over per-advertiser median bids.
struct UnknownTable {
  Regime regime = Regime::GDPR;
  std::vector<Mechanism> mechanisms;
  std::map<Persona, std::map<Mechanism, BidCell>> rows;
  std::map<Mechanism, std::optional<stats::BidSummary>> control;
};

struct PrevalenceRow {
  std::string advertiser;
  std::map<Regime, double> pct;  // absent regime = no data
};

struct PrevalenceTable {
  std::vector<Regime> regimes;
  std::vector<PrevalenceRow> rows;  // sorted descending
};

// Per (regime, mechanism, persona): targeting persists under opt-out and
// consent made no measurable (protective) difference.
struct AuditVerdict {
  Regime regime = Regime::GDPR;
  Mechanism mechanism = Mechanism::OneTrust;
  Persona persona;
  bool flagged = false;
  std::optional<stats::BidSummary> optout;
  std::optional<stats::BidSummary> optin;
  std::optional<stats::MarkerClass> optout_marker;
  std::optional<stats::MarkerClass> optin_marker;
  std::optional<stats::UTestResult> consent_test;
  stats::EffectSize effect;
};

struct AdvertiserConfigEvidence {
  Regime regime = Regime::GDPR;
  Mechanism mechanism = Mechanism::OneTrust;
  size_t n_informed_optout = 0;
  size_t n_control_optout = 0;
  size_t n_informed_optin = 0;
  std::optional<stats::UTestResult> vs_control;  // informed opt-out vs control opt-out
  std::optional<stats::UTestResult> vs_optin;    // informed opt-out vs informed opt-in
  bool targeting = false;
  bool consent_insensitive = false;
};

struct AdvertiserVerdict {
  std::string advertiser;
  bool flagged = false;
  bool processing_signal = false;  // some configuration shows both evidence parts
  bool sharing_signal = false;     // sender of a sync event under opt-out
  size_t optout_sync_events = 0;
  std::vector<AdvertiserConfigEvidence> evidence;
};

struct AuditOutputs {
  std::vector<BidTable> bid_tables;
  std::vector<ConsentTable> consent_tables;
  std::vector<UnknownTable> unknown_tables;
  PrevalenceTable prevalence;
  std::vector<AuditVerdict> verdicts;
  std::vector<AdvertiserVerdict> advertiser_verdicts;
  std::vector<sync::SyncEvent> syncs;
  sync::SyncStatsTable sync_table;
  std::string run_id;
};

// Report builders. Each throws AuditError when a configuration has persona
// bids but no control baseline.
std::vector<BidTable> build_bid_table(const ingest::SessionMap& sessions);
std::vector<ConsentTable> compare_consent(const ingest::SessionMap& sessions,
                                          const AuditOptions& opts = {},
                                          Exec exec = Exec::Parallel);
std::vector<UnknownTable> unknown_advertiser_bids(const ingest::SessionMap& sessions,
                                                  const LeakedSet& leaked,
                                                  const AuditOptions& opts = {});
PrevalenceTable advertiser_prevalence(const ingest::SessionMap& sessions,
                                      const AuditOptions& opts = {});

std::vector<AuditVerdict> assemble_verdicts(const ingest::SessionMap& sessions,
                                            const AuditOptions& opts = {},
                                            Exec exec = Exec::Parallel);

std::vector<AdvertiserVerdict> advertiser_verdicts(
    const ingest::SessionMap& sessions, const LeakedSet& leaked,
    std::span<const sync::SyncEvent> syncs, const AuditOptions& opts = {},
    Exec exec = Exec::Parallel);

// Full pipeline: partition, sync-scan, tables, verdicts.
AuditOutputs run_audit(std::span<const BidRecord> bids,
                       std::span<const HttpEvent> events, const LeakedSet& leaked,
                       const AuditOptions& opts = {}, Exec exec = Exec::Parallel);

// Rendering. tables_to_json is the canonical machine artifact; the text
// renderers consume it so re-rendering an existing run needs no recompute.
enum class ReportFormat { Csv, Jsonl, Markdown };
std::optional<ReportFormat> format_from_label(std::string_view s);

nlohmann::ordered_json tables_to_json(const AuditOutputs& outputs);
nlohmann::ordered_json sync_stats_to_json(const sync::SyncStatsTable& table);
// filename stem -> content, deterministic for a fixed document. Sections
// absent from the document are skipped.
std::map<std::string, std::string> render_tables(const nlohmann::json& tables_doc,
                                                 ReportFormat format);

std::string render_verdicts_jsonl(std::span<const AuditVerdict> verdicts);
std::string render_advertiser_verdicts_jsonl(std::span<const AdvertiserVerdict> verdicts);
std::string render_sync_events_jsonl(std::span<const sync::SyncEvent> syncs);

// CPM cell formatting shared by every renderer: two decimals at report
// scale, scientific below it, "--" for missing.
std::string format_cpm(double v);

}  // namespace caudit::audit
