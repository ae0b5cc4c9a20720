#include "caudit/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "caudit/audit.hpp"
#include "caudit/domain.hpp"
#include "caudit/exec.hpp"
#include "caudit/ingest.hpp"
#include "caudit/manifest.hpp"
#include "caudit/sim.hpp"
#include "caudit/sync_detector.hpp"

namespace caudit::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ingest::IoError(dir, "cannot create output directory");
}

void note_rejections(const ingest::ParseReport& report, const std::string& what) {
  if (report.rejections.empty()) return;
  std::cerr << "note: " << report.rejections.size() << " " << what
            << " record(s) rejected:\n";
  size_t shown = 0;
  for (const auto& r : report.rejections) {
    if (++shown > 5) {
      std::cerr << "  ...\n";
      break;
    }
    std::cerr << "  ";
    if (!r.id.empty()) {
      std::cerr << "event " << r.id;
    } else {
      std::cerr << "line " << r.line;
    }
    std::cerr << ": " << r.reason << "\n";
  }
}

struct OutputWriter {
  std::string dir;
  std::vector<std::string> names;

  void write(const std::string& name, const std::string& content) {
    ingest::write_text_file(dir + "/" + name, content);
    names.push_back(name);
  }
};

int cmd_simulate(const std::string& scenario_path, uint64_t seed,
                 const std::string& out_dir) {
  sim::SimConfig config = sim::load_scenario(scenario_path);
  sim::SimResult result = sim::simulate(config, seed);
  ensure_dir(out_dir);

  OutputWriter out{out_dir, {}};
  {
    std::ostringstream bids;
    ingest::serialize_bid_log(result.bids, bids);
    out.write("bids.log", bids.str());
  }
  {
    std::ostringstream http;
    ingest::serialize_http_log(result.events, http);
    out.write("http.log", http.str());
  }
  out.write("leaked.json", audit::leaked_to_json(result.leaked).dump(1) + "\n");
  out.write("ground_truth.json", sim::ground_truth_to_json(result.truth).dump(1) + "\n");

  RunManifest manifest;
  manifest.subcommand = "simulate";
  manifest.input_paths = {scenario_path};
  manifest.seed = seed;
  manifest.output_names = out.names;
  write_manifest(out_dir, manifest);
  return kExitOk;
}

int cmd_sync_scan(const std::string& http_path, const std::string& bids_path,
                  const std::string& out_dir, audit::ReportFormat format) {
  ingest::HttpLog http = ingest::load_http_log(http_path);
  note_rejections(http.report, "http");

  std::vector<BidRecord> bids;
  if (!bids_path.empty()) {
    ingest::BidLog bid_log = ingest::load_bid_log(bids_path);
    note_rejections(bid_log.report, "bid");
    bids = std::move(bid_log.records);
  }
  ingest::SessionMap sessions = ingest::partition_sessions(bids, http.events);

  std::map<ArmKey, std::vector<HttpEvent>> arms;
  for (const auto& [key, session] : sessions) {
    auto& arm_events = arms[arm_of(key)];
    arm_events.insert(arm_events.end(), session.events.begin(), session.events.end());
  }
  std::vector<sync::SyncEvent> syncs;
  for (const auto& [arm, events] : arms) {
    auto ids = sync::extract_identifiers(events);
    auto found = sync::detect_syncs(events, ids);
    syncs.insert(syncs.end(), std::make_move_iterator(found.begin()),
                 std::make_move_iterator(found.end()));
  }
  sync::SyncStatsTable table = sync::sync_stats(syncs, sessions);

  ensure_dir(out_dir);
  OutputWriter out{out_dir, {}};
  out.write("syncs.jsonl", audit::render_sync_events_jsonl(syncs));
  ordered_json doc;
  doc["format"] = "consent-audit-tables/1";
  doc["sync_stats"] = audit::sync_stats_to_json(table);
  for (const auto& [name, content] : audit::render_tables(doc, format)) {
    out.write(name, content);
  }

  RunManifest manifest;
  manifest.subcommand = "sync-scan";
  manifest.input_paths = {http_path};
  if (!bids_path.empty()) manifest.input_paths.push_back(bids_path);
  manifest.output_names = out.names;
  write_manifest(out_dir, manifest);
  return kExitOk;
}

int cmd_audit(const std::string& bids_path, const std::string& http_path,
              const std::string& leaked_path, const std::string& out_dir,
              audit::ReportFormat format, const audit::AuditOptions& opts) {
  ingest::BidLog bid_log = ingest::load_bid_log(bids_path);
  note_rejections(bid_log.report, "bid");
  ingest::HttpLog http = ingest::load_http_log(http_path);
  note_rejections(http.report, "http");
  audit::LeakedSet leaked = audit::load_leaked_set(leaked_path);

  audit::AuditOutputs outputs =
      audit::run_audit(bid_log.records, http.events, leaked, opts);

  ensure_dir(out_dir);
  OutputWriter out{out_dir, {}};
  ordered_json tables = audit::tables_to_json(outputs);
  out.write("tables.json", tables.dump(1) + "\n");
  for (const auto& [name, content] : audit::render_tables(tables, format)) {
    out.write(name, content);
  }
  out.write("verdicts.jsonl", audit::render_verdicts_jsonl(outputs.verdicts));
  out.write("advertiser_verdicts.jsonl",
            audit::render_advertiser_verdicts_jsonl(outputs.advertiser_verdicts));
  out.write("syncs.jsonl", audit::render_sync_events_jsonl(outputs.syncs));

  RunManifest manifest;
  manifest.subcommand = "audit";
  manifest.input_paths = {bids_path, http_path, leaked_path};
  manifest.output_names = out.names;
  write_manifest(out_dir, manifest);
  return kExitOk;
}

int cmd_report(const std::string& tables_path, const std::string& out_dir,
               audit::ReportFormat format) {
  std::ifstream in(tables_path, std::ios::binary);
  if (!in) throw ingest::IoError(tables_path, "cannot open tables document");
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    throw audit::AuditError("tables document: invalid syntax: " + tables_path);
  }
  ensure_dir(out_dir);
  OutputWriter out{out_dir, {}};
  for (const auto& [name, content] : audit::render_tables(doc, format)) {
    out.write(name, content);
  }
  RunManifest manifest;
  manifest.subcommand = "report";
  manifest.input_paths = {tables_path};
  manifest.output_names = out.names;
  write_manifest(out_dir, manifest);
  return kExitOk;
}

int cmd_validate(const std::string& scenario_path, size_t seeds, uint64_t seed_base,
                 double precision_floor, double recall_floor) {
  sim::SimConfig config = sim::load_scenario(scenario_path);
  size_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < seeds; ++i) {
    uint64_t seed = seed_base + i;
    sim::SimResult result = sim::simulate(config, seed);
    audit::AuditOutputs outputs =
        audit::run_audit(result.bids, result.events, result.leaked, {});
    sim::EvalResult eval = sim::evaluate_audit(outputs, result.truth);
    tp += eval.tp;
    fp += eval.fp;
    fn += eval.fn;
    char ptext[16];
    if (eval.precision) {
      std::snprintf(ptext, sizeof ptext, "%.3f", *eval.precision);
    } else {
      std::snprintf(ptext, sizeof ptext, "--");
    }
    std::printf("seed=%llu precision=%s recall=%.3f tp=%zu fp=%zu fn=%zu\n",
                static_cast<unsigned long long>(seed), ptext, eval.recall, eval.tp,
                eval.fp, eval.fn);
  }
  double precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                                 : 1.0;  // nothing flagged: no false claims
  double recall =
      tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
  std::printf("aggregate precision=%.4f recall=%.4f tp=%zu fp=%zu fn=%zu\n", precision,
              recall, tp, fp, fn);
  if (precision < precision_floor || recall < recall_floor) {
    std::fprintf(stderr, "validate: floors not met (precision %.4f/%.2f, recall %.4f/%.2f)\n",
                 precision, precision_floor, recall, recall_floor);
    return kExitFloors;
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Consent-audit toolkit: bid-log and HTTP-log analysis with a "
               "ground-truth ad-ecosystem simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  int threads = 0;
  app.add_option("--threads", threads, "Thread cap for parallel kernels (0 = all)");

  std::string scenario_path, out_dir, bids_path, http_path, leaked_path, tables_path;
  std::string format_name = "csv";
  uint64_t seed = 1;
  size_t seeds = 30;
  uint64_t seed_base = 1;
  double precision_floor = 0.9, recall_floor = 0.9;
  audit::AuditOptions audit_opts;
  std::string unknown_control = "union";

  auto* cmd_sim = app.add_subcommand("simulate", "Generate logs from a scenario");
  cmd_sim->add_option("--config", scenario_path, "Scenario file")->required();
  cmd_sim->add_option("--seed", seed, "Master seed")->required();
  cmd_sim->add_option("--out", out_dir, "Output directory")->required();

  auto* cmd_scan = app.add_subcommand("sync-scan", "Detect identifier flows in an HTTP log");
  cmd_scan->add_option("--http", http_path, "HTTP log")->required();
  cmd_scan->add_option("--bids", bids_path, "Bid log (denominator for percentages)");
  cmd_scan->add_option("--out", out_dir, "Output directory")->required();
  cmd_scan->add_option("--format", format_name, "csv|jsonl|md");

  auto* cmd_aud = app.add_subcommand("audit", "Build report tables and verdicts");
  cmd_aud->add_option("--bids", bids_path, "Bid log")->required();
  cmd_aud->add_option("--http", http_path, "HTTP log")->required();
  cmd_aud->add_option("--leaked", leaked_path, "Leaked-set file")->required();
  cmd_aud->add_option("--out", out_dir, "Output directory")->required();
  cmd_aud->add_option("--format", format_name, "csv|jsonl|md");
  cmd_aud->add_option("--alpha", audit_opts.alpha, "Significance level");
  cmd_aud->add_flag("--bonferroni", audit_opts.bonferroni_personas,
                    "Bonferroni-correct the per-persona consent tests");
  cmd_aud->add_option("--top-k", audit_opts.prevalence_top_k,
                      "Prevalence rows to keep (0 = all)");
  cmd_aud->add_option("--unknown-control", unknown_control,
                      "Control restriction for the unknown-advertiser table: union|all");

  auto* cmd_rep = app.add_subcommand("report", "Re-render an audit's tables document");
  cmd_rep->add_option("--tables", tables_path, "tables.json from an audit run")->required();
  cmd_rep->add_option("--format", format_name, "csv|jsonl|md");
  cmd_rep->add_option("--out", out_dir, "Output directory")->required();

  auto* cmd_val = app.add_subcommand("validate", "Score the audit against simulator truth");
  cmd_val->add_option("--scenario", scenario_path, "Scenario file")->required();
  cmd_val->add_option("--seeds", seeds, "Number of seeds");
  cmd_val->add_option("--seed-base", seed_base, "First seed");
  cmd_val->add_option("--precision-floor", precision_floor, "Minimum precision");
  cmd_val->add_option("--recall-floor", recall_floor, "Minimum recall");

  std::vector<std::string> argv_storage(args.rbegin(), args.rend());
  try {
    app.parse(std::vector<std::string>(argv_storage));  // CLI11 takes reversed args
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  set_max_threads(threads);

  try {
    auto format = audit::format_from_label(format_name);
    if (!format) {
      std::fprintf(stderr, "error: unknown format '%s'\n", format_name.c_str());
      return kExitUsage;
    }
    if (unknown_control == "all") {
      audit_opts.unknown_control = audit::AuditOptions::ControlRestriction::None;
    } else if (unknown_control != "union") {
      std::fprintf(stderr, "error: unknown --unknown-control value '%s'\n",
                   unknown_control.c_str());
      return kExitUsage;
    }

    if (cmd_sim->parsed()) return cmd_simulate(scenario_path, seed, out_dir);
    if (cmd_scan->parsed()) return cmd_sync_scan(http_path, bids_path, out_dir, *format);
    if (cmd_aud->parsed()) {
      return cmd_audit(bids_path, http_path, leaked_path, out_dir, *format, audit_opts);
    }
    if (cmd_rep->parsed()) return cmd_report(tables_path, out_dir, *format);
    if (cmd_val->parsed()) {
      return cmd_validate(scenario_path, seeds, seed_base, precision_floor, recall_floor);
    }
  } catch (const ingest::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace caudit::cli
