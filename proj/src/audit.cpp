#include "caudit/audit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <tuple>

namespace caudit::audit {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

using CK = std::tuple<Regime, Mechanism, Consent>;

// Bid samples grouped two ways: pooled per persona and per advertiser.
// Vectors append in session (iteration) order, so contents are deterministic.
struct Samples {
  std::map<CK, std::map<Persona, std::vector<double>>> pooled;
  std::map<CK, std::map<Persona, std::map<std::string, std::vector<double>>>> by_adv;
};

Samples collect(const ingest::SessionMap& sessions) {
  Samples s;
  for (const auto& [key, session] : sessions) {
    CK ck{key.regime, key.mechanism, key.consent};
    for (const auto& b : session.bids) {
      s.pooled[ck][key.persona].push_back(b.cpm);
      s.by_adv[ck][key.persona][b.advertiser].push_back(b.cpm);
    }
  }
  return s;
}

const std::vector<double>* find_sample(const Samples& s, const CK& ck, Persona p) {
  auto cit = s.pooled.find(ck);
  if (cit == s.pooled.end()) return nullptr;
  auto pit = cit->second.find(p);
  if (pit == cit->second.end() || pit->second.empty()) return nullptr;
  return &pit->second;
}

std::string config_name(Regime r, Mechanism m, Consent c) {
  std::string out{to_label(r)};
  out += "/";
  out += to_label(m);
  out += "/";
  out += to_label(c);
  return out;
}

// Regimes in enum order, restricted to those with bids.
std::vector<Regime> regimes_present(const Samples& s) {
  std::set<Regime> seen;
  for (const auto& [ck, _] : s.pooled) seen.insert(std::get<0>(ck));
  return {seen.begin(), seen.end()};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Consent made a measurable protective difference: the opt-out sample is
// significantly below opt-in. Anything else leaves the flag's second
// condition satisfied, which keeps the verdict monotone in opt-out bids.
bool consent_protective(const stats::UTestResult& test, size_t n1, size_t n2,
                        double alpha) {
  return test.p < alpha && test.u < 0.5 * static_cast<double>(n1 * n2);
}

}  // namespace

const std::set<std::string>& LeakedSet::for_persona(Persona p) const {
  static const std::set<std::string> empty;
  auto it = leaked.find(p);
  return it == leaked.end() ? empty : it->second;
}

std::set<std::string> LeakedSet::union_of_all() const {
  std::set<std::string> all;
  for (const auto& [p, set] : leaked) {
    all.insert(set.begin(), set.end());
  }
  return all;
}

ordered_json leaked_to_json(const LeakedSet& l) {
  ordered_json doc;
  doc["format"] = "consent-audit-leaked/1";
  doc["run_id"] = l.run_id;
  ordered_json leaked = ordered_json::object();
  for (const auto& persona : Persona::all()) {
    auto it = l.leaked.find(persona);
    ordered_json arr = ordered_json::array();
    if (it != l.leaked.end()) {
      for (const auto& adv : it->second) arr.push_back(adv);
    }
    leaked[std::string(persona.label())] = std::move(arr);
  }
  doc["leaked"] = std::move(leaked);
  return doc;
}

LeakedSet leaked_from_json(const json& j) {
  LeakedSet l;
  if (!j.is_object() || !j.contains("leaked") || !j["leaked"].is_object()) {
    throw AuditError("leaked-set file: expected object with 'leaked' map");
  }
  if (j.contains("run_id")) l.run_id = j["run_id"].get<std::string>();
  for (const auto& [label, arr] : j["leaked"].items()) {
    auto persona = Persona::from_label(label);
    if (!persona) throw AuditError("leaked-set file: unknown persona '" + label + "'");
    std::set<std::string> advs;
    for (const auto& a : arr) advs.insert(a.get<std::string>());
    if (persona->is_control() && !advs.empty()) {
      throw AuditError("leaked-set file: control persona must map to the empty set");
    }
    l.leaked[*persona] = std::move(advs);
  }
  return l;
}

LeakedSet load_leaked_set(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ingest::IoError(path, "cannot open leaked-set file");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw AuditError("leaked-set file: invalid syntax: " + path);
  return leaked_from_json(doc);
}

std::vector<BidTable> build_bid_table(const ingest::SessionMap& sessions) {
  Samples s = collect(sessions);
  std::vector<BidTable> tables;

  for (Regime regime : regimes_present(s)) {
    BidTable table;
    table.regime = regime;
    for (Mechanism m : kAllMechanisms) {
      for (Consent c : kAllConsents) {
        CK ck{regime, m, c};
        if (s.pooled.count(ck)) table.columns.push_back({m, c});
      }
    }

    for (const auto& column : table.columns) {
      CK ck{regime, column.first, column.second};
      const auto* control = find_sample(s, ck, Persona::control());
      if (control) {
        table.control[column] = *stats::summarize(*control);
      }
      bool any_persona = false;
      for (const auto& [persona, cpms] : s.pooled.at(ck)) {
        if (!persona.is_control() && !cpms.empty()) any_persona = true;
      }
      if (any_persona && !control) {
        throw AuditError("missing control persona for " +
                         config_name(regime, column.first, column.second));
      }
    }

    for (const auto& persona : Persona::all()) {
      if (persona.is_control()) continue;
      auto& row = table.rows[persona];
      for (const auto& column : table.columns) {
        CK ck{regime, column.first, column.second};
        BidCell cell;
        if (const auto* sample = find_sample(s, ck, persona)) {
          cell.summary = stats::summarize(*sample);
          cell.marker = stats::classify_marker(*cell.summary, table.control.at(column));
        }
        row[column] = std::move(cell);
      }
    }
    tables.push_back(std::move(table));
  }
  return tables;
}

std::vector<ConsentTable> compare_consent(const ingest::SessionMap& sessions,
                                          const AuditOptions& opts, Exec exec) {
  Samples s = collect(sessions);
  const double alpha = opts.bonferroni_personas
                           ? opts.alpha / static_cast<double>(Persona::kCategoryCount)
                           : opts.alpha;
  std::vector<ConsentTable> tables;

  for (Regime regime : regimes_present(s)) {
    ConsentTable table;
    table.regime = regime;
    for (Mechanism m : kAllMechanisms) {
      if (s.pooled.count({regime, m, Consent::OptOut}) ||
          s.pooled.count({regime, m, Consent::OptIn})) {
        table.mechanisms.push_back(m);
      }
    }

    // One U test per (persona, mechanism); batched through the parallel kernel.
    std::vector<stats::SamplePair> pairs;
    std::vector<std::pair<Persona, Mechanism>> slots;
    for (const auto& persona : Persona::all()) {
      if (persona.is_control()) continue;
      for (Mechanism m : table.mechanisms) {
        const auto* optout = find_sample(s, {regime, m, Consent::OptOut}, persona);
        const auto* optin = find_sample(s, {regime, m, Consent::OptIn}, persona);
        ConsentCell cell;
        cell.n_optout = optout ? optout->size() : 0;
        cell.n_optin = optin ? optin->size() : 0;
        table.rows[persona][m] = cell;
        if (optout && optin) {
          pairs.emplace_back(*optout, *optin);
          slots.emplace_back(persona, m);
        }
      }
    }
    auto results = stats::u_test_batch(pairs, exec);
    for (size_t i = 0; i < slots.size(); ++i) {
      auto& cell = table.rows[slots[i].first][slots[i].second];
      cell.test = results[i];
      cell.effect = stats::effect_size(results[i], cell.n_optout, cell.n_optin, alpha);
    }
    tables.push_back(std::move(table));
  }
  return tables;
}

std::vector<UnknownTable> unknown_advertiser_bids(const ingest::SessionMap& sessions,
                                                  const LeakedSet& leaked,
                                                  const AuditOptions& opts) {
  Samples s = collect(sessions);
  const std::set<std::string> union_leaked = leaked.union_of_all();
  std::vector<UnknownTable> tables;

  for (Regime regime : regimes_present(s)) {
    UnknownTable table;
    table.regime = regime;
    for (Mechanism m : kAllMechanisms) {
      if (s.by_adv.count({regime, m, Consent::OptOut})) table.mechanisms.push_back(m);
    }

    for (Mechanism m : table.mechanisms) {
      CK ck{regime, m, Consent::OptOut};
      const auto& per_persona = s.by_adv.at(ck);

      // Control restricted the persona-independent way: advertisers leaked
      // to any persona are dropped (configurable).
      std::optional<stats::BidSummary> control_summary;
      auto cit = per_persona.find(Persona::control());
      if (cit != per_persona.end()) {
        std::vector<double> medians;
        for (const auto& [adv, cpms] : cit->second) {
          if (opts.unknown_control == AuditOptions::ControlRestriction::UnionOfLeaked &&
              union_leaked.count(adv)) {
            continue;
          }
          medians.push_back(median(cpms));
        }
        control_summary = stats::summarize(medians);
      }
      table.control[m] = control_summary;

      for (const auto& persona : Persona::all()) {
        if (persona.is_control()) continue;
        BidCell cell;
        auto pit = per_persona.find(persona);
        if (pit != per_persona.end()) {
          const auto& known = leaked.for_persona(persona);
          std::vector<double> medians;
          for (const auto& [adv, cpms] : pit->second) {
            if (known.count(adv)) continue;
            medians.push_back(median(cpms));
          }
          cell.summary = stats::summarize(medians);
          if (cell.summary && control_summary) {
            cell.marker = stats::classify_marker(*cell.summary, *control_summary);
          }
        }
        table.rows[persona][m] = std::move(cell);
      }
    }
    tables.push_back(std::move(table));
  }
  return tables;
}

PrevalenceTable advertiser_prevalence(const ingest::SessionMap& sessions,
                                      const AuditOptions& opts) {
  Samples s = collect(sessions);
  PrevalenceTable table;

  // CMP-facilitated opt-outs only: the averaged mechanisms are OneTrust and
  // CookieBot, over the 16-persona denominator.
  static constexpr std::array<Mechanism, 2> kCmps = {Mechanism::OneTrust,
                                                     Mechanism::CookieBot};
  std::map<std::string, std::map<Regime, double>> pct;

  for (Regime regime : regimes_present(s)) {
    std::vector<Mechanism> present;
    for (Mechanism m : kCmps) {
      if (s.by_adv.count({regime, m, Consent::OptOut})) present.push_back(m);
    }
    if (present.empty()) continue;
    table.regimes.push_back(regime);

    std::map<std::string, std::map<Mechanism, size_t>> counts;
    std::set<std::string> advertisers;
    for (Mechanism m : present) {
      for (const auto& [persona, advs] : s.by_adv.at({regime, m, Consent::OptOut})) {
        if (persona.is_control()) continue;
        for (const auto& [adv, cpms] : advs) {
          if (!cpms.empty()) {
            ++counts[adv][m];
            advertisers.insert(adv);
          }
        }
      }
    }
    for (const auto& adv : advertisers) {
      double sum = 0.0;
      for (Mechanism m : present) {
        auto it = counts[adv].find(m);
        size_t personas = it == counts[adv].end() ? 0 : it->second;
        sum += static_cast<double>(personas) / static_cast<double>(Persona::kCategoryCount);
      }
      pct[adv][regime] = 100.0 * sum / static_cast<double>(present.size());
    }
  }

  for (const auto& [adv, per_regime] : pct) {
    table.rows.push_back(PrevalenceRow{adv, per_regime});
  }
  std::sort(table.rows.begin(), table.rows.end(),
            [&](const PrevalenceRow& a, const PrevalenceRow& b) {
              for (Regime r : table.regimes) {
                double pa = a.pct.count(r) ? a.pct.at(r) : -1.0;
                double pb = b.pct.count(r) ? b.pct.at(r) : -1.0;
                if (pa != pb) return pa > pb;
              }
              return a.advertiser < b.advertiser;
            });
  if (opts.prevalence_top_k > 0 && table.rows.size() > opts.prevalence_top_k) {
    table.rows.resize(opts.prevalence_top_k);
  }
  return table;
}

std::vector<AuditVerdict> assemble_verdicts(const ingest::SessionMap& sessions,
                                            const AuditOptions& opts, Exec exec) {
  Samples s = collect(sessions);
  const double alpha = opts.bonferroni_personas
                           ? opts.alpha / static_cast<double>(Persona::kCategoryCount)
                           : opts.alpha;

  std::vector<AuditVerdict> verdicts;
  std::vector<stats::SamplePair> pairs;
  std::vector<size_t> pair_slot;

  for (Regime regime : regimes_present(s)) {
    for (Mechanism m : kAllMechanisms) {
      CK oo{regime, m, Consent::OptOut};
      CK oi{regime, m, Consent::OptIn};
      if (!s.pooled.count(oo) && !s.pooled.count(oi)) continue;

      const auto* control_oo = find_sample(s, oo, Persona::control());
      const auto* control_oi = find_sample(s, oi, Persona::control());

      for (const auto& persona : Persona::all()) {
        if (persona.is_control()) continue;
        const auto* optout = find_sample(s, oo, persona);
        const auto* optin = find_sample(s, oi, persona);
        if (!optout && !optin) continue;

        AuditVerdict v;
        v.regime = regime;
        v.mechanism = m;
        v.persona = persona;
        if (optout) {
          if (!control_oo) {
            throw AuditError("missing control persona for " +
                             config_name(regime, m, Consent::OptOut));
          }
          v.optout = stats::summarize(*optout);
          v.optout_marker =
              stats::classify_marker(*v.optout, *stats::summarize(*control_oo));
        }
        if (optin) {
          if (!control_oi) {
            throw AuditError("missing control persona for " +
                             config_name(regime, m, Consent::OptIn));
          }
          v.optin = stats::summarize(*optin);
          v.optin_marker =
              stats::classify_marker(*v.optin, *stats::summarize(*control_oi));
        }
        if (optout && optin) {
          pairs.emplace_back(*optout, *optin);
          pair_slot.push_back(verdicts.size());
        }
        verdicts.push_back(std::move(v));
      }
    }
  }

  auto results = stats::u_test_batch(pairs, exec);
  for (size_t i = 0; i < results.size(); ++i) {
    AuditVerdict& v = verdicts[pair_slot[i]];
    v.consent_test = results[i];
    v.effect = stats::effect_size(results[i], v.optout->n, v.optin->n, alpha);
  }

  for (auto& v : verdicts) {
    if (!v.optout_marker || !stats::marker_is_up(*v.optout_marker)) continue;
    if (!v.consent_test) continue;  // one arm missing: no consent evidence
    if (consent_protective(*v.consent_test, v.optout->n, v.optin->n, alpha)) continue;
    v.flagged = true;
  }
  return verdicts;
}

std::vector<AdvertiserVerdict> advertiser_verdicts(const ingest::SessionMap& sessions,
                                                   const LeakedSet& leaked,
                                                   std::span<const sync::SyncEvent> syncs,
                                                   const AuditOptions& opts, Exec exec) {
  Samples s = collect(sessions);

  // Configurations with opt-out bids; the per-configuration alpha shrinks
  // with their count so OR-ing evidence across configurations keeps the
  // advertiser-level false-positive rate near alpha.
  std::vector<std::pair<Regime, Mechanism>> configs;
  for (const auto& [ck, _] : s.pooled) {
    if (std::get<2>(ck) == Consent::OptOut) {
      auto rm = std::make_pair(std::get<0>(ck), std::get<1>(ck));
      if (configs.empty() || configs.back() != rm) configs.push_back(rm);
    }
  }
  const double alpha_cfg =
      opts.advertiser_alpha_adjust && !configs.empty()
          ? opts.alpha / static_cast<double>(configs.size())
          : opts.alpha;

  // Opt-out sync senders, resolved through the event's session.
  std::map<std::string, Consent> event_consent;
  for (const auto& [key, session] : sessions) {
    for (const auto& e : session.events) event_consent[e.event_id] = key.consent;
  }
  std::map<std::string, size_t> optout_sync_count;
  for (const auto& sync_event : syncs) {
    auto it = event_consent.find(sync_event.event_id);
    if (it != event_consent.end() && it->second == Consent::OptOut) {
      ++optout_sync_count[sync_event.sender];
    }
  }

  std::set<std::string> advertisers;
  for (const auto& [ck, per_persona] : s.by_adv) {
    for (const auto& [persona, advs] : per_persona) {
      for (const auto& [adv, _] : advs) advertisers.insert(adv);
    }
  }
  for (const auto& [adv, _] : optout_sync_count) advertisers.insert(adv);

  // Informed personas: those whose build phase exposed the advertiser.
  auto informed_of = [&](const std::string& adv) {
    std::vector<Persona> out;
    for (const auto& persona : Persona::all()) {
      if (persona.is_control()) continue;
      if (leaked.for_persona(persona).count(adv)) out.push_back(persona);
    }
    return out;
  };

  auto gather = [&](const CK& ck, const std::vector<Persona>& personas,
                    const std::string& adv) {
    std::vector<double> out;
    auto cit = s.by_adv.find(ck);
    if (cit == s.by_adv.end()) return out;
    for (const auto& persona : personas) {
      auto pit = cit->second.find(persona);
      if (pit == cit->second.end()) continue;
      auto ait = pit->second.find(adv);
      if (ait == pit->second.end()) continue;
      out.insert(out.end(), ait->second.begin(), ait->second.end());
    }
    return out;
  };

  std::vector<AdvertiserVerdict> verdicts;
  std::vector<stats::SamplePair> pairs;
  struct PairSlot {
    size_t verdict;
    size_t evidence;
    bool is_control_test;
  };
  std::vector<PairSlot> slots;

  for (const auto& adv : advertisers) {
    AdvertiserVerdict v;
    v.advertiser = adv;
    auto sit = optout_sync_count.find(adv);
    if (sit != optout_sync_count.end()) {
      v.optout_sync_events = sit->second;
      v.sharing_signal = true;
    }
    const auto informed = informed_of(adv);

    for (const auto& [regime, mechanism] : configs) {
      CK oo{regime, mechanism, Consent::OptOut};
      CK oi{regime, mechanism, Consent::OptIn};
      AdvertiserConfigEvidence ev;
      ev.regime = regime;
      ev.mechanism = mechanism;

      std::vector<double> informed_optout = gather(oo, informed, adv);
      std::vector<double> control_optout =
          gather(oo, {Persona::control()}, adv);
      std::vector<double> informed_optin = gather(oi, informed, adv);
      ev.n_informed_optout = informed_optout.size();
      ev.n_control_optout = control_optout.size();
      ev.n_informed_optin = informed_optin.size();

      size_t evidence_idx = v.evidence.size();
      if (!informed_optout.empty() && !control_optout.empty()) {
        pairs.emplace_back(informed_optout, control_optout);
        slots.push_back({verdicts.size(), evidence_idx, true});
      }
      if (!informed_optout.empty() && !informed_optin.empty()) {
        pairs.emplace_back(std::move(informed_optout), std::move(informed_optin));
        slots.push_back({verdicts.size(), evidence_idx, false});
      }
      v.evidence.push_back(std::move(ev));
    }
    verdicts.push_back(std::move(v));
  }

  auto results = stats::u_test_batch(pairs, exec);
  for (size_t i = 0; i < slots.size(); ++i) {
    auto& ev = verdicts[slots[i].verdict].evidence[slots[i].evidence];
    if (slots[i].is_control_test) {
      ev.vs_control = results[i];
    } else {
      ev.vs_optin = results[i];
    }
  }

  for (auto& v : verdicts) {
    for (auto& ev : v.evidence) {
      if (ev.vs_control) {
        double mid = 0.5 * static_cast<double>(ev.n_informed_optout) *
                     static_cast<double>(ev.n_control_optout);
        ev.targeting = ev.vs_control->p < alpha_cfg && ev.vs_control->u > mid;
      }
      if (ev.vs_optin) {
        ev.consent_insensitive = !consent_protective(
            *ev.vs_optin, ev.n_informed_optout, ev.n_informed_optin, alpha_cfg);
      }
      if (ev.targeting && ev.consent_insensitive) v.processing_signal = true;
    }
    v.flagged = v.processing_signal || v.sharing_signal;
  }
  return verdicts;
}

AuditOutputs run_audit(std::span<const BidRecord> bids, std::span<const HttpEvent> events,
                       const LeakedSet& leaked, const AuditOptions& opts, Exec exec) {
  AuditOutputs out;
  out.run_id = leaked.run_id;

  ingest::SessionMap sessions = ingest::partition_sessions(bids, events);

  // Sync scan per profile arm: identifiers persist across the arm's visits.
  std::map<ArmKey, std::vector<HttpEvent>> arms;
  for (const auto& [key, session] : sessions) {
    auto& arm_events = arms[arm_of(key)];
    arm_events.insert(arm_events.end(), session.events.begin(), session.events.end());
  }
  for (const auto& [arm, arm_events] : arms) {
    auto ids = sync::extract_identifiers(arm_events);
    auto found = sync::detect_syncs(arm_events, ids, {}, exec);
    out.syncs.insert(out.syncs.end(), std::make_move_iterator(found.begin()),
                     std::make_move_iterator(found.end()));
  }

  out.sync_table = sync::sync_stats(out.syncs, sessions);
  out.bid_tables = build_bid_table(sessions);
  out.consent_tables = compare_consent(sessions, opts, exec);
  out.unknown_tables = unknown_advertiser_bids(sessions, leaked, opts);
  out.prevalence = advertiser_prevalence(sessions, opts);
  out.verdicts = assemble_verdicts(sessions, opts, exec);
  out.advertiser_verdicts = advertiser_verdicts(sessions, leaked, out.syncs, opts, exec);
  return out;
}

}  // namespace caudit::audit
