#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>

#include "caudit/audit.hpp"

namespace caudit::audit {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view glyph_to_arrow(std::string_view glyph) {
  if (glyph == "^") return "↑";
  if (glyph == "^!") return "**↑**";
  if (glyph == "v") return "↓";
  if (glyph == "v!") return "**↓**";
  return glyph;
}

ordered_json summary_to_json(const stats::BidSummary& s,
                             const std::optional<stats::MarkerClass>& marker) {
  ordered_json cell;
  cell["n"] = s.n;
  cell["avg"] = s.avg;
  cell["std"] = s.std;
  if (marker) cell["marker"] = stats::marker_glyph(*marker);
  return cell;
}

ordered_json utest_to_json(const stats::UTestResult& t) {
  ordered_json out;
  out["u"] = t.u;
  out["z"] = t.z;
  out["p"] = t.p;
  out["method"] = t.method == stats::TestMethod::Exact ? "Exact" : "NormalApprox";
  return out;
}

ordered_json effect_to_json(const stats::EffectSize& e) {
  ordered_json out;
  out["defined"] = e.defined;
  if (e.defined) {
    out["r"] = e.r;
    out["tier"] = stats::tier_label(e.tier);
  }
  return out;
}

// ---- CSV/markdown assembly over the canonical json document ----

struct TextTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string to_csv(const TextTable& t) {
  std::string out;
  auto emit_row = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  emit_row(t.header);
  for (const auto& row : t.rows) emit_row(row);
  return out;
}

std::string to_markdown(const TextTable& t) {
  std::string out;
  auto emit_row = [&](const std::vector<std::string>& cells) {
    out += '|';
    for (const auto& c : cells) {
      out += ' ';
      out += c;
      out += " |";
    }
    out += '\n';
  };
  emit_row(t.header);
  std::vector<std::string> rule(t.header.size(), "---");
  emit_row(rule);
  for (const auto& row : t.rows) emit_row(row);
  return out;
}

std::string to_jsonl(const json& table_doc) {
  std::string out;
  for (const auto& row : table_doc["rows"]) {
    out += row.dump();
    out += '\n';
  }
  return out;
}

std::string avg_cell(const json& cell, bool markdown) {
  if (cell.is_null()) return "--";
  std::string text = format_cpm(cell["avg"].get<double>());
  if (cell.contains("marker")) {
    std::string_view glyph = cell["marker"].get_ref<const std::string&>();
    if (markdown) {
      text += ' ';
      text += glyph_to_arrow(glyph);
    } else {
      text += glyph;
    }
  }
  return text;
}

std::string std_cell(const json& cell) {
  if (cell.is_null()) return "--";
  return format_cpm(cell["std"].get<double>());
}

TextTable bid_table_text(const json& doc, bool markdown) {
  TextTable t;
  t.header.push_back("persona");
  for (const auto& col : doc["columns"]) {
    std::string base = col["mechanism"].get<std::string>() + "-" +
                       col["consent"].get<std::string>();
    t.header.push_back(base + "-avg");
    t.header.push_back(base + "-std");
  }
  for (const auto& row : doc["rows"]) {
    std::vector<std::string> cells;
    cells.push_back(row["persona"].get<std::string>());
    for (const auto& cell : row["cells"]) {
      cells.push_back(avg_cell(cell, markdown));
      cells.push_back(std_cell(cell));
    }
    t.rows.push_back(std::move(cells));
  }
  std::vector<std::string> control;
  control.push_back("Control");
  for (const auto& cell : doc["control"]) {
    control.push_back(cell.is_null() ? "--" : format_cpm(cell["avg"].get<double>()));
    control.push_back(std_cell(cell));
  }
  t.rows.push_back(std::move(control));
  return t;
}

TextTable consent_table_text(const json& doc) {
  TextTable t;
  t.header.push_back("persona");
  for (const auto& m : doc["mechanisms"]) {
    t.header.push_back(m.get<std::string>() + "-P");
    t.header.push_back(m.get<std::string>() + "-E");
  }
  for (const auto& row : doc["rows"]) {
    std::vector<std::string> cells;
    cells.push_back(row["persona"].get<std::string>());
    for (const auto& cell : row["cells"]) {
      if (cell.is_null() || cell["p"].is_null()) {
        cells.push_back("--");
        cells.push_back("--");
        continue;
      }
      cells.push_back(fmt("%.2f", cell["p"].get<double>()));
      cells.push_back(cell["e"].is_null() ? "--" : fmt("%.2f", cell["e"].get<double>()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

TextTable unknown_table_text(const json& doc, bool markdown) {
  TextTable t;
  t.header.push_back("persona");
  for (const auto& m : doc["mechanisms"]) {
    t.header.push_back(m.get<std::string>() + "-avg");
    t.header.push_back(m.get<std::string>() + "-std");
  }
  for (const auto& row : doc["rows"]) {
    std::vector<std::string> cells;
    cells.push_back(row["persona"].get<std::string>());
    for (const auto& cell : row["cells"]) {
      cells.push_back(avg_cell(cell, markdown));
      cells.push_back(std_cell(cell));
    }
    t.rows.push_back(std::move(cells));
  }
  std::vector<std::string> control;
  control.push_back("Control");
  for (const auto& cell : doc["control"]) {
    control.push_back(cell.is_null() ? "--" : format_cpm(cell["avg"].get<double>()));
    control.push_back(std_cell(cell));
  }
  t.rows.push_back(std::move(control));
  return t;
}

TextTable prevalence_text(const json& doc) {
  TextTable t;
  t.header.push_back("advertiser");
  for (const auto& r : doc["regimes"]) t.header.push_back(r.get<std::string>());
  for (const auto& row : doc["rows"]) {
    std::vector<std::string> cells;
    cells.push_back(row["advertiser"].get<std::string>());
    for (const auto& pct : row["pct"]) {
      cells.push_back(pct.is_null() ? "--" : fmt("%.2f%%", pct.get<double>()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

TextTable sync_stats_text(const json& doc) {
  TextTable t;
  t.header.push_back("persona");
  for (const auto& col : doc["columns"]) {
    std::string base = col["mechanism"].get<std::string>() + "-" +
                       col["consent"].get<std::string>();
    t.header.push_back(base + "-evt");
    t.header.push_back(base + "-pct");
  }
  size_t ncols = doc["columns"].size();
  std::vector<double> evt_sum(ncols, 0.0);
  std::vector<double> pct_sum(ncols, 0.0);
  std::vector<size_t> pct_n(ncols, 0);
  for (const auto& row : doc["rows"]) {
    std::vector<std::string> cells;
    cells.push_back(row["persona"].get<std::string>());
    size_t c = 0;
    for (const auto& cell : row["cells"]) {
      if (cell.is_null()) {
        cells.push_back("--");
        cells.push_back("--");
      } else {
        size_t evt = cell["evt"].get<size_t>();
        size_t observed = cell["observed"].get<size_t>();
        size_t participating = cell["participating"].get<size_t>();
        cells.push_back(std::to_string(evt));
        if (observed == 0) {
          cells.push_back("--");
        } else {
          double pct = 100.0 * static_cast<double>(participating) /
                       static_cast<double>(observed);
          cells.push_back(fmt("%.1f%%", pct));
          pct_sum[c] += pct;
          ++pct_n[c];
        }
        evt_sum[c] += static_cast<double>(evt);
      }
      ++c;
    }
    t.rows.push_back(std::move(cells));
  }
  std::vector<std::string> avg;
  avg.push_back("Average");
  size_t nrows = doc["rows"].size();
  for (size_t c = 0; c < ncols; ++c) {
    if (nrows == 0) {
      avg.push_back("--");
      avg.push_back("--");
      continue;
    }
    avg.push_back(fmt("%.0f", evt_sum[c] / static_cast<double>(nrows)));
    avg.push_back(pct_n[c] ? fmt("%.1f%%", pct_sum[c] / static_cast<double>(pct_n[c]))
                           : "--");
  }
  t.rows.push_back(std::move(avg));
  return t;
}

}  // namespace

std::string format_cpm(double v) {
  if (v == 0.0) return "0.00";
  return std::fabs(v) >= 0.005 ? fmt("%.2f", v) : fmt("%.1E", v);
}

std::optional<ReportFormat> format_from_label(std::string_view s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "jsonl") return ReportFormat::Jsonl;
  if (s == "md" || s == "markdown") return ReportFormat::Markdown;
  return std::nullopt;
}

ordered_json tables_to_json(const AuditOutputs& outputs) {
  ordered_json doc;
  doc["format"] = "consent-audit-tables/1";
  doc["run_id"] = outputs.run_id;

  ordered_json bid_tables = ordered_json::array();
  for (const auto& table : outputs.bid_tables) {
    ordered_json t;
    t["regime"] = to_label(table.regime);
    ordered_json columns = ordered_json::array();
    for (const auto& [m, c] : table.columns) {
      columns.push_back({{"mechanism", to_label(m)}, {"consent", to_label(c)}});
    }
    t["columns"] = std::move(columns);
    ordered_json rows = ordered_json::array();
    for (const auto& persona : Persona::all()) {
      if (persona.is_control()) continue;
      ordered_json row;
      row["persona"] = persona.label();
      ordered_json cells = ordered_json::array();
      auto rit = table.rows.find(persona);
      for (const auto& column : table.columns) {
        const BidCell* cell = nullptr;
        if (rit != table.rows.end()) {
          auto cit = rit->second.find(column);
          if (cit != rit->second.end()) cell = &cit->second;
        }
        if (cell && cell->summary) {
          cells.push_back(summary_to_json(*cell->summary, cell->marker));
        } else {
          cells.push_back(nullptr);
        }
      }
      row["cells"] = std::move(cells);
      rows.push_back(std::move(row));
    }
    t["rows"] = std::move(rows);
    ordered_json control = ordered_json::array();
    for (const auto& column : table.columns) {
      auto cit = table.control.find(column);
      if (cit != table.control.end()) {
        control.push_back(summary_to_json(cit->second, std::nullopt));
      } else {
        control.push_back(nullptr);
      }
    }
    t["control"] = std::move(control);
    bid_tables.push_back(std::move(t));
  }
  doc["bid_tables"] = std::move(bid_tables);

  ordered_json consent_tables = ordered_json::array();
  for (const auto& table : outputs.consent_tables) {
    ordered_json t;
    t["regime"] = to_label(table.regime);
    ordered_json mechanisms = ordered_json::array();
    for (Mechanism m : table.mechanisms) mechanisms.push_back(to_label(m));
    t["mechanisms"] = std::move(mechanisms);
    ordered_json rows = ordered_json::array();
    for (const auto& persona : Persona::all()) {
      if (persona.is_control()) continue;
      ordered_json row;
      row["persona"] = persona.label();
      ordered_json cells = ordered_json::array();
      auto rit = table.rows.find(persona);
      for (Mechanism m : table.mechanisms) {
        const ConsentCell* cell = nullptr;
        if (rit != table.rows.end()) {
          auto cit = rit->second.find(m);
          if (cit != rit->second.end()) cell = &cit->second;
        }
        if (!cell || !cell->test) {
          cells.push_back(nullptr);
          continue;
        }
        ordered_json c;
        c["p"] = cell->test->p;
        if (cell->effect.defined) {
          c["e"] = cell->effect.r;
          c["tier"] = stats::tier_label(cell->effect.tier);
        } else {
          c["e"] = nullptr;
        }
        c["n_optout"] = cell->n_optout;
        c["n_optin"] = cell->n_optin;
        cells.push_back(std::move(c));
      }
      row["cells"] = std::move(cells);
      rows.push_back(std::move(row));
    }
    t["rows"] = std::move(rows);
    consent_tables.push_back(std::move(t));
  }
  doc["consent_tables"] = std::move(consent_tables);

  ordered_json unknown_tables = ordered_json::array();
  for (const auto& table : outputs.unknown_tables) {
    ordered_json t;
    t["regime"] = to_label(table.regime);
    ordered_json mechanisms = ordered_json::array();
    for (Mechanism m : table.mechanisms) mechanisms.push_back(to_label(m));
    t["mechanisms"] = std::move(mechanisms);
    ordered_json rows = ordered_json::array();
    for (const auto& persona : Persona::all()) {
      if (persona.is_control()) continue;
      ordered_json row;
      row["persona"] = persona.label();
      ordered_json cells = ordered_json::array();
      auto rit = table.rows.find(persona);
      for (Mechanism m : table.mechanisms) {
        const BidCell* cell = nullptr;
        if (rit != table.rows.end()) {
          auto cit = rit->second.find(m);
          if (cit != rit->second.end()) cell = &cit->second;
        }
        if (cell && cell->summary) {
          cells.push_back(summary_to_json(*cell->summary, cell->marker));
        } else {
          cells.push_back(nullptr);
        }
      }
      row["cells"] = std::move(cells);
      rows.push_back(std::move(row));
    }
    t["rows"] = std::move(rows);
    ordered_json control = ordered_json::array();
    for (Mechanism m : table.mechanisms) {
      auto cit = table.control.find(m);
      if (cit != table.control.end() && cit->second) {
        control.push_back(summary_to_json(*cit->second, std::nullopt));
      } else {
        control.push_back(nullptr);
      }
    }
    t["control"] = std::move(control);
    unknown_tables.push_back(std::move(t));
  }
  doc["unknown_tables"] = std::move(unknown_tables);

  ordered_json prevalence;
  ordered_json regimes = ordered_json::array();
  for (Regime r : outputs.prevalence.regimes) regimes.push_back(to_label(r));
  prevalence["regimes"] = std::move(regimes);
  ordered_json prows = ordered_json::array();
  for (const auto& row : outputs.prevalence.rows) {
    ordered_json r;
    r["advertiser"] = row.advertiser;
    ordered_json pcts = ordered_json::array();
    for (Regime regime : outputs.prevalence.regimes) {
      auto it = row.pct.find(regime);
      if (it != row.pct.end()) {
        pcts.push_back(it->second);
      } else {
        pcts.push_back(nullptr);
      }
    }
    r["pct"] = std::move(pcts);
    prows.push_back(std::move(r));
  }
  prevalence["rows"] = std::move(prows);
  doc["prevalence"] = std::move(prevalence);

  doc["sync_stats"] = sync_stats_to_json(outputs.sync_table);
  return doc;
}

ordered_json sync_stats_to_json(const sync::SyncStatsTable& table) {
  ordered_json sync_tables = ordered_json::array();
  for (const auto& [regime, personas] : table) {
    // Columns: union of (mechanism, consent) across the regime.
    std::set<std::pair<Mechanism, Consent>> column_set;
    for (const auto& [persona, cells] : personas) {
      for (const auto& [mc, cell] : cells) column_set.insert(mc);
    }
    ordered_json t;
    t["regime"] = to_label(regime);
    ordered_json columns = ordered_json::array();
    for (const auto& [m, c] : column_set) {
      columns.push_back({{"mechanism", to_label(m)}, {"consent", to_label(c)}});
    }
    t["columns"] = std::move(columns);
    ordered_json rows = ordered_json::array();
    for (const auto& persona : Persona::all()) {
      if (persona.is_control()) continue;  // sync tables list categories only
      auto pit = personas.find(persona);
      ordered_json row;
      row["persona"] = persona.label();
      ordered_json cells = ordered_json::array();
      for (const auto& mc : column_set) {
        const sync::SyncStatsCell* cell = nullptr;
        if (pit != personas.end()) {
          auto cit = pit->second.find(mc);
          if (cit != pit->second.end()) cell = &cit->second;
        }
        if (!cell) {
          cells.push_back(nullptr);
        } else {
          ordered_json c;
          c["evt"] = cell->events;
          c["participating"] = cell->participating;
          c["observed"] = cell->observed;
          cells.push_back(std::move(c));
        }
      }
      row["cells"] = std::move(cells);
      rows.push_back(std::move(row));
    }
    t["rows"] = std::move(rows);
    sync_tables.push_back(std::move(t));
  }
  return sync_tables;
}

std::map<std::string, std::string> render_tables(const json& doc, ReportFormat format) {
  std::map<std::string, std::string> files;
  const bool markdown = format == ReportFormat::Markdown;

  auto emit = [&](const std::string& stem, const TextTable& table, const json& tdoc) {
    switch (format) {
      case ReportFormat::Csv: files[stem + ".csv"] = to_csv(table); break;
      case ReportFormat::Markdown: files[stem + ".md"] = to_markdown(table); break;
      case ReportFormat::Jsonl: files[stem + ".jsonl"] = to_jsonl(tdoc); break;
    }
  };

  if (doc.contains("bid_tables")) {
    for (const auto& t : doc["bid_tables"]) {
      std::string stem = "bid_table_" + lower(t["regime"].get<std::string>());
      emit(stem, bid_table_text(t, markdown), t);
    }
  }
  if (doc.contains("consent_tables")) {
    for (const auto& t : doc["consent_tables"]) {
      std::string stem = "consent_tests_" + lower(t["regime"].get<std::string>());
      emit(stem, consent_table_text(t), t);
    }
  }
  if (doc.contains("unknown_tables")) {
    for (const auto& t : doc["unknown_tables"]) {
      std::string stem = "unknown_advertisers_" + lower(t["regime"].get<std::string>());
      emit(stem, unknown_table_text(t, markdown), t);
    }
  }
  if (doc.contains("prevalence")) {
    emit("prevalence", prevalence_text(doc["prevalence"]), doc["prevalence"]);
  }
  if (doc.contains("sync_stats")) {
    for (const auto& t : doc["sync_stats"]) {
      std::string stem = "sync_stats_" + lower(t["regime"].get<std::string>());
      emit(stem, sync_stats_text(t), t);
    }
  }
  return files;
}

std::string render_verdicts_jsonl(std::span<const AuditVerdict> verdicts) {
  std::string out;
  for (const auto& v : verdicts) {
    ordered_json obj;
    obj["regime"] = to_label(v.regime);
    obj["mechanism"] = to_label(v.mechanism);
    obj["persona"] = v.persona.label();
    obj["flagged"] = v.flagged;
    obj["optout"] = v.optout ? summary_to_json(*v.optout, v.optout_marker)
                             : ordered_json(nullptr);
    obj["optin"] =
        v.optin ? summary_to_json(*v.optin, v.optin_marker) : ordered_json(nullptr);
    obj["consent_test"] =
        v.consent_test ? utest_to_json(*v.consent_test) : ordered_json(nullptr);
    obj["effect"] = effect_to_json(v.effect);
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::string render_advertiser_verdicts_jsonl(std::span<const AdvertiserVerdict> verdicts) {
  std::string out;
  for (const auto& v : verdicts) {
    ordered_json obj;
    obj["advertiser"] = v.advertiser;
    obj["flagged"] = v.flagged;
    obj["processing_signal"] = v.processing_signal;
    obj["sharing_signal"] = v.sharing_signal;
    obj["optout_sync_events"] = v.optout_sync_events;
    ordered_json evidence = ordered_json::array();
    for (const auto& ev : v.evidence) {
      ordered_json e;
      e["regime"] = to_label(ev.regime);
      e["mechanism"] = to_label(ev.mechanism);
      e["n_informed_optout"] = ev.n_informed_optout;
      e["n_control_optout"] = ev.n_control_optout;
      e["n_informed_optin"] = ev.n_informed_optin;
      e["vs_control"] =
          ev.vs_control ? utest_to_json(*ev.vs_control) : ordered_json(nullptr);
      e["vs_optin"] = ev.vs_optin ? utest_to_json(*ev.vs_optin) : ordered_json(nullptr);
      e["targeting"] = ev.targeting;
      e["consent_insensitive"] = ev.consent_insensitive;
      evidence.push_back(std::move(e));
    }
    obj["evidence"] = std::move(evidence);
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::string render_sync_events_jsonl(std::span<const sync::SyncEvent> syncs) {
  std::string out;
  for (const auto& s : syncs) {
    ordered_json obj;
    obj["event_id"] = s.event_id;
    obj["sender"] = s.sender;
    obj["receiver"] = s.receiver;
    obj["name"] = s.identifier.name;
    obj["value"] = s.identifier.value;
    obj["source"] = s.identifier.source == sync::IdSource::CookieSet
                        ? "CookieSet"
                        : "NonStandardHeader";
    obj["encoding"] = sync::to_label(s.encoding);
    obj["channel"] = sync::to_label(s.channel);
    out += obj.dump();
    out += '\n';
  }
  return out;
}

}  // namespace caudit::audit
