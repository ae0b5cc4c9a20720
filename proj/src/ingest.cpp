#include "caudit/ingest.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "caudit/url.hpp"
#include "json.hpp"

namespace caudit::ingest {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const json* find_field(const json& obj, const char* name, size_t line) {
  auto it = obj.find(name);
  if (it == obj.end()) throw ParseError(line, name, "missing field");
  return &*it;
}

std::string require_string(const json& obj, const char* name, size_t line) {
  const json* f = find_field(obj, name, line);
  if (!f->is_string()) throw ParseError(line, name, "expected string");
  return f->get<std::string>();
}

double require_number(const json& obj, const char* name, size_t line) {
  const json* f = find_field(obj, name, line);
  if (!f->is_number()) throw ParseError(line, name, "expected number");
  return f->get<double>();
}

int64_t require_integer(const json& obj, const char* name, size_t line) {
  const json* f = find_field(obj, name, line);
  if (!f->is_number_integer()) throw ParseError(line, name, "expected integer");
  return f->get<int64_t>();
}

HeaderList parse_pairs(const json& arr, const char* name, size_t line) {
  if (!arr.is_array()) throw ParseError(line, name, "expected array");
  HeaderList out;
  out.reserve(arr.size());
  for (const auto& item : arr) {
    if (item.is_array() && item.size() == 2 && item[0].is_string() && item[1].is_string()) {
      out.emplace_back(item[0].get<std::string>(), item[1].get<std::string>());
    } else if (item.is_object() && item.contains("name") && item.contains("value")) {
      out.emplace_back(item["name"].get<std::string>(), item["value"].get<std::string>());
    } else {
      throw ParseError(line, name, "expected [name, value] pairs");
    }
  }
  return out;
}

ordered_json pairs_to_json(const HeaderList& pairs) {
  ordered_json arr = ordered_json::array();
  for (const auto& [k, v] : pairs) arr.push_back(ordered_json::array({k, v}));
  return arr;
}

// Session labels live in both log formats.
struct SessionLabels {
  std::string persona, regime, mechanism, consent;
  int64_t iteration = 0;
};

// Returns the key, or a rejection reason for unknown enum labels.
std::string resolve_session(const SessionLabels& l, SessionKey* out) {
  auto persona = Persona::from_label(l.persona);
  if (!persona) return "unknown persona '" + l.persona + "'";
  auto regime = regime_from_label(l.regime);
  if (!regime) return "unknown regime '" + l.regime + "'";
  auto mechanism = mechanism_from_label(l.mechanism);
  if (!mechanism) return "unknown mechanism '" + l.mechanism + "'";
  auto consent = consent_from_label(l.consent);
  if (!consent) return "unknown consent '" + l.consent + "'";
  out->persona = *persona;
  out->regime = *regime;
  out->mechanism = *mechanism;
  out->consent = *consent;
  out->iteration = static_cast<int>(l.iteration);
  return {};
}

}  // namespace

BidLog parse_bid_log(std::istream& in) {
  BidLog log;
  std::string line;
  size_t line_no = 0;
  bool saw_header = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != kLogFormatHeader) {
        throw ParseError(1, "header", "expected '" + std::string(kLogFormatHeader) + "'");
      }
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;

    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw ParseError(line_no, "record", "invalid record syntax");
    }

    SessionLabels labels;
    labels.persona = require_string(obj, "persona", line_no);
    labels.regime = require_string(obj, "regime", line_no);
    labels.mechanism = require_string(obj, "mechanism", line_no);
    labels.consent = require_string(obj, "consent", line_no);
    labels.iteration = require_integer(obj, "iteration", line_no);

    BidRecord rec;
    rec.site = require_string(obj, "site", line_no);
    rec.advertiser = require_string(obj, "advertiser", line_no);
    rec.cpm = require_number(obj, "cpm", line_no);
    rec.ts = require_integer(obj, "ts", line_no);

    if (!(rec.cpm >= 0.0) || !std::isfinite(rec.cpm)) {
      throw ParseError(line_no, "cpm", "must be a finite non-negative number");
    }
    if (labels.iteration < 1 || labels.iteration > 3) {
      throw ParseError(line_no, "iteration", "must be in {1,2,3}");
    }
    if (rec.site.empty()) throw ParseError(line_no, "site", "must be non-empty");
    if (rec.advertiser.empty()) throw ParseError(line_no, "advertiser", "must be non-empty");

    SessionKey key;
    std::string reject = resolve_session(labels, &key);
    if (!reject.empty()) {
      log.report.rejections.push_back({line_no, "", reject});
      continue;
    }
    rec.persona = key.persona;
    rec.regime = key.regime;
    rec.mechanism = key.mechanism;
    rec.consent = key.consent;
    rec.iteration = key.iteration;
    log.records.push_back(std::move(rec));
    ++log.report.accepted;
  }

  if (line_no == 0) return log;  // empty stream: empty log
  if (!saw_header) throw ParseError(1, "header", "missing format header");
  return log;
}

void serialize_bid_log(std::span<const BidRecord> records, std::ostream& out) {
  out << kLogFormatHeader << '\n';
  for (const auto& r : records) {
    ordered_json obj;
    obj["persona"] = r.persona.label();
    obj["site"] = r.site;
    obj["advertiser"] = r.advertiser;
    obj["cpm"] = r.cpm;
    obj["regime"] = to_label(r.regime);
    obj["mechanism"] = to_label(r.mechanism);
    obj["consent"] = to_label(r.consent);
    obj["iteration"] = r.iteration;
    obj["ts"] = r.ts;
    out << obj.dump() << '\n';
  }
}

HttpLog parse_http_log(std::istream& in, const PublicSuffixList& psl) {
  HttpLog log;
  std::string header;
  if (!std::getline(in, header)) return log;  // empty stream
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header != kLogFormatHeader) {
    throw ParseError(1, "header", "expected '" + std::string(kLogFormatHeader) + "'");
  }

  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("entries") ||
      !doc["entries"].is_array()) {
    throw ParseError(2, "entries", "expected object with entries array");
  }

  std::set<std::string> seen_ids;
  size_t idx = 0;
  for (const auto& entry : doc["entries"]) {
    ++idx;
    if (!entry.is_object()) throw ParseError(idx, "entry", "expected object");
    std::string event_id = require_string(entry, "event_id", idx);
    if (!seen_ids.insert(event_id).second) {
      throw ParseError(idx, "event_id", "duplicate event_id '" + event_id + "'");
    }

    const json* session = find_field(entry, "session", idx);
    if (!session->is_object()) throw ParseError(idx, "session", "expected object");
    SessionLabels labels;
    labels.persona = require_string(*session, "persona", idx);
    labels.regime = require_string(*session, "regime", idx);
    labels.mechanism = require_string(*session, "mechanism", idx);
    labels.consent = require_string(*session, "consent", idx);
    labels.iteration = require_integer(*session, "iteration", idx);
    if (labels.iteration < 1 || labels.iteration > 3) {
      throw ParseError(idx, "iteration", "must be in {1,2,3}");
    }

    const json* request = find_field(entry, "request", idx);
    const json* response = find_field(entry, "response", idx);
    if (!request->is_object()) throw ParseError(idx, "request", "expected object");
    if (!response->is_object()) throw ParseError(idx, "response", "expected object");

    HttpEvent ev;
    ev.event_id = std::move(event_id);
    ev.url = require_string(*request, "url", idx);
    ev.request_headers = parse_pairs(*find_field(*request, "headers", idx),
                                     "request.headers", idx);
    ev.cookies_sent = parse_pairs(*find_field(*request, "cookies", idx),
                                  "request.cookies", idx);
    ev.response_headers = parse_pairs(*find_field(*response, "headers", idx),
                                      "response.headers", idx);
    ev.cookies_set = parse_pairs(*find_field(*response, "cookies", idx),
                                 "response.cookies", idx);
    if (entry.contains("redirect_from") && !entry["redirect_from"].is_null()) {
      ev.redirect_from = entry["redirect_from"].get<std::string>();
    }
    if (entry.contains("referrer") && !entry["referrer"].is_null()) {
      ev.referrer = entry["referrer"].get<std::string>();
    }

    std::string reject = resolve_session(labels, &ev.session);
    if (!reject.empty()) {
      log.report.rejections.push_back({idx, ev.event_id, reject});
      continue;
    }
    auto parsed = parse_url(ev.url);
    if (!parsed) {
      log.report.rejections.push_back({idx, ev.event_id, "unparseable url '" + ev.url + "'"});
      continue;
    }
    ev.party = psl.registrable_domain(parsed->host);
    log.events.push_back(std::move(ev));
    ++log.report.accepted;
  }

  // Redirect linkage resolves within one session or not at all.
  std::map<std::string, const HttpEvent*> by_id;
  for (const auto& ev : log.events) by_id[ev.event_id] = &ev;
  for (const auto& ev : log.events) {
    if (!ev.redirect_from) continue;
    auto it = by_id.find(*ev.redirect_from);
    if (it == by_id.end()) {
      throw ParseError(0, "redirect_from",
                       "event '" + ev.event_id + "' references missing event '" +
                           *ev.redirect_from + "'");
    }
    if (it->second->session != ev.session) {
      throw ParseError(0, "redirect_from",
                       "event '" + ev.event_id + "' references event '" +
                           *ev.redirect_from + "' in a different session");
    }
  }
  return log;
}

void serialize_http_log(std::span<const HttpEvent> events, std::ostream& out) {
  ordered_json doc;
  ordered_json entries = ordered_json::array();
  for (const auto& ev : events) {
    ordered_json entry;
    entry["event_id"] = ev.event_id;
    ordered_json session;
    session["persona"] = ev.session.persona.label();
    session["regime"] = to_label(ev.session.regime);
    session["mechanism"] = to_label(ev.session.mechanism);
    session["consent"] = to_label(ev.session.consent);
    session["iteration"] = ev.session.iteration;
    entry["session"] = std::move(session);
    ordered_json request;
    request["url"] = ev.url;
    request["headers"] = pairs_to_json(ev.request_headers);
    request["cookies"] = pairs_to_json(ev.cookies_sent);
    entry["request"] = std::move(request);
    ordered_json response;
    response["headers"] = pairs_to_json(ev.response_headers);
    response["cookies"] = pairs_to_json(ev.cookies_set);
    entry["response"] = std::move(response);
    if (ev.redirect_from) entry["redirect_from"] = *ev.redirect_from;
    if (ev.referrer) entry["referrer"] = *ev.referrer;
    entries.push_back(std::move(entry));
  }
  doc["entries"] = std::move(entries);
  out << kLogFormatHeader << '\n' << doc.dump(1) << '\n';
}

SessionMap partition_sessions(std::span<const BidRecord> bids,
                              std::span<const HttpEvent> events) {
  SessionMap map;
  for (const auto& b : bids) {
    SessionKey key{b.persona, b.regime, b.mechanism, b.consent, b.iteration};
    map[key].bids.push_back(b);
  }
  for (const auto& e : events) {
    map[e.session].events.push_back(e);
  }
  return map;
}

BidLog load_bid_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open bid log");
  return parse_bid_log(in);
}

HttpLog load_http_log(const std::string& path, const PublicSuffixList& psl) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open http log");
  return parse_http_log(in, psl);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out << content;
  if (!out) throw IoError(path, "write failed");
}

}  // namespace caudit::ingest
