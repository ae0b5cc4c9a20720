#include "caudit/sync_detector.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "caudit/digest.hpp"
#include "caudit/url.hpp"

namespace caudit::sync {

namespace {

// RFC 9110 / common standard fields, lowercase. Anything else is treated as
// non-standard and mined for identifiers.
const std::set<std::string_view>& standard_headers() {
  static const std::set<std::string_view> s = {
      "accept", "accept-charset", "accept-encoding", "accept-language",
      "accept-ranges", "age", "allow", "alt-svc", "authorization",
      "cache-control", "connection", "content-disposition", "content-encoding",
      "content-language", "content-length", "content-location", "content-range",
      "content-security-policy", "content-type", "cookie", "date", "dnt", "etag",
      "expect", "expires", "forwarded", "from", "host", "if-match",
      "if-modified-since", "if-none-match", "if-range", "if-unmodified-since",
      "keep-alive", "last-modified", "link", "location", "max-forwards", "origin",
      "pragma", "proxy-authenticate", "proxy-authorization", "range", "referer",
      "referrer-policy", "retry-after", "sec-fetch-dest", "sec-fetch-mode",
      "sec-fetch-site", "sec-fetch-user", "server", "set-cookie",
      "strict-transport-security", "te", "trailer", "transfer-encoding",
      "upgrade", "upgrade-insecure-requests", "user-agent", "vary", "via",
      "warning", "www-authenticate", "x-content-type-options", "x-frame-options",
      "x-xss-protection"};
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// yyyy-mm-dd / yyyy/mm/dd / dd-mm-yyyy shapes, optionally with a time suffix.
bool looks_like_date(std::string_view v) {
  auto digit_run = [&](size_t pos, size_t len) {
    if (pos + len > v.size()) return false;
    for (size_t i = pos; i < pos + len; ++i) {
      if (!std::isdigit(static_cast<unsigned char>(v[i]))) return false;
    }
    return true;
  };
  auto sep = [&](size_t pos) {
    return pos < v.size() && (v[pos] == '-' || v[pos] == '/' || v[pos] == '.');
  };
  if (digit_run(0, 4) && sep(4) && digit_run(5, 2) && sep(7) && digit_run(8, 2)) return true;
  if (digit_run(0, 2) && sep(2) && digit_run(3, 2) && sep(5) && digit_run(6, 4)) return true;
  // RFC 1123 style: "Mon, 02 Jan 2006 ..."
  static const std::array<std::string_view, 7> days = {"mon", "tue", "wed", "thu",
                                                       "fri", "sat", "sun"};
  if (v.size() > 4 && v[3] == ',') {
    std::string head = lower(v.substr(0, 3));
    for (auto d : days) {
      if (head == d) return true;
    }
  }
  return false;
}

bool looks_like_locale(std::string_view v) {
  if (v.size() == 2) {
    return std::isalpha(static_cast<unsigned char>(v[0])) &&
           std::isalpha(static_cast<unsigned char>(v[1]));
  }
  if (v.size() == 5 && (v[2] == '-' || v[2] == '_')) {
    return std::isalpha(static_cast<unsigned char>(v[0])) &&
           std::isalpha(static_cast<unsigned char>(v[1])) &&
           std::isalpha(static_cast<unsigned char>(v[3])) &&
           std::isalpha(static_cast<unsigned char>(v[4]));
  }
  return false;
}

// Composite cookie values carry sub-fields; identifiers hide inside.
const std::string_view kValueDelimiters = "&=:|;,";

std::vector<std::string_view> split_value(std::string_view value) {
  std::vector<std::string_view> parts;
  size_t start = 0;
  for (size_t i = 0; i <= value.size(); ++i) {
    if (i == value.size() || kValueDelimiters.find(value[i]) != std::string_view::npos) {
      if (i > start) parts.push_back(value.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

// Matching covers more spellings of Base64 than the canonical token:
// standard and URL-safe alphabets, with the unpadded form subsuming padded
// occurrences under substring search.
struct MatchToken {
  std::string token;
  SyncEncoding encoding;
};

std::vector<MatchToken> match_tokens(std::string_view value) {
  std::vector<MatchToken> tokens;
  tokens.push_back({std::string(value), SyncEncoding::Plain});
  std::string b64_std = base64_encode(value, Base64Alphabet::Standard, false);
  std::string b64_url = base64_encode(value, Base64Alphabet::UrlSafe, false);
  tokens.push_back({b64_std, SyncEncoding::Base64});
  if (b64_url != b64_std) tokens.push_back({b64_url, SyncEncoding::Base64});
  tokens.push_back({sha1_hex(value), SyncEncoding::SHA1});
  tokens.push_back({sha256_hex(value), SyncEncoding::SHA256});
  return tokens;
}

struct EventIndex {
  std::unordered_map<std::string_view, size_t> by_id;
  std::vector<std::string> haystack_url;     // path + query
  std::vector<std::string> haystack_header;  // request header values, joined
};

EventIndex build_index(std::span<const HttpEvent> events) {
  EventIndex idx;
  idx.by_id.reserve(events.size());
  idx.haystack_url.resize(events.size());
  idx.haystack_header.resize(events.size());
  for (size_t i = 0; i < events.size(); ++i) {
    idx.by_id.emplace(events[i].event_id, i);
    if (auto parsed = parse_url(events[i].url)) {
      idx.haystack_url[i] = parsed->path_and_query();
    }
    std::string joined;
    for (const auto& [name, v] : events[i].request_headers) {
      (void)name;
      joined += v;
      joined += '\n';
    }
    idx.haystack_header[i] = std::move(joined);
  }
  return idx;
}

// Redirect ancestors of an event, nearest first. Depth-capped; parser
// guarantees same-session linkage but cycles are still cut off defensively.
std::vector<size_t> ancestors(const EventIndex& idx, std::span<const HttpEvent> events,
                              size_t i) {
  std::vector<size_t> chain;
  const HttpEvent* cur = &events[i];
  while (cur->redirect_from && chain.size() < 32) {
    auto it = idx.by_id.find(*cur->redirect_from);
    if (it == idx.by_id.end()) break;
    chain.push_back(it->second);
    cur = &events[it->second];
  }
  return chain;
}

}  // namespace

std::string_view to_label(SyncEncoding e) {
  switch (e) {
    case SyncEncoding::Plain: return "Plain";
    case SyncEncoding::Base64: return "Base64";
    case SyncEncoding::SHA1: return "SHA1";
    case SyncEncoding::SHA256: return "SHA256";
  }
  return "";
}

std::string_view to_label(SyncChannel c) {
  switch (c) {
    case SyncChannel::UrlComponent: return "UrlComponent";
    case SyncChannel::Header: return "Header";
    case SyncChannel::RedirectChain: return "RedirectChain";
  }
  return "";
}

std::optional<SyncEncoding> encoding_from_label(std::string_view s) {
  if (s == "Plain") return SyncEncoding::Plain;
  if (s == "Base64") return SyncEncoding::Base64;
  if (s == "SHA1") return SyncEncoding::SHA1;
  if (s == "SHA256") return SyncEncoding::SHA256;
  return std::nullopt;
}

std::optional<SyncChannel> channel_from_label(std::string_view s) {
  if (s == "UrlComponent") return SyncChannel::UrlComponent;
  if (s == "Header") return SyncChannel::Header;
  if (s == "RedirectChain") return SyncChannel::RedirectChain;
  return std::nullopt;
}

double shannon_entropy_bits(std::string_view value) {
  if (value.empty()) return 0.0;
  std::array<size_t, 256> counts{};
  for (unsigned char c : value) ++counts[c];
  double h = 0.0;
  const double n = static_cast<double>(value.size());
  for (size_t c : counts) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

bool is_denied_constant(std::string_view value) {
  static const std::set<std::string_view> denied = {
      "true",      "false", "yes",  "no",   "null", "undefined", "none",
      "accepted",  "denied", "gmt",  "utc",  "unknown", "default", "optout",
      "opt-out",   "optin", "opt-in", "granted", "rejected", "necessary"};
  std::string v = lower(value);
  if (denied.count(v)) return true;
  if (looks_like_locale(v)) return true;
  if (looks_like_date(value)) return true;
  return false;
}

bool is_standard_header(std::string_view name) {
  return standard_headers().count(lower(name)) > 0;
}

std::vector<IdentifierCandidate> extract_identifiers(std::span<const HttpEvent> events,
                                                     const DetectorConfig& cfg,
                                                     ExtractionDiagnostics* diag) {
  ExtractionDiagnostics local;
  // (owner, name) -> candidate; later events overwrite earlier values.
  std::map<std::pair<std::string, std::string>, IdentifierCandidate> latest;

  auto consider = [&](const std::string& owner, const std::string& base_name,
                      std::string_view raw, IdSource source) {
    auto parts = split_value(raw);
    for (size_t k = 0; k < parts.size(); ++k) {
      std::string_view part = parts[k];
      if (part.size() < cfg.min_id_length) {
        ++local.too_short;
        continue;
      }
      if (is_denied_constant(part)) {
        ++local.deny_listed;
        continue;
      }
      if (shannon_entropy_bits(part) < cfg.min_entropy_bits) {
        ++local.low_entropy;
        continue;
      }
      std::string name = base_name;
      if (parts.size() > 1) name += "[" + std::to_string(k) + "]";
      IdentifierCandidate cand{owner, name, std::string(part), source};
      latest[{owner, name}] = std::move(cand);
    }
  };

  for (const auto& ev : events) {
    for (const auto& [name, value] : ev.cookies_set) {
      consider(ev.party, name, value, IdSource::CookieSet);
    }
    for (const auto& [name, value] : ev.request_headers) {
      if (!is_standard_header(name)) {
        consider(ev.party, name, value, IdSource::NonStandardHeader);
      }
    }
    for (const auto& [name, value] : ev.response_headers) {
      if (!is_standard_header(name)) {
        consider(ev.party, name, value, IdSource::NonStandardHeader);
      }
    }
  }

  std::vector<IdentifierCandidate> out;
  out.reserve(latest.size());
  for (auto& [key, cand] : latest) out.push_back(std::move(cand));
  if (diag) *diag = local;
  return out;
}

std::map<SyncEncoding, std::string> encode_variants(std::string_view value) {
  if (value.empty()) {
    throw std::invalid_argument("encode_variants: value must be non-empty");
  }
  return {
      {SyncEncoding::Plain, std::string(value)},
      {SyncEncoding::Base64, base64_encode(value, Base64Alphabet::Standard, true)},
      {SyncEncoding::SHA1, sha1_hex(value)},
      {SyncEncoding::SHA256, sha256_hex(value)},
  };
}

std::vector<SyncEvent> detect_syncs(std::span<const HttpEvent> events,
                                    std::span<const IdentifierCandidate> ids,
                                    const DetectorConfig& cfg, Exec exec) {
  EventIndex idx = build_index(events);

  // Token table is shared across events; tokens below the length floor never
  // match (short plain values would make every id a false-positive factory).
  struct IdTokens {
    const IdentifierCandidate* id;
    std::vector<MatchToken> tokens;
  };
  std::vector<IdTokens> table;
  table.reserve(ids.size());
  for (const auto& id : ids) {
    if (id.value.size() < cfg.min_id_length) continue;
    table.push_back({&id, match_tokens(id.value)});
  }

  std::vector<std::vector<SyncEvent>> per_event(events.size());
  const auto n = static_cast<std::ptrdiff_t>(events.size());

  auto scan_event = [&](size_t i) {
    const HttpEvent& ev = events[i];
    std::vector<size_t> chain;  // lazily computed
    bool chain_ready = false;
    for (const auto& [id, tokens] : table) {
      if (ev.party == id->owner) continue;
      // Best channel per encoding for this (event, id).
      std::map<SyncEncoding, SyncChannel> found;
      for (const auto& tok : tokens) {
        if (found.count(tok.encoding)) continue;
        if (idx.haystack_url[i].find(tok.token) != std::string::npos) {
          found[tok.encoding] = SyncChannel::UrlComponent;
          continue;
        }
        if (idx.haystack_header[i].find(tok.token) != std::string::npos) {
          found[tok.encoding] = SyncChannel::Header;
          continue;
        }
        if (!chain_ready) {
          chain = ancestors(idx, events, i);
          chain_ready = true;
        }
        for (size_t anc : chain) {
          if (idx.haystack_url[anc].find(tok.token) != std::string::npos) {
            found[tok.encoding] = SyncChannel::RedirectChain;
            break;
          }
        }
      }
      for (const auto& [encoding, channel] : found) {
        per_event[i].push_back(
            SyncEvent{id->owner, ev.party, *id, encoding, channel, ev.event_id});
      }
    }
  };

  if (exec == Exec::Parallel && effective_threads(exec) > 1) {
#pragma omp parallel for schedule(dynamic, 16) num_threads(effective_threads(exec))
    for (std::ptrdiff_t i = 0; i < n; ++i) scan_event(static_cast<size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) scan_event(static_cast<size_t>(i));
  }

  std::vector<SyncEvent> out;
  for (auto& v : per_event) {
    out.insert(out.end(), std::make_move_iterator(v.begin()),
               std::make_move_iterator(v.end()));
  }
  std::sort(out.begin(), out.end(), [](const SyncEvent& a, const SyncEvent& b) {
    return std::tie(a.event_id, a.encoding, a.sender, a.identifier.name,
                    a.identifier.value) < std::tie(b.event_id, b.encoding, b.sender,
                                                   b.identifier.name, b.identifier.value);
  });
  return out;
}

SyncStatsTable sync_stats(std::span<const SyncEvent> syncs,
                          const ingest::SessionMap& sessions) {
  struct ConfigData {
    std::set<std::string> observed;
    std::set<std::string> participating;
    size_t events = 0;
  };
  using ConfigKey = std::tuple<Regime, Persona, Mechanism, Consent>;
  std::map<ConfigKey, ConfigData> data;

  // Observed advertisers per configuration come from the bid records; HTTP
  // third parties stand in when a configuration carries no bids at all.
  std::map<std::string, ConfigKey> event_to_config;
  for (const auto& [key, session] : sessions) {
    ConfigKey ck{key.regime, key.persona, key.mechanism, key.consent};
    auto& d = data[ck];
    for (const auto& b : session.bids) d.observed.insert(b.advertiser);
    for (const auto& e : session.events) event_to_config[e.event_id] = ck;
  }
  for (const auto& [key, session] : sessions) {
    ConfigKey ck{key.regime, key.persona, key.mechanism, key.consent};
    auto& d = data[ck];
    if (!d.observed.empty()) continue;
    for (const auto& e : session.events) d.observed.insert(e.party);
  }

  for (const auto& s : syncs) {
    auto it = event_to_config.find(s.event_id);
    if (it == event_to_config.end()) continue;
    auto& d = data[it->second];
    ++d.events;
    d.participating.insert(s.sender);
    d.participating.insert(s.receiver);
  }

  SyncStatsTable table;
  for (const auto& [ck, d] : data) {
    auto [regime, persona, mechanism, consent] = ck;
    SyncStatsCell cell;
    cell.events = d.events;
    cell.observed = d.observed.size();
    for (const auto& p : d.participating) {
      if (d.observed.count(p)) ++cell.participating;
    }
    table[regime][persona][{mechanism, consent}] = cell;
  }
  return table;
}

}  // namespace caudit::sync
