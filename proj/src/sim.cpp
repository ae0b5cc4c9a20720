#include "caudit/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "caudit/digest.hpp"
#include "caudit/rng.hpp"

namespace caudit::sim {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int64_t kBaseEpochMs = 1609459200000;  // 2021-01-01T00:00:00Z

std::string short_name(const std::string& identity) {
  auto dot = identity.find('.');
  return dot == std::string::npos ? identity : identity.substr(0, dot);
}

std::string hex16(uint64_t v) {
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = hex[v & 0xf];
    v >>= 4;
  }
  return out;
}

// 128-bit browser identifier; long enough that its per-character entropy
// sits well above the detector's candidate floor.
std::string uid32(RandomStream stream) {
  std::string out = hex16(stream.next_u64());
  out += hex16(stream.next_u64());
  return out;
}

std::string sync_token(const std::string& uid, sync::SyncEncoding enc) {
  switch (enc) {
    case sync::SyncEncoding::Plain: return uid;
    case sync::SyncEncoding::Base64:
      return base64_encode(uid, Base64Alphabet::Standard, true);
    case sync::SyncEncoding::SHA1: return sha1_hex(uid);
    case sync::SyncEncoding::SHA256: return sha256_hex(uid);
  }
  return uid;
}

// Everything arm-independent, computed once per run.
struct World {
  const SimConfig* config = nullptr;
  uint64_t seed = 0;
  std::string run_id;
  std::vector<std::string> site_domain;
  std::vector<std::vector<size_t>> site_advs;   // ascending advertiser indices
  std::vector<std::vector<bool>> covers;        // [adv][persona index]
  std::vector<std::vector<bool>> knowledge;     // after one-hop propagation
  std::map<Persona, std::set<std::string>> leaked;
  std::vector<KnowledgeEdge> knowledge_edges;
  std::map<std::string, size_t> adv_index;
};

World build_world(const SimConfig& config, uint64_t seed) {
  World w;
  w.config = &config;
  w.seed = seed;
  w.run_id = sha256_hex(scenario_to_json(config).dump() + "#" + std::to_string(seed))
                 .substr(0, 16);

  const size_t nadv = config.advertisers.size();
  for (size_t a = 0; a < nadv; ++a) w.adv_index[config.advertisers[a].identity] = a;

  w.site_domain.resize(config.sites);
  w.site_advs.resize(config.sites);
  for (size_t k = 0; k < config.sites; ++k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "pub-site-%02zu.com", k);
    w.site_domain[k] = buf;
    for (size_t a = 0; a < nadv; ++a) {
      double u = StreamKey(seed).tag("site-adv").tag(k).tag(a).stream().next_uniform();
      if (u < config.site_coverage) w.site_advs[k].push_back(a);
    }
    if (w.site_advs[k].empty()) w.site_advs[k].push_back(k % nadv);
  }

  // Phase 1: persona building. Advertisers serving a category's sites see the
  // persona and the interest leaks to them.
  w.covers.assign(nadv, std::vector<bool>(Persona::kCount, false));
  for (size_t a = 0; a < nadv; ++a) {
    const auto& spec = config.advertisers[a];
    for (const auto& persona : config.personas) {
      double u = StreamKey(seed)
                     .tag("interest")
                     .tag(spec.identity)
                     .tag(persona.index())
                     .stream()
                     .next_uniform();
      w.covers[a][persona.index()] = u < spec.interest_coverage;
    }
  }
  w.leaked[Persona::control()] = {};
  for (const auto& persona : config.personas) {
    auto& set = w.leaked[persona];
    for (size_t a = 0; a < nadv; ++a) {
      if (w.covers[a][persona.index()]) set.insert(config.advertisers[a].identity);
    }
  }

  // One-hop propagation: sharers forward what they learned to partners,
  // consent notwithstanding.
  w.knowledge = w.covers;
  for (size_t a = 0; a < nadv; ++a) {
    const auto& spec = config.advertisers[a];
    if (spec.profile != ComplianceProfile::NonCompliantSharer) continue;
    for (const auto& persona : config.personas) {
      if (!w.covers[a][persona.index()]) continue;
      for (const auto& edge : spec.partners) {
        size_t b = w.adv_index.at(edge.partner);
        w.knowledge[b][persona.index()] = true;
        w.knowledge_edges.push_back({spec.identity, edge.partner, persona});
      }
    }
  }
  return w;
}

bool uses_knowledge(ComplianceProfile profile, Consent consent) {
  if (profile == ComplianceProfile::Compliant) return consent == Consent::OptIn;
  return true;
}

bool syncs_under(ComplianceProfile profile, Consent consent) {
  switch (profile) {
    case ComplianceProfile::NonCompliantSharer: return true;
    case ComplianceProfile::Compliant: return consent == Consent::OptIn;
    case ComplianceProfile::NonCompliantProcessor: return false;
  }
  return false;
}

struct ArmSpec {
  size_t index = 0;
  Persona persona;
  Regime regime = Regime::GDPR;
  Mechanism mechanism = Mechanism::OneTrust;
  Consent consent = Consent::OptOut;
};

struct ArmOutput {
  std::vector<BidRecord> bids;
  std::vector<HttpEvent> events;
  std::vector<PlantedFlow> planted;
};

ArmOutput simulate_arm(const World& w, const ArmSpec& arm) {
  const SimConfig& config = *w.config;
  ArmOutput out;
  const SessionKey base_key{arm.persona, arm.regime, arm.mechanism, arm.consent, 1};

  auto uid_of = [&](size_t a) {
    return uid32(StreamKey(w.seed)
                     .tag("uid")
                     .tag(arm.persona.index())
                     .tag(static_cast<uint64_t>(arm.regime))
                     .tag(static_cast<uint64_t>(arm.mechanism))
                     .tag(static_cast<uint64_t>(arm.consent))
                     .tag(config.advertisers[a].identity)
                     .stream());
  };

  RandomStream waits = StreamKey(w.seed)
                           .tag("wait")
                           .tag(arm.persona.index())
                           .tag(static_cast<uint64_t>(arm.regime))
                           .tag(static_cast<uint64_t>(arm.mechanism))
                           .tag(static_cast<uint64_t>(arm.consent))
                           .stream();
  auto wait_ms = [&] {
    return static_cast<int64_t>(10000.0 + waits.next_uniform() * 20000.0);
  };

  int64_t t = kBaseEpochMs;
  size_t seq = 0;
  auto next_event_id = [&](int iteration, size_t site) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "ev-%03zu-s%02zu-i%d-%05zu", arm.index, site,
                  iteration, seq++);
    return std::string(buf);
  };

  std::vector<bool> uid_known(config.advertisers.size(), false);

  for (size_t k = 0; k < config.sites; ++k) {
    const std::string& site = w.site_domain[k];
    const auto& advs = w.site_advs[k];

    // Consent-registration visit: the CMP records the choice before any bid
    // collection; it contributes nothing to the logs.
    t += wait_ms();

    for (int it = 1; it <= config.iterations; ++it) {
      t += wait_ms();
      SessionKey key = base_key;
      key.iteration = it;
      const std::string page_url =
          "https://" + site + "/page?visit=" + std::to_string(it);

      {
        HttpEvent page;
        page.event_id = next_event_id(it, k);
        page.session = key;
        page.url = page_url;
        page.party = site;
        page.request_headers = {{"User-Agent", "consent-audit-sim/1"}};
        page.response_headers = {{"Content-Type", "text/html"}};
        out.events.push_back(std::move(page));
      }

      // Header-bidding adapters answer from every advertiser on the site.
      for (size_t a : advs) {
        const auto& spec = config.advertisers[a];
        HttpEvent bid;
        bid.event_id = next_event_id(it, k);
        bid.session = key;
        bid.url = "https://" + spec.identity + "/bid?pub=" + site +
                  "&v=" + std::to_string(it);
        bid.party = spec.identity;
        bid.request_headers = {{"Referer", page_url},
                               {"User-Agent", "consent-audit-sim/1"}};
        bid.referrer = page_url;
        if (uid_known[a]) bid.cookies_sent = {{"uid", uid_of(a)}};
        bid.response_headers = {{"Content-Type", "application/json"}};
        bid.cookies_set = {{"uid", uid_of(a)}};
        uid_known[a] = true;
        out.events.push_back(std::move(bid));
      }

      // Bid values: one log-normal draw per slot, uplifted while the
      // advertiser holds usable knowledge of this persona.
      std::vector<RandomStream> bid_streams;
      bid_streams.reserve(advs.size());
      for (size_t a : advs) {
        bid_streams.push_back(StreamKey(w.seed)
                                  .tag("bid")
                                  .tag(arm.persona.index())
                                  .tag(static_cast<uint64_t>(arm.regime))
                                  .tag(static_cast<uint64_t>(arm.mechanism))
                                  .tag(static_cast<uint64_t>(arm.consent))
                                  .tag(k)
                                  .tag(static_cast<uint64_t>(it))
                                  .tag(config.advertisers[a].identity)
                                  .stream());
      }
      for (size_t slot = 0; slot < config.bids_per_visit; ++slot) {
        size_t pick = slot % advs.size();
        size_t a = advs[pick];
        const auto& spec = config.advertisers[a];
        double cpm = std::exp(spec.base_mu + spec.base_sigma *
                                                 bid_streams[pick].next_normal());
        if (w.knowledge[a][arm.persona.index()] &&
            uses_knowledge(spec.profile, arm.consent)) {
          cpm *= spec.uplift;
        }
        BidRecord rec;
        rec.persona = arm.persona;
        rec.site = site;
        rec.advertiser = spec.identity;
        rec.cpm = cpm;
        rec.regime = arm.regime;
        rec.mechanism = arm.mechanism;
        rec.consent = arm.consent;
        rec.iteration = it;
        rec.ts = t;
        out.bids.push_back(std::move(rec));
      }

      // Identifier flows to partners.
      for (size_t a : advs) {
        const auto& spec = config.advertisers[a];
        if (!syncs_under(spec.profile, arm.consent)) continue;
        const std::string uid = uid_of(a);
        for (const auto& edge : spec.partners) {
          const std::string token = sync_token(uid, edge.encoding);
          const std::string src = short_name(spec.identity);
          PlantedFlow flow;
          flow.sender = spec.identity;
          flow.receiver = edge.partner;
          flow.encoding = edge.encoding;
          flow.channel = edge.channel;
          flow.session = key;

          switch (edge.channel) {
            case sync::SyncChannel::UrlComponent: {
              HttpEvent hop;
              hop.event_id = next_event_id(it, k);
              hop.session = key;
              hop.url = "https://" + spec.identity + "/pixel?seq=" + std::to_string(it);
              hop.party = spec.identity;
              hop.request_headers = {{"Referer", page_url}};
              hop.cookies_sent = {{"uid", uid}};
              std::string target =
                  "https://" + edge.partner + "/setuid?src=" + src + "&puid=" + token;
              hop.response_headers = {{"Location", target}};
              std::string hop_id = hop.event_id;
              out.events.push_back(std::move(hop));

              HttpEvent setuid;
              setuid.event_id = next_event_id(it, k);
              setuid.session = key;
              setuid.url = std::move(target);
              setuid.party = edge.partner;
              setuid.request_headers = {{"Referer", page_url}};
              setuid.redirect_from = hop_id;
              flow.event_id = setuid.event_id;
              out.events.push_back(std::move(setuid));
              break;
            }
            case sync::SyncChannel::Header: {
              HttpEvent recv;
              recv.event_id = next_event_id(it, k);
              recv.session = key;
              recv.url = "https://" + edge.partner + "/sync/recv?src=" + src;
              recv.party = edge.partner;
              recv.request_headers = {{"Referer", page_url}, {"X-Sync-Uid", token}};
              flow.event_id = recv.event_id;
              out.events.push_back(std::move(recv));
              break;
            }
            case sync::SyncChannel::RedirectChain: {
              HttpEvent hop;
              hop.event_id = next_event_id(it, k);
              hop.session = key;
              hop.url = "https://" + spec.identity + "/sync/out?u=" + token;
              hop.party = spec.identity;
              hop.request_headers = {{"Referer", page_url}};
              hop.cookies_sent = {{"uid", uid}};
              std::string target = "https://" + edge.partner + "/sync/in?src=" + src;
              hop.response_headers = {{"Location", target}};
              std::string hop_id = hop.event_id;
              out.events.push_back(std::move(hop));

              HttpEvent sink;
              sink.event_id = next_event_id(it, k);
              sink.session = key;
              sink.url = std::move(target);
              sink.party = edge.partner;
              sink.request_headers = {{"Referer", page_url}};
              sink.redirect_from = hop_id;
              flow.event_id = sink.event_id;
              out.events.push_back(std::move(sink));
              break;
            }
          }
          out.planted.push_back(std::move(flow));
        }
      }
    }
  }
  return out;
}

}  // namespace

std::string_view to_label(ComplianceProfile p) {
  switch (p) {
    case ComplianceProfile::Compliant: return "Compliant";
    case ComplianceProfile::NonCompliantProcessor: return "NonCompliantProcessor";
    case ComplianceProfile::NonCompliantSharer: return "NonCompliantSharer";
  }
  return "";
}

std::optional<ComplianceProfile> profile_from_label(std::string_view s) {
  if (s == "Compliant") return ComplianceProfile::Compliant;
  if (s == "NonCompliantProcessor") return ComplianceProfile::NonCompliantProcessor;
  if (s == "NonCompliantSharer") return ComplianceProfile::NonCompliantSharer;
  return std::nullopt;
}

SimConfig scenario_from_json(const json& doc) {
  if (!doc.is_object()) throw SimError("scenario: expected an object");
  SimConfig config;
  config.advertisers.clear();

  if (doc.contains("name")) config.name = doc["name"].get<std::string>();
  if (doc.contains("personas")) {
    config.personas.clear();
    for (const auto& label : doc["personas"]) {
      auto persona = Persona::from_label(label.get<std::string>());
      if (!persona || persona->is_control()) {
        throw SimError("scenario: unknown persona category '" +
                       label.get<std::string>() + "'");
      }
      config.personas.push_back(*persona);
    }
  }
  if (doc.contains("sites")) config.sites = doc["sites"].get<size_t>();
  if (doc.contains("site_coverage")) config.site_coverage = doc["site_coverage"].get<double>();
  if (doc.contains("sites_visited")) config.sites_visited = doc["sites_visited"].get<size_t>();
  if (doc.contains("bids_per_visit"))
    config.bids_per_visit = doc["bids_per_visit"].get<size_t>();
  if (doc.contains("iterations")) config.iterations = doc["iterations"].get<int>();
  if (doc.contains("regimes")) {
    config.regimes.clear();
    for (const auto& label : doc["regimes"]) {
      auto r = regime_from_label(label.get<std::string>());
      if (!r) throw SimError("scenario: unknown regime '" + label.get<std::string>() + "'");
      config.regimes.push_back(*r);
    }
  }
  if (doc.contains("mechanisms")) {
    config.mechanisms.clear();
    for (const auto& label : doc["mechanisms"]) {
      auto m = mechanism_from_label(label.get<std::string>());
      if (!m)
        throw SimError("scenario: unknown mechanism '" + label.get<std::string>() + "'");
      config.mechanisms.push_back(*m);
    }
  }
  if (!doc.contains("advertisers") || !doc["advertisers"].is_array()) {
    throw SimError("scenario: missing advertisers array");
  }
  for (const auto& a : doc["advertisers"]) {
    AdvertiserSpec spec;
    spec.identity = a.at("identity").get<std::string>();
    auto profile = profile_from_label(a.at("profile").get<std::string>());
    if (!profile) {
      throw SimError("scenario: unknown profile for advertiser '" + spec.identity + "'");
    }
    spec.profile = *profile;
    if (a.contains("base_mu")) spec.base_mu = a["base_mu"].get<double>();
    if (a.contains("base_sigma")) spec.base_sigma = a["base_sigma"].get<double>();
    if (a.contains("uplift")) spec.uplift = a["uplift"].get<double>();
    if (a.contains("interest_coverage"))
      spec.interest_coverage = a["interest_coverage"].get<double>();
    if (a.contains("partners")) {
      for (const auto& p : a["partners"]) {
        PartnerEdge edge;
        edge.partner = p.at("identity").get<std::string>();
        if (p.contains("encoding")) {
          auto enc = sync::encoding_from_label(p["encoding"].get<std::string>());
          if (!enc) throw SimError("scenario: unknown encoding in partners");
          edge.encoding = *enc;
        }
        if (p.contains("channel")) {
          auto ch = sync::channel_from_label(p["channel"].get<std::string>());
          if (!ch) throw SimError("scenario: unknown channel in partners");
          edge.channel = *ch;
        }
        spec.partners.push_back(std::move(edge));
      }
    }
    config.advertisers.push_back(std::move(spec));
  }

  std::sort(config.personas.begin(), config.personas.end());
  validate_config(config);
  return config;
}

SimConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ingest::IoError(path, "cannot open scenario");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw SimError("scenario: invalid syntax: " + path);
  return scenario_from_json(doc);
}

ordered_json scenario_to_json(const SimConfig& config) {
  ordered_json doc;
  doc["name"] = config.name;
  ordered_json personas = ordered_json::array();
  for (const auto& p : config.personas) personas.push_back(p.label());
  doc["personas"] = std::move(personas);
  doc["sites"] = config.sites;
  doc["site_coverage"] = config.site_coverage;
  doc["sites_visited"] = config.sites_visited;
  doc["bids_per_visit"] = config.bids_per_visit;
  doc["iterations"] = config.iterations;
  ordered_json regimes = ordered_json::array();
  for (Regime r : config.regimes) regimes.push_back(to_label(r));
  doc["regimes"] = std::move(regimes);
  ordered_json mechanisms = ordered_json::array();
  for (Mechanism m : config.mechanisms) mechanisms.push_back(to_label(m));
  doc["mechanisms"] = std::move(mechanisms);
  ordered_json advertisers = ordered_json::array();
  for (const auto& a : config.advertisers) {
    ordered_json spec;
    spec["identity"] = a.identity;
    spec["profile"] = to_label(a.profile);
    spec["base_mu"] = a.base_mu;
    spec["base_sigma"] = a.base_sigma;
    spec["uplift"] = a.uplift;
    spec["interest_coverage"] = a.interest_coverage;
    ordered_json partners = ordered_json::array();
    for (const auto& e : a.partners) {
      ordered_json edge;
      edge["identity"] = e.partner;
      edge["encoding"] = sync::to_label(e.encoding);
      edge["channel"] = sync::to_label(e.channel);
      partners.push_back(std::move(edge));
    }
    spec["partners"] = std::move(partners);
    advertisers.push_back(std::move(spec));
  }
  doc["advertisers"] = std::move(advertisers);
  return doc;
}

void validate_config(const SimConfig& config) {
  if (config.personas.empty()) throw SimError("scenario: personas must be non-empty");
  for (size_t i = 1; i < config.personas.size(); ++i) {
    if (config.personas[i] == config.personas[i - 1]) {
      throw SimError("scenario: duplicate persona category");
    }
  }
  if (config.sites == 0) throw SimError("scenario: sites must be >= 1");
  if (!(config.site_coverage > 0.0) || config.site_coverage > 1.0) {
    throw SimError("scenario: site_coverage must be in (0, 1]");
  }
  if (config.bids_per_visit == 0) throw SimError("scenario: bids_per_visit must be >= 1");
  if (config.iterations < 1 || config.iterations > 3) {
    throw SimError("scenario: iterations must be in [1, 3]");
  }
  if (config.regimes.empty()) throw SimError("scenario: regimes must be non-empty");
  if (config.mechanisms.empty()) throw SimError("scenario: mechanisms must be non-empty");
  if (config.advertisers.empty()) throw SimError("scenario: advertisers must be non-empty");

  std::set<std::string> identities;
  for (const auto& a : config.advertisers) {
    if (a.identity.empty()) throw SimError("scenario: advertiser identity must be non-empty");
    if (!identities.insert(a.identity).second) {
      throw SimError("scenario: duplicate advertiser '" + a.identity + "'");
    }
    if (a.uplift < 1.0) {
      throw SimError("scenario: uplift must be >= 1 for '" + a.identity + "'");
    }
    if (a.base_sigma < 0.0) {
      throw SimError("scenario: base_sigma must be >= 0 for '" + a.identity + "'");
    }
    if (a.interest_coverage < 0.0 || a.interest_coverage > 1.0) {
      throw SimError("scenario: interest_coverage must be in [0, 1] for '" + a.identity +
                     "'");
    }
  }
  for (const auto& a : config.advertisers) {
    for (const auto& e : a.partners) {
      if (e.partner == a.identity) {
        throw SimError("scenario: '" + a.identity + "' lists itself as a partner");
      }
      if (!identities.count(e.partner)) {
        throw SimError("scenario: '" + a.identity + "' lists unknown partner '" +
                       e.partner + "'");
      }
    }
  }
}

SimResult simulate(const SimConfig& config, uint64_t seed, Exec exec) {
  validate_config(config);
  World w = build_world(config, seed);

  std::vector<ArmSpec> arms;
  std::vector<Persona> personas = config.personas;
  personas.push_back(Persona::control());
  for (const auto& persona : personas) {
    for (Regime regime : config.regimes) {
      for (Mechanism mechanism : config.mechanisms) {
        for (Consent consent : kAllConsents) {
          arms.push_back(ArmSpec{arms.size(), persona, regime, mechanism, consent});
        }
      }
    }
  }

  std::vector<ArmOutput> outputs(arms.size());
  const auto n = static_cast<std::ptrdiff_t>(arms.size());
  if (exec == Exec::Parallel && effective_threads(exec) > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(effective_threads(exec))
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      outputs[static_cast<size_t>(i)] = simulate_arm(w, arms[static_cast<size_t>(i)]);
    }
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      outputs[static_cast<size_t>(i)] = simulate_arm(w, arms[static_cast<size_t>(i)]);
    }
  }

  SimResult result;
  result.run_id = w.run_id;
  for (auto& out : outputs) {
    result.bids.insert(result.bids.end(), std::make_move_iterator(out.bids.begin()),
                       std::make_move_iterator(out.bids.end()));
    result.events.insert(result.events.end(),
                         std::make_move_iterator(out.events.begin()),
                         std::make_move_iterator(out.events.end()));
    result.truth.planted.insert(result.truth.planted.end(),
                                std::make_move_iterator(out.planted.begin()),
                                std::make_move_iterator(out.planted.end()));
  }

  std::stable_sort(result.bids.begin(), result.bids.end(),
                   [](const BidRecord& a, const BidRecord& b) {
                     SessionKey ka{a.persona, a.regime, a.mechanism, a.consent, a.iteration};
                     SessionKey kb{b.persona, b.regime, b.mechanism, b.consent, b.iteration};
                     return std::tie(ka, a.site, a.advertiser) <
                            std::tie(kb, b.site, b.advertiser);
                   });

  result.leaked.leaked = w.leaked;
  result.leaked.run_id = w.run_id;
  result.truth.run_id = w.run_id;
  result.truth.leaked = w.leaked;
  result.truth.knowledge_edges = std::move(w.knowledge_edges);
  for (const auto& a : config.advertisers) {
    result.truth.profiles[a.identity] = a.profile;
  }
  return result;
}

ordered_json ground_truth_to_json(const GroundTruth& truth) {
  ordered_json doc;
  doc["format"] = "consent-audit-truth/1";
  doc["run_id"] = truth.run_id;
  ordered_json profiles = ordered_json::object();
  for (const auto& [identity, profile] : truth.profiles) {
    profiles[identity] = to_label(profile);
  }
  doc["profiles"] = std::move(profiles);
  ordered_json leaked = ordered_json::object();
  for (const auto& [persona, advs] : truth.leaked) {
    ordered_json arr = ordered_json::array();
    for (const auto& a : advs) arr.push_back(a);
    leaked[std::string(persona.label())] = std::move(arr);
  }
  doc["leaked"] = std::move(leaked);
  ordered_json edges = ordered_json::array();
  for (const auto& e : truth.knowledge_edges) {
    ordered_json edge;
    edge["from"] = e.from;
    edge["to"] = e.to;
    edge["persona"] = e.persona.label();
    edges.push_back(std::move(edge));
  }
  doc["knowledge_edges"] = std::move(edges);
  ordered_json planted = ordered_json::array();
  for (const auto& f : truth.planted) {
    ordered_json flow;
    flow["sender"] = f.sender;
    flow["receiver"] = f.receiver;
    flow["encoding"] = sync::to_label(f.encoding);
    flow["channel"] = sync::to_label(f.channel);
    ordered_json session;
    session["persona"] = f.session.persona.label();
    session["regime"] = to_label(f.session.regime);
    session["mechanism"] = to_label(f.session.mechanism);
    session["consent"] = to_label(f.session.consent);
    session["iteration"] = f.session.iteration;
    flow["session"] = std::move(session);
    flow["event_id"] = f.event_id;
    planted.push_back(std::move(flow));
  }
  doc["planted"] = std::move(planted);
  return doc;
}

GroundTruth ground_truth_from_json(const json& doc) {
  GroundTruth truth;
  truth.run_id = doc.at("run_id").get<std::string>();
  for (const auto& [identity, label] : doc.at("profiles").items()) {
    auto profile = profile_from_label(label.get<std::string>());
    if (!profile) throw SimError("ground truth: unknown profile for '" + identity + "'");
    truth.profiles[identity] = *profile;
  }
  for (const auto& [label, arr] : doc.at("leaked").items()) {
    auto persona = Persona::from_label(label);
    if (!persona) throw SimError("ground truth: unknown persona '" + label + "'");
    auto& set = truth.leaked[*persona];
    for (const auto& a : arr) set.insert(a.get<std::string>());
  }
  for (const auto& e : doc.at("knowledge_edges")) {
    KnowledgeEdge edge;
    edge.from = e.at("from").get<std::string>();
    edge.to = e.at("to").get<std::string>();
    auto persona = Persona::from_label(e.at("persona").get<std::string>());
    if (!persona) throw SimError("ground truth: unknown persona in knowledge edge");
    edge.persona = *persona;
    truth.knowledge_edges.push_back(std::move(edge));
  }
  for (const auto& f : doc.at("planted")) {
    PlantedFlow flow;
    flow.sender = f.at("sender").get<std::string>();
    flow.receiver = f.at("receiver").get<std::string>();
    flow.encoding = *sync::encoding_from_label(f.at("encoding").get<std::string>());
    flow.channel = *sync::channel_from_label(f.at("channel").get<std::string>());
    const auto& s = f.at("session");
    flow.session.persona = *Persona::from_label(s.at("persona").get<std::string>());
    flow.session.regime = *regime_from_label(s.at("regime").get<std::string>());
    flow.session.mechanism = *mechanism_from_label(s.at("mechanism").get<std::string>());
    flow.session.consent = *consent_from_label(s.at("consent").get<std::string>());
    flow.session.iteration = s.at("iteration").get<int>();
    flow.event_id = f.at("event_id").get<std::string>();
    truth.planted.push_back(std::move(flow));
  }
  return truth;
}

GroundTruth load_ground_truth(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ingest::IoError(path, "cannot open ground-truth file");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw SimError("ground truth: invalid syntax: " + path);
  return ground_truth_from_json(doc);
}

EvalResult evaluate_audit(const audit::AuditOutputs& outputs, const GroundTruth& truth) {
  if (outputs.run_id != truth.run_id) {
    throw SimError("evaluate_audit: run identifier mismatch ('" + outputs.run_id +
                   "' vs '" + truth.run_id + "')");
  }
  std::set<std::string> predicted;
  for (const auto& v : outputs.advertiser_verdicts) {
    if (v.flagged) predicted.insert(v.advertiser);
  }
  std::set<std::string> actual;
  for (const auto& [identity, profile] : truth.profiles) {
    if (profile != ComplianceProfile::Compliant) actual.insert(identity);
  }

  EvalResult r;
  for (const auto& a : predicted) {
    if (actual.count(a)) {
      ++r.tp;
    } else {
      ++r.fp;
    }
  }
  for (const auto& a : actual) {
    if (!predicted.count(a)) ++r.fn;
  }
  size_t universe = truth.profiles.size();
  size_t covered = r.tp + r.fp + r.fn;
  r.tn = universe > covered ? universe - covered : 0;
  if (r.tp + r.fp > 0) {
    r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  }
  r.recall = actual.empty()
                 ? 1.0
                 : static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  return r;
}

}  // namespace caudit::sim
