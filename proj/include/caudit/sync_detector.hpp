#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "caudit/domain.hpp"
#include "caudit/exec.hpp"
#include "caudit/ingest.hpp"

namespace caudit::sync {

enum class IdSource : uint8_t { CookieSet, NonStandardHeader };

// A value that plausibly identifies the browser profile: long enough, not a
// known constant, and with enough per-character entropy.
struct IdentifierCandidate {
  std::string owner;  // registrable domain that set it
  std::string name;
  std::string value;
  IdSource source = IdSource::CookieSet;
};

enum class SyncEncoding : uint8_t { Plain, Base64, SHA1, SHA256 };
enum class SyncChannel : uint8_t { UrlComponent, Header, RedirectChain };

std::string_view to_label(SyncEncoding e);
std::string_view to_label(SyncChannel c);
std::optional<SyncEncoding> encoding_from_label(std::string_view s);
std::optional<SyncChannel> channel_from_label(std::string_view s);

// One detected identifier flow from owner to a different party.
struct SyncEvent {
  std::string sender;
  std::string receiver;
  IdentifierCandidate identifier;
  SyncEncoding encoding = SyncEncoding::Plain;
  SyncChannel channel = SyncChannel::UrlComponent;
  std::string event_id;
};

struct DetectorConfig {
  size_t min_id_length = 8;
  double min_entropy_bits = 2.5;  // Shannon bits per character
};

struct ExtractionDiagnostics {
  size_t too_short = 0;
  size_t deny_listed = 0;
  size_t low_entropy = 0;
};

// Shannon entropy of the character distribution, in bits per character.
double shannon_entropy_bits(std::string_view value);

// Non-identifying constants: booleans, locale tags, date-shaped strings.
bool is_denied_constant(std::string_view value);

// Headers outside the bundled standard-header list count as non-standard
// and are mined for identifiers.
bool is_standard_header(std::string_view name);

// Candidates from cookie-set values and non-standard header fields of one
// profile arm's events. Composite values are split on common delimiters.
// Each (owner, name) keeps its latest value.
std::vector<IdentifierCandidate> extract_identifiers(
    std::span<const HttpEvent> events, const DetectorConfig& cfg = {},
    ExtractionDiagnostics* diag = nullptr);

// The four tokens a flow can carry: the value itself, standard-alphabet
// Base64, and lowercase hex SHA-1 / SHA-256 digests. Value must be non-empty.
std::map<SyncEncoding, std::string> encode_variants(std::string_view value);

// A flow is reported when a token of an identifier occurs in the URL path or
// query, a request header value, or the URL of an earlier hop of the event's
// redirect chain, and the event's party differs from the identifier's owner.
// Base64 matching additionally covers the URL-safe alphabet and unpadded
// forms. Output is sorted by (event_id, encoding, sender, name).
std::vector<SyncEvent> detect_syncs(std::span<const HttpEvent> events,
                                    std::span<const IdentifierCandidate> ids,
                                    const DetectorConfig& cfg = {},
                                    Exec exec = Exec::Parallel);

struct SyncStatsCell {
  size_t events = 0;
  size_t participating = 0;  // advertisers appearing as sender or receiver
  size_t observed = 0;       // advertisers observed in the configuration
};

// Rows keyed (regime, persona, mechanism, consent). Percentage renders as
// participating/observed to one decimal, "--" when observed is zero.
using SyncStatsTable =
    std::map<Regime,
             std::map<Persona, std::map<std::pair<Mechanism, Consent>, SyncStatsCell>>>;

SyncStatsTable sync_stats(std::span<const SyncEvent> syncs,
                          const ingest::SessionMap& sessions);

}  // namespace caudit::sync
