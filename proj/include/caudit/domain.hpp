#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace caudit {

inline constexpr std::string_view kLogFormatHeader = "consent-audit-log/1";
inline constexpr std::string_view kManifestFormat = "consent-audit-manifest/1";
inline constexpr std::string_view kToolVersion = "1.0.0";

enum class Regime : uint8_t { GDPR, CCPA };
enum class Mechanism : uint8_t { OneTrust, CookieBot, NAI };
enum class Consent : uint8_t { OptOut, OptIn };

std::string_view to_label(Regime r);
std::string_view to_label(Mechanism m);
std::string_view to_label(Consent c);
std::optional<Regime> regime_from_label(std::string_view s);
std::optional<Mechanism> mechanism_from_label(std::string_view s);
std::optional<Consent> consent_from_label(std::string_view s);

inline constexpr std::array<Regime, 2> kAllRegimes = {Regime::GDPR, Regime::CCPA};
inline constexpr std::array<Mechanism, 3> kAllMechanisms = {Mechanism::OneTrust,
                                                            Mechanism::CookieBot,
                                                            Mechanism::NAI};
inline constexpr std::array<Consent, 2> kAllConsents = {Consent::OptOut, Consent::OptIn};

// The 16 interest categories plus the empty control profile. The label set is
// closed; parsers reject anything else. Categories sort alphabetically and
// control sorts last, which fixes report row order.
class Persona {
 public:
  static constexpr size_t kCategoryCount = 16;
  static constexpr size_t kCount = 17;

  Persona() : idx_(kCategoryCount) {}  // default: control

  static Persona control() { return Persona(kCategoryCount); }
  static Persona from_index(size_t idx) { return Persona(idx); }
  static std::optional<Persona> from_label(std::string_view s);

  size_t index() const { return idx_; }
  std::string_view label() const;
  bool is_control() const { return idx_ == kCategoryCount; }

  friend auto operator<=>(Persona a, Persona b) { return a.idx_ <=> b.idx_; }
  friend bool operator==(Persona a, Persona b) { return a.idx_ == b.idx_; }

  // All 17 values in report order (categories, then control).
  static const std::array<Persona, kCount>& all();
  // The 16 categories only.
  static std::vector<Persona> categories();

 private:
  explicit Persona(size_t idx) : idx_(static_cast<uint8_t>(idx)) {}
  uint8_t idx_;
};

// One header-bidding bid observation.
struct BidRecord {
  Persona persona;
  std::string site;        // registrable domain of the publisher page
  std::string advertiser;  // bidder identity
  double cpm = 0.0;        // USD per thousand impressions, >= 0
  Regime regime = Regime::GDPR;
  Mechanism mechanism = Mechanism::OneTrust;
  Consent consent = Consent::OptOut;
  int iteration = 1;  // bid-collection visit, 1..3
  int64_t ts = 0;     // milliseconds since epoch; carried, never used in verdict math
};

// Experimental cell a record belongs to. Lexicographic ordering gives the
// deterministic iteration order used by every report.
struct SessionKey {
  Persona persona;
  Regime regime = Regime::GDPR;
  Mechanism mechanism = Mechanism::OneTrust;
  Consent consent = Consent::OptOut;
  int iteration = 1;

  friend auto operator<=>(const SessionKey&, const SessionKey&) = default;
};

// Session minus the iteration: one browser-profile arm of the experiment.
// Identifier extraction and sync detection operate at this granularity
// because cookies persist across the three bid-collection visits.
struct ArmKey {
  Persona persona;
  Regime regime = Regime::GDPR;
  Mechanism mechanism = Mechanism::OneTrust;
  Consent consent = Consent::OptOut;

  friend auto operator<=>(const ArmKey&, const ArmKey&) = default;
};

inline ArmKey arm_of(const SessionKey& s) {
  return ArmKey{s.persona, s.regime, s.mechanism, s.consent};
}

using HeaderList = std::vector<std::pair<std::string, std::string>>;

// One request/response pair from the capture log.
struct HttpEvent {
  std::string event_id;
  SessionKey session;
  std::string url;
  std::string party;  // registrable domain of url's host
  HeaderList request_headers;
  HeaderList response_headers;
  HeaderList cookies_sent;
  HeaderList cookies_set;
  std::optional<std::string> referrer;
  std::optional<std::string> redirect_from;  // event_id within the same session
};

}  // namespace caudit
