#pragma once

#include <set>
#include <string>
#include <string_view>

namespace caudit {

// Registrable-domain (eTLD+1) reduction against a public-suffix snapshot
// pinned in the binary, so party derivation is stable across runs and needs
// no network access. Supports exact, wildcard (*.) and exception (!) rules.
class PublicSuffixList {
 public:
  // Snapshot shipped with the tool.
  static const PublicSuffixList& bundled();

  // One rule per line; '//' comments and blank lines ignored.
  static PublicSuffixList from_rules(std::string_view data);

  // Longest matching public suffix for a host, per the standard algorithm
  // (unlisted TLDs fall back to the implicit '*' rule).
  std::string public_suffix(std::string_view host) const;

  // Public suffix plus one label. Hosts that are a bare public suffix, a
  // single label, or an IPv4 literal reduce to themselves.
  std::string registrable_domain(std::string_view host) const;

 private:
  std::set<std::string, std::less<>> exact_;
  std::set<std::string, std::less<>> wildcard_;   // stored without the "*." prefix
  std::set<std::string, std::less<>> exception_;  // stored without the "!" prefix
};

}  // namespace caudit
