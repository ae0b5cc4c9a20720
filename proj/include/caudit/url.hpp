#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace caudit {

// Minimal absolute-URL parser covering the capture-log subset:
// scheme://host[:port][/path][?query][#fragment]. Host and scheme are
// lowercased; userinfo, IPv6 literals and percent-decoding are out of scope.
struct ParsedUrl {
  std::string scheme;
  std::string host;
  std::string port;
  std::string path;      // includes leading '/', may be empty
  std::string query;     // without '?'
  std::string fragment;  // without '#'

  // The substring sync detection scans: path plus query.
  std::string path_and_query() const {
    if (query.empty()) return path;
    return path + "?" + query;
  }
};

std::optional<ParsedUrl> parse_url(std::string_view url);

}  // namespace caudit
