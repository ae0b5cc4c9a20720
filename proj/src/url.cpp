#include "caudit/url.hpp"

#include <algorithm>
#include <cctype>

namespace caudit {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool valid_scheme(std::string_view s) {
  if (s.empty() || !std::isalpha(static_cast<unsigned char>(s[0]))) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '+' || c == '-' || c == '.';
  });
}

}  // namespace

std::optional<ParsedUrl> parse_url(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos || scheme_end == 0) return std::nullopt;
  std::string_view scheme = url.substr(0, scheme_end);
  if (!valid_scheme(scheme)) return std::nullopt;

  std::string_view rest = url.substr(scheme_end + 3);
  auto authority_end = rest.find_first_of("/?#");
  std::string_view authority =
      authority_end == std::string_view::npos ? rest : rest.substr(0, authority_end);
  if (authority.empty()) return std::nullopt;
  if (authority.find('@') != std::string_view::npos) return std::nullopt;

  ParsedUrl out;
  out.scheme = lower(scheme);
  auto colon = authority.rfind(':');
  if (colon != std::string_view::npos) {
    std::string_view port = authority.substr(colon + 1);
    if (port.empty() || !std::all_of(port.begin(), port.end(), [](unsigned char c) {
          return std::isdigit(c);
        })) {
      return std::nullopt;
    }
    out.port = std::string(port);
    authority = authority.substr(0, colon);
  }
  if (authority.empty()) return std::nullopt;
  out.host = lower(authority);

  if (authority_end == std::string_view::npos) return out;
  std::string_view tail = rest.substr(authority_end);

  auto hash = tail.find('#');
  if (hash != std::string_view::npos) {
    out.fragment = std::string(tail.substr(hash + 1));
    tail = tail.substr(0, hash);
  }
  auto qmark = tail.find('?');
  if (qmark != std::string_view::npos) {
    out.query = std::string(tail.substr(qmark + 1));
    tail = tail.substr(0, qmark);
  }
  out.path = std::string(tail);
  return out;
}

}  // namespace caudit
