#include "caudit/psl.hpp"

#include <algorithm>
#include <cctype>
#include <vector>

namespace caudit {

namespace psl_snapshot {
extern const char* kRules;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string_view> split_labels(std::string_view host) {
  std::vector<std::string_view> labels;
  size_t start = 0;
  while (start <= host.size()) {
    auto dot = host.find('.', start);
    if (dot == std::string_view::npos) {
      labels.push_back(host.substr(start));
      break;
    }
    labels.push_back(host.substr(start, dot - start));
    start = dot + 1;
  }
  return labels;
}

bool looks_like_ipv4(std::string_view host) {
  size_t digits = 0, dots = 0;
  for (char c : host) {
    if (c == '.') {
      ++dots;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      ++digits;
    } else {
      return false;
    }
  }
  return dots == 3 && digits >= 4;
}

std::string join_from(const std::vector<std::string_view>& labels, size_t first) {
  std::string out;
  for (size_t i = first; i < labels.size(); ++i) {
    if (i > first) out += '.';
    out += labels[i];
  }
  return out;
}

}  // namespace

PublicSuffixList PublicSuffixList::from_rules(std::string_view data) {
  PublicSuffixList psl;
  size_t pos = 0;
  while (pos <= data.size()) {
    auto nl = data.find('\n', pos);
    std::string_view line =
        nl == std::string_view::npos ? data.substr(pos) : data.substr(pos, nl - pos);
    pos = nl == std::string_view::npos ? data.size() + 1 : nl + 1;

    auto end = line.find_first_of(" \t\r");
    if (end != std::string_view::npos) line = line.substr(0, end);
    if (line.empty() || line.starts_with("//")) continue;

    std::string rule = lower(line);
    if (rule.starts_with("!")) {
      psl.exception_.insert(rule.substr(1));
    } else if (rule.starts_with("*.")) {
      psl.wildcard_.insert(rule.substr(2));
    } else {
      psl.exact_.insert(std::move(rule));
    }
  }
  return psl;
}

const PublicSuffixList& PublicSuffixList::bundled() {
  static const PublicSuffixList instance = from_rules(psl_snapshot::kRules);
  return instance;
}

std::string PublicSuffixList::public_suffix(std::string_view raw) const {
  std::string host = lower(raw);
  while (!host.empty() && host.back() == '.') host.pop_back();
  if (host.empty()) return host;
  if (looks_like_ipv4(host)) return host;

  auto labels = split_labels(host);
  // Exception rules beat everything; suffix is the rule minus its first label.
  for (size_t i = 0; i < labels.size(); ++i) {
    if (exception_.count(join_from(labels, i)) && i + 1 < labels.size()) {
      return join_from(labels, i + 1);
    }
  }
  // Otherwise the longest match wins; fall back to the implicit '*' rule.
  size_t best = labels.size() - 1;  // default: last label
  bool found = false;
  for (size_t i = 0; i < labels.size(); ++i) {
    std::string suffix = join_from(labels, i);
    bool match = exact_.count(suffix) > 0;
    if (!match && i + 1 < labels.size() && wildcard_.count(join_from(labels, i + 1))) {
      match = true;
    }
    if (match) {
      best = i;
      found = true;
      break;  // scanning longest-first: earlier i = more labels
    }
  }
  (void)found;
  return join_from(labels, best);
}

std::string PublicSuffixList::registrable_domain(std::string_view raw) const {
  std::string host = lower(raw);
  while (!host.empty() && host.back() == '.') host.pop_back();
  if (host.empty() || looks_like_ipv4(host)) return host;

  std::string suffix = public_suffix(host);
  if (host == suffix) return host;
  auto labels = split_labels(host);
  auto suffix_labels = split_labels(suffix);
  if (labels.size() <= suffix_labels.size()) return host;
  return join_from(labels, labels.size() - suffix_labels.size() - 1);
}

}  // namespace caudit
