#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "caudit/domain.hpp"
#include "caudit/psl.hpp"

namespace caudit::ingest {

// Structural violation that aborts the parse: bad syntax, a missing or
// type-mismatched field, or a constraint breach (cpm < 0, iteration range,
// dangling redirect).
class ParseError : public std::runtime_error {
 public:
  ParseError(size_t line, std::string field, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ", field '" + field +
                           "': " + what),
        line_(line),
        field_(std::move(field)) {}

  size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  size_t line_;
  std::string field_;
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& path, const std::string& what)
      : std::runtime_error(what + ": " + path), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Records skipped without aborting the parse: enum labels outside the closed
// value sets, or unparseable URLs.
struct ParseRejection {
  size_t line = 0;     // bid log
  std::string id;      // http log event_id
  std::string reason;
};

struct ParseReport {
  size_t accepted = 0;
  std::vector<ParseRejection> rejections;
};

struct BidLog {
  std::vector<BidRecord> records;
  ParseReport report;
};

struct HttpLog {
  std::vector<HttpEvent> events;
  ParseReport report;
};

// Line-delimited records behind a "consent-audit-log/1" header line. A fully
// empty stream parses to an empty log.
BidLog parse_bid_log(std::istream& in);

// Archive-subset document behind the same header line: {"entries": [...]}.
// Party is derived from each entry's URL via the public-suffix snapshot.
HttpLog parse_http_log(std::istream& in,
                       const PublicSuffixList& psl = PublicSuffixList::bundled());

// Canonical writers; parse-then-serialize normalizes any well-formed input.
void serialize_bid_log(std::span<const BidRecord> records, std::ostream& out);
void serialize_http_log(std::span<const HttpEvent> events, std::ostream& out);

struct Session {
  std::vector<BidRecord> bids;
  std::vector<HttpEvent> events;
};

// Buckets iterate in SessionKey order; every record lands in exactly one.
using SessionMap = std::map<SessionKey, Session>;
SessionMap partition_sessions(std::span<const BidRecord> bids,
                              std::span<const HttpEvent> events);

// File helpers used by the CLI (throw IoError).
BidLog load_bid_log(const std::string& path);
HttpLog load_http_log(const std::string& path,
                      const PublicSuffixList& psl = PublicSuffixList::bundled());
void write_text_file(const std::string& path, const std::string& content);

}  // namespace caudit::ingest
