#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "agn/domain.hpp"
#include "agn/features.hpp"
#include "agn/sample.hpp"

namespace agn {

struct RawEvent {
  std::string user_id;
  std::string item_id;
  ActionId action = 0;
  double timestamp = 0.0;  // seconds since epoch, UTC
  std::map<std::string, std::string> extra;  // e.g. title, category
};

struct ParseResult {
  std::vector<RawEvent> events;  // file order
  std::size_t rows_read = 0;     // data rows, header excluded
  std::size_t rows_skipped = 0;
};

enum class LogFormat { kTmallCsv, kAgnJsonl };
LogFormat parse_log_format(const std::string& s);

// Epoch seconds ("1411430399", "1411430399.5") or ISO-8601 ("2014-09-22",
// "2014-09-22T10:00:00", "2014-09-22 10:00:00", with optional fraction and "Z"
// or +hh:mm offset). Returns false when unparseable.
bool parse_timestamp(const std::string& s, double& out);

// tmall-csv: header starts with user_id,item_id,action,timestamp; any further
// columns are kept as extras. agn-jsonl: one event object per line with the same
// keys. Malformed rows are skipped and counted; more than 10% malformed rejects
// the file.
ParseResult parse_log(const std::string& path, LogFormat format, const ActionVocab& vocab);
ParseResult parse_tmall_csv(std::istream& in, const ActionVocab& vocab, const std::string& origin = "<stream>");

struct SequenceGroup {
  std::string user_id;
  std::string item_id;
  ActionSequence seq;
  double first_ts = 0.0;
  double last_ts = 0.0;
  std::map<std::string, std::string> extra;  // from the earliest event
};

using GroupKey = std::pair<std::string, std::string>;  // (user_id, item_id)

// Chronological per-(user, item) sequences. Duplicate actions keep the earliest
// occurrence; duration = span of the kept events, at least 1 s.
std::map<GroupKey, SequenceGroup> build_sequences(const std::vector<RawEvent>& events);

struct SplitResult {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

// Sequences whose first event is <= split_instant go to train, the rest to test.
// History: the user's `history_len` most recent other sequences whose last event
// precedes the target's first event.
SplitResult split_and_assemble(const std::map<GroupKey, SequenceGroup>& groups, double split_instant,
                               std::size_t history_len);

// End of the given UTC day (23:59:59), e.g. for "2014-09-22".
double end_of_day(const std::string& date);
inline constexpr const char* kTmallSplitDate = "2014-09-22";

FeatureSpec tmall_user_spec();
// item_id plus one categorical field per extra column name.
FeatureSpec tmall_item_spec(const std::vector<std::string>& extra_fields);

}  // namespace agn
