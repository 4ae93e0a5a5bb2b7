#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "agn/domain.hpp"
#include "agn/features.hpp"

namespace agn {

struct HistoryEntry {
  FieldValues item;
  ActionSequence seq;
  std::optional<double> timestamp;  // epoch seconds of the first event, when known

  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

// One (user, target item) request. History is ordered oldest -> newest.
struct Sample {
  std::string id;
  FieldValues user;
  std::vector<HistoryEntry> history;
  FieldValues target_item;
  ActionSequence target_seq;
  std::optional<double> target_timestamp;

  double duration_sec() const { return target_seq.duration_sec; }

  friend bool operator==(const Sample&, const Sample&) = default;
};

// Checks history ordering and every sequence against the vocabulary.
void validate_sample(const Sample& s, const ActionVocab& vocab);

// JSON-lines sample files. One object per line:
//   {"id": str, "user": {field: str|num},
//    "history": [{"item": {...}, "duration_sec": num, "ts": num?, "actions": [...]}],
//    "target":  {"item": {...}, "duration_sec": num, "ts": num?, "actions": [...]}}
// where each action is {"action": name, "t": normalized, "t_sec": seconds?}.
std::string sample_to_json(const Sample& s, const ActionVocab& vocab);
Sample sample_from_json(const std::string& line, const ActionVocab& vocab);

void write_samples(const std::string& path, const std::vector<Sample>& samples,
                   const ActionVocab& vocab);
std::vector<Sample> read_samples(const std::string& path, const ActionVocab& vocab);

}  // namespace agn
