#include "agn/sample.hpp"

#include <fstream>

#include "agn/error.hpp"
#include "agn/fileio.hpp"
#include "json.hpp"

namespace agn {
namespace {

using nlohmann::json;

json fields_to_json(const FieldValues& f) {
  json j = json::object();
  for (const auto& [k, v] : f) {
    if (const auto* s = std::get_if<std::string>(&v))
      j[k] = *s;
    else
      j[k] = std::get<double>(v);
  }
  return j;
}

FieldValues fields_from_json(const json& j) {
  FieldValues f;
  for (const auto& [k, v] : j.items()) {
    if (v.is_string())
      f.emplace(k, v.get<std::string>());
    else if (v.is_number())
      f.emplace(k, v.get<double>());
    else
      throw FormatError("feature " + k + " must be a string or number");
  }
  return f;
}

json seq_to_json(const FieldValues& item, const ActionSequence& seq, std::optional<double> ts,
                 const ActionVocab& vocab) {
  json j;
  j["item"] = fields_to_json(item);
  j["duration_sec"] = seq.duration_sec;
  if (ts) j["ts"] = *ts;
  json acts = json::array();
  for (const auto& e : seq.events) {
    json a;
    a["action"] = vocab.name(e.action);
    a["t"] = e.timing_norm;
    if (e.timing_sec) a["t_sec"] = *e.timing_sec;
    acts.push_back(std::move(a));
  }
  j["actions"] = std::move(acts);
  return j;
}

void seq_from_json(const json& j, const ActionVocab& vocab, FieldValues& item, ActionSequence& seq,
                   std::optional<double>& ts) {
  item = fields_from_json(j.at("item"));
  seq.duration_sec = j.at("duration_sec").get<double>();
  if (j.contains("ts")) ts = j["ts"].get<double>();
  seq.events.clear();
  for (const auto& a : j.at("actions")) {
    ActionEvent e;
    e.action = vocab.id(a.at("action").get<std::string>());
    if (a.contains("t_sec")) e.timing_sec = a["t_sec"].get<double>();
    if (a.contains("t"))
      e.timing_norm = a["t"].get<double>();
    else if (e.timing_sec)
      e.timing_norm = normalize_timing(*e.timing_sec, seq.duration_sec);
    else
      throw FormatError("action without timing");
    seq.events.push_back(e);
  }
}

}  // namespace

void validate_sample(const Sample& s, const ActionVocab& vocab) {
  validate_sequence(s.target_seq, vocab);
  std::optional<double> prev;
  for (const auto& h : s.history) {
    validate_sequence(h.seq, vocab);
    if (h.timestamp) {
      if (prev && *h.timestamp < *prev) throw ValueError("history not chronological in " + s.id);
      prev = h.timestamp;
    }
  }
}

std::string sample_to_json(const Sample& s, const ActionVocab& vocab) {
  json j;
  j["id"] = s.id;
  j["user"] = fields_to_json(s.user);
  json hist = json::array();
  for (const auto& h : s.history) hist.push_back(seq_to_json(h.item, h.seq, h.timestamp, vocab));
  j["history"] = std::move(hist);
  j["target"] = seq_to_json(s.target_item, s.target_seq, s.target_timestamp, vocab);
  return j.dump();
}

Sample sample_from_json(const std::string& line, const ActionVocab& vocab) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed sample line: ") + e.what());
  }
  try {
    Sample s;
    s.id = j.at("id").get<std::string>();
    s.user = fields_from_json(j.at("user"));
    for (const auto& h : j.at("history")) {
      HistoryEntry e;
      seq_from_json(h, vocab, e.item, e.seq, e.timestamp);
      s.history.push_back(std::move(e));
    }
    seq_from_json(j.at("target"), vocab, s.target_item, s.target_seq, s.target_timestamp);
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("sample schema violation: ") + e.what());
  } catch (const ValueError& e) {
    throw FormatError(std::string("sample content: ") + e.what());
  }
}

void write_samples(const std::string& path, const std::vector<Sample>& samples,
                   const ActionVocab& vocab) {
  std::string out;
  for (const auto& s : samples) {
    out += sample_to_json(s, vocab);
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<Sample> read_samples(const std::string& path, const ActionVocab& vocab) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::vector<Sample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(sample_from_json(line, vocab));
    } catch (const FormatError& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace agn
