#include "agn/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "agn/error.hpp"

namespace agn {

namespace {

const std::vector<std::string> kColumns = {"user_id", "item_id", "action", "timestamp"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

// Comma-separated fields with optional double-quote quoting. Returns false on an
// unterminated quote.
bool split_csv(const std::string& line, std::vector<std::string>& out) {
  out.clear();
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) return false;
  out.push_back(trim(cur));
  return true;
}

bool parse_int(std::string_view s, int& v) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size();
}

// Case-insensitive action lookup.
std::optional<ActionId> lookup_action(const ActionVocab& vocab, const std::string& name) {
  try {
    return vocab.id(name);
  } catch (const ValueError&) {
    return std::nullopt;
  }
}

void check_malformed(const ParseResult& r, const std::string& origin) {
  if (r.rows_read > 0 && r.rows_skipped * 10 > r.rows_read)
    throw FormatError(origin + ": " + std::to_string(r.rows_skipped) + " of " + std::to_string(r.rows_read) +
                      " rows malformed (more than 10%); wrong format?");
}

}  // namespace

LogFormat parse_log_format(const std::string& s) {
  if (s == "tmall-csv") return LogFormat::kTmallCsv;
  if (s == "agn-jsonl") return LogFormat::kAgnJsonl;
  throw ConfigError("format", "unknown log format '" + s + "' (expected tmall-csv or agn-jsonl)");
}

bool parse_timestamp(const std::string& raw, double& out) {
  const std::string s = trim(raw);
  if (s.empty()) return false;
  if (s.find('-', 1) == std::string::npos) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) return false;
    out = v;
    return true;
  }
  // YYYY-MM-DD[(T| )HH:MM[:SS[.fff]]][Z|(+|-)HH:MM]
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return false;
  int y, mo, d;
  if (!parse_int(std::string_view(s).substr(0, 4), y) || !parse_int(std::string_view(s).substr(5, 2), mo) ||
      !parse_int(std::string_view(s).substr(8, 2), d))
    return false;
  const std::chrono::year_month_day ymd{std::chrono::year(y), std::chrono::month(static_cast<unsigned>(mo)),
                                        std::chrono::day(static_cast<unsigned>(d))};
  if (!ymd.ok()) return false;
  double secs = static_cast<double>(std::chrono::sys_days(ymd).time_since_epoch().count()) * 86400.0;
  std::size_t i = 10;
  if (i < s.size()) {
    if (s[i] != 'T' && s[i] != ' ') return false;
    ++i;
    int hh, mm, ss = 0;
    if (i + 5 > s.size() || s[i + 2] != ':') return false;
    if (!parse_int(std::string_view(s).substr(i, 2), hh) || !parse_int(std::string_view(s).substr(i + 3, 2), mm))
      return false;
    i += 5;
    double frac = 0;
    if (i < s.size() && s[i] == ':') {
      if (i + 3 > s.size() || !parse_int(std::string_view(s).substr(i + 1, 2), ss)) return false;
      i += 3;
      if (i < s.size() && s[i] == '.') {
        std::size_t j = i + 1;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
        if (j == i + 1) return false;
        frac = std::stod("0" + s.substr(i, j - i));
        i = j;
      }
    }
    if (hh > 23 || mm > 59 || ss > 60) return false;
    secs += hh * 3600.0 + mm * 60.0 + ss + frac;
    if (i < s.size()) {
      if (s[i] == 'Z' && i + 1 == s.size()) {
        i = s.size();
      } else if ((s[i] == '+' || s[i] == '-') && i + 6 == s.size() && s[i + 3] == ':') {
        int oh, om;
        if (!parse_int(std::string_view(s).substr(i + 1, 2), oh) ||
            !parse_int(std::string_view(s).substr(i + 4, 2), om) || oh > 23 || om > 59)
          return false;
        const double off = oh * 3600.0 + om * 60.0;
        secs += s[i] == '+' ? -off : off;
        i = s.size();
      } else {
        return false;
      }
    }
  }
  out = secs;
  return true;
}

ParseResult parse_tmall_csv(std::istream& in, const ActionVocab& vocab, const std::string& origin) {
  ParseResult r;
  std::string line;
  std::vector<std::string> header, cells;
  // skip leading blank lines; an empty file is an empty stream
  while (std::getline(in, line))
    if (!trim(line).empty()) break;
  if (trim(line).empty()) return r;
  if (!split_csv(line, header) || header.size() < kColumns.size() ||
      !std::equal(kColumns.begin(), kColumns.end(), header.begin()))
    throw FormatError(origin + ": header must start with user_id,item_id,action,timestamp");
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++r.rows_read;
    RawEvent e;
    double ts = 0;
    std::optional<ActionId> a;
    if (split_csv(line, cells) && cells.size() == header.size()) a = lookup_action(vocab, cells[2]);
    if (!a || cells[0].empty() || cells[1].empty() || !parse_timestamp(cells[3], ts)) {
      ++r.rows_skipped;
      continue;
    }
    e.user_id = cells[0];
    e.item_id = cells[1];
    e.action = *a;
    e.timestamp = ts;
    for (std::size_t c = kColumns.size(); c < header.size(); ++c) e.extra[header[c]] = cells[c];
    r.events.push_back(std::move(e));
  }
  check_malformed(r, origin);
  return r;
}

ParseResult parse_log(const std::string& path, LogFormat format, const ActionVocab& vocab) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  if (format == LogFormat::kTmallCsv) return parse_tmall_csv(f, vocab, path);
  ParseResult r;
  std::string line;
  while (std::getline(f, line)) {
    if (trim(line).empty()) continue;
    ++r.rows_read;
    try {
      const auto j = nlohmann::json::parse(line);
      RawEvent e;
      e.user_id = j.at("user_id").get<std::string>();
      e.item_id = j.at("item_id").get<std::string>();
      e.action = vocab.id(j.at("action").get<std::string>());
      const auto& t = j.at("timestamp");
      if (t.is_number()) {
        e.timestamp = t.get<double>();
      } else if (!parse_timestamp(t.get<std::string>(), e.timestamp)) {
        throw ValueError("bad timestamp");
      }
      for (const auto& [k, v] : j.items())
        if (std::find(kColumns.begin(), kColumns.end(), k) == kColumns.end())
          e.extra[k] = v.is_string() ? v.get<std::string>() : v.dump();
      if (e.user_id.empty() || e.item_id.empty()) throw ValueError("empty id");
      r.events.push_back(std::move(e));
    } catch (const std::exception&) {
      ++r.rows_skipped;
    }
  }
  check_malformed(r, path);
  return r;
}

std::map<GroupKey, SequenceGroup> build_sequences(const std::vector<RawEvent>& events) {
  std::map<GroupKey, std::vector<const RawEvent*>> by_key;
  for (const RawEvent& e : events) by_key[{e.user_id, e.item_id}].push_back(&e);
  std::map<GroupKey, SequenceGroup> out;
  for (auto& [key, evs] : by_key) {
    // ties keep the input order of equal timestamps; ids break remaining ties so
    // the result does not depend on file order at equal times
    std::stable_sort(evs.begin(), evs.end(), [](const RawEvent* a, const RawEvent* b) {
      if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
      return a->action < b->action;
    });
    std::vector<const RawEvent*> kept;
    std::set<ActionId> seen;
    for (const RawEvent* e : evs)
      if (seen.insert(e->action).second) kept.push_back(e);
    SequenceGroup g;
    g.user_id = key.first;
    g.item_id = key.second;
    g.first_ts = kept.front()->timestamp;
    g.last_ts = kept.back()->timestamp;
    g.extra = kept.front()->extra;
    g.seq.duration_sec = std::max(1.0, g.last_ts - g.first_ts);
    for (const RawEvent* e : kept) {
      const double t = e->timestamp - g.first_ts;
      g.seq.events.push_back({e->action, normalize_timing(t, g.seq.duration_sec), t});
    }
    out.emplace(key, std::move(g));
  }
  return out;
}

SplitResult split_and_assemble(const std::map<GroupKey, SequenceGroup>& groups, double split_instant,
                               std::size_t history_len) {
  if (history_len == 0) throw ConfigError("history_len", "history_len must be >= 1");
  std::map<std::string, std::vector<const SequenceGroup*>> by_user;
  for (const auto& [k, g] : groups) by_user[k.first].push_back(&g);
  auto item_fields = [](const SequenceGroup& g) {
    FieldValues f{{"item_id", g.item_id}};
    for (const auto& [k, v] : g.extra) f[k] = v;
    return f;
  };
  std::vector<std::pair<double, Sample>> train, test;
  for (auto& [user, gs] : by_user) {
    std::sort(gs.begin(), gs.end(), [](const SequenceGroup* a, const SequenceGroup* b) {
      if (a->first_ts != b->first_ts) return a->first_ts < b->first_ts;
      return a->item_id < b->item_id;
    });
    // prior sequences ordered by their last event, for "most recent" selection
    std::vector<const SequenceGroup*> by_end = gs;
    std::sort(by_end.begin(), by_end.end(), [](const SequenceGroup* a, const SequenceGroup* b) {
      if (a->last_ts != b->last_ts) return a->last_ts < b->last_ts;
      return a->item_id < b->item_id;
    });
    for (const SequenceGroup* g : gs) {
      Sample s;
      s.id = user + "|" + g->item_id;
      s.user = {{"user_id", user}};
      std::vector<const SequenceGroup*> prior;
      for (const SequenceGroup* h : by_end)
        if (h != g && h->last_ts < g->first_ts) prior.push_back(h);
      if (prior.size() > history_len) prior.erase(prior.begin(), prior.end() - static_cast<std::ptrdiff_t>(history_len));
      // oldest -> newest by first event
      std::stable_sort(prior.begin(), prior.end(),
                       [](const SequenceGroup* a, const SequenceGroup* b) { return a->first_ts < b->first_ts; });
      for (const SequenceGroup* h : prior) {
        HistoryEntry e;
        e.item = item_fields(*h);
        e.seq = h->seq;
        e.timestamp = h->first_ts;
        s.history.push_back(std::move(e));
      }
      s.target_item = item_fields(*g);
      s.target_seq = g->seq;
      s.target_timestamp = g->first_ts;
      (g->first_ts <= split_instant ? train : test).emplace_back(g->first_ts, std::move(s));
    }
  }
  auto finish = [](std::vector<std::pair<double, Sample>>& v) {
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return a.second.id < b.second.id;
    });
    std::vector<Sample> out;
    for (auto& p : v) out.push_back(std::move(p.second));
    return out;
  };
  return {finish(train), finish(test)};
}

double end_of_day(const std::string& date) {
  double t = 0;
  if (date.size() != 10 || !parse_timestamp(date, t))
    throw ConfigError("split_date", "split date must be YYYY-MM-DD, got '" + date + "'");
  return t + 86399.0;
}

FeatureSpec tmall_user_spec() { return FeatureSpec({FieldSpec::categorical("user_id", 8, 4096)}); }

FeatureSpec tmall_item_spec(const std::vector<std::string>& extra_fields) {
  std::vector<FieldSpec> f = {FieldSpec::categorical("item_id", 8, 8192)};
  for (const auto& n : extra_fields) f.push_back(FieldSpec::categorical(n, 4, 512));
  return FeatureSpec(std::move(f));
}

}  // namespace agn
