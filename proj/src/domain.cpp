#include "agn/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "agn/error.hpp"
#include "agn/hash.hpp"

namespace agn {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

ActionVocab::ActionVocab(std::vector<std::string> names, std::optional<std::string> start,
                         std::optional<std::string> leave)
    : names_(std::move(names)) {
  if (names_.size() < 2 || names_.size() > 16)
    throw ValueError("action vocabulary needs 2..16 actions, got " + std::to_string(names_.size()));
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw ValueError("empty action name");
    if (!seen.insert(lower(n)).second) throw ValueError("duplicate action name " + n);
  }
  if (start) start_ = id(*start);
  if (leave) leave_ = id(*leave);
  if (start_ && leave_ && *start_ == *leave_) throw ValueError("Start and Leave must differ");
}

ActionVocab ActionVocab::short_video() {
  return ActionVocab({"Start", "Like", "Follow", "Forward", "Collect", "Leave"}, "Start", "Leave");
}

ActionVocab ActionVocab::ecommerce() {
  return ActionVocab({"Click", "Collect", "Cart", "Pay"}, std::nullopt, std::nullopt);
}

const std::string& ActionVocab::name(ActionId id) const {
  static const std::string kPad = "PAD", kBos = "BOS";
  if (id == pad()) return kPad;
  if (id == bos()) return kBos;
  if (id >= names_.size()) throw ValueError("action id " + std::to_string(id) + " out of range");
  return names_[id];
}

std::optional<ActionId> ActionVocab::find(const std::string& name) const {
  const std::string key = lower(name);
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (lower(names_[i]) == key) return i;
  return std::nullopt;
}

ActionId ActionVocab::id(const std::string& name) const {
  auto f = find(name);
  if (!f) throw ValueError("unknown action " + name);
  return *f;
}

std::uint64_t ActionVocab::hash() const {
  std::uint64_t h = fnv1a64("vocab");
  for (const auto& n : names_) h = fnv1a64(n + ";", h);
  h = fnv1a64(start_ ? std::to_string(*start_) : "-", h);
  h = fnv1a64(leave_ ? std::to_string(*leave_) : "-", h);
  return h;
}

bool ActionSequence::contains(ActionId a) const { return position(a).has_value(); }

std::optional<std::size_t> ActionSequence::position(ActionId a) const {
  for (std::size_t i = 0; i < events.size(); ++i)
    if (events[i].action == a) return i;
  return std::nullopt;
}

double normalize_timing(double t_sec, double duration_sec) {
  if (!(duration_sec > 0.0)) throw ValueError("duration must be positive");
  if (!(t_sec >= 0.0)) throw ValueError("timing must be non-negative");
  return std::clamp(t_sec / duration_sec, 0.0, 1.0);
}

bool is_monotone(const ActionSequence& seq) {
  for (std::size_t i = 1; i < seq.events.size(); ++i)
    if (seq.events[i].timing_norm < seq.events[i - 1].timing_norm) return false;
  return true;
}

std::optional<std::string> check_sequence(const ActionSequence& seq, const ActionVocab& vocab,
                                          SequenceChecks checks) {
  const auto& ev = seq.events;
  if (ev.empty()) return "empty sequence";
  if (!(seq.duration_sec > 0.0)) return "non-positive duration";
  if (ev.size() > vocab.num_actions()) return "sequence longer than the action vocabulary";
  std::vector<bool> seen(vocab.num_actions(), false);
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const auto& e = ev[i];
    if (e.action >= vocab.num_actions()) return "event " + std::to_string(i) + " is not a real action";
    if (seen[e.action]) return "action " + vocab.name(e.action) + " occurs more than once";
    seen[e.action] = true;
    if (!(e.timing_norm >= 0.0 && e.timing_norm <= 1.0))
      return "event " + std::to_string(i) + " timing outside [0,1]";
    if (e.timing_sec) {
      if (!(*e.timing_sec >= 0.0)) return "event " + std::to_string(i) + " negative seconds";
      const double expect = std::min(1.0, *e.timing_sec / seq.duration_sec);
      if (std::fabs(expect - e.timing_norm) > 1e-9)
        return "event " + std::to_string(i) + " normalized timing disagrees with seconds";
    }
  }
  if (checks.monotone_timing && !is_monotone(seq)) return "timings decrease";
  if (auto s = vocab.start()) {
    if (ev.front().action != *s) return "sequence does not begin with " + vocab.name(*s);
    if (ev.front().timing_norm != 0.0) return vocab.name(*s) + " timing is not 0";
  }
  if (auto l = vocab.leave()) {
    if (ev.back().action != *l) return "sequence does not end with " + vocab.name(*l);
  }
  return std::nullopt;
}

void validate_sequence(const ActionSequence& seq, const ActionVocab& vocab, SequenceChecks checks) {
  if (auto err = check_sequence(seq, vocab, checks)) throw ValueError("invalid action sequence: " + *err);
}

}  // namespace agn
