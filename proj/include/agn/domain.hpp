#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace agn {

using ActionId = std::size_t;

// Ordered action names plus the two reserved classes. Class ids 0..M-1 are real
// actions, M is PAD ("no action at this position"), M+1 is the begin-of-sequence
// token fed to the generator (never predicted).
class ActionVocab {
 public:
  ActionVocab(std::vector<std::string> names, std::optional<std::string> start,
              std::optional<std::string> leave);

  // Start, Like, Follow, Forward, Collect, Leave.
  static ActionVocab short_video();
  // Click, Collect, Cart, Pay; no Start/Leave.
  static ActionVocab ecommerce();

  std::size_t num_actions() const noexcept { return names_.size(); }
  std::size_t num_classes() const noexcept { return names_.size() + 1; }
  std::size_t token_rows() const noexcept { return names_.size() + 2; }
  ActionId pad() const noexcept { return names_.size(); }
  ActionId bos() const noexcept { return names_.size() + 1; }
  std::optional<ActionId> start() const noexcept { return start_; }
  std::optional<ActionId> leave() const noexcept { return leave_; }

  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(ActionId id) const;
  std::optional<ActionId> find(const std::string& name) const;
  // Case-insensitive lookup; throws ValueError when absent.
  ActionId id(const std::string& name) const;

  std::uint64_t hash() const;

  friend bool operator==(const ActionVocab&, const ActionVocab&) = default;

 private:
  std::vector<std::string> names_;
  std::optional<ActionId> start_;
  std::optional<ActionId> leave_;
};

struct ActionEvent {
  ActionId action = 0;
  double timing_norm = 0.0;
  std::optional<double> timing_sec;

  friend bool operator==(const ActionEvent&, const ActionEvent&) = default;
};

struct ActionSequence {
  std::vector<ActionEvent> events;
  double duration_sec = 1.0;

  bool contains(ActionId a) const;
  // Index of the event with action `a`, if any.
  std::optional<std::size_t> position(ActionId a) const;

  friend bool operator==(const ActionSequence&, const ActionSequence&) = default;
};

// t_sec / duration_sec clamped to [0, 1].
double normalize_timing(double t_sec, double duration_sec);

struct SequenceChecks {
  bool monotone_timing = true;
};

// Returns a description of the first violated invariant, or nullopt when valid.
// Invariants: non-empty; length <= M; ids are real actions; each action at most
// once; timings in [0, 1] and consistent with seconds; non-decreasing timings
// (unless disabled); Start first at 0 and Leave last when the vocab declares them.
std::optional<std::string> check_sequence(const ActionSequence& seq, const ActionVocab& vocab,
                                          SequenceChecks checks = {});
void validate_sequence(const ActionSequence& seq, const ActionVocab& vocab,
                       SequenceChecks checks = {});
// Non-decreasing timings.
bool is_monotone(const ActionSequence& seq);

}  // namespace agn
