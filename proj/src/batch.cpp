#include "agn/batch.hpp"

#include <algorithm>

#include "agn/error.hpp"

namespace agn {

namespace {
const FieldValues kNoFields;
}

Batch make_batch(std::span<const Sample* const> samples, const ActionVocab& vocab,
                 std::size_t history_len) {
  if (samples.empty()) throw ValueError("empty batch");
  if (history_len == 0) throw ValueError("history_len must be >= 1");
  Batch b;
  b.n = samples.size();
  b.max_len = vocab.num_actions();
  const ActionId pad = vocab.pad();

  for (const Sample* s : samples) {
    const std::size_t kept = std::min(s->history.size(), history_len);
    b.hist_count.push_back(kept);
    b.hist_len = std::max(b.hist_len, kept);
    for (std::size_t j = s->history.size() - kept; j < s->history.size(); ++j)
      b.hist_seq_len = std::max(b.hist_seq_len, s->history[j].seq.events.size());
    if (s->target_seq.events.size() > b.max_len)
      throw ValueError("sample " + s->id + ": target sequence longer than M");
  }

  const std::size_t hl = b.hist_len, sl = b.hist_seq_len, m = b.max_len;
  b.hist_item.assign(b.n * hl, &kNoFields);
  b.hist_actions.assign(b.n * hl * sl, pad);
  b.hist_timings.assign(b.n * hl * sl, 0.0);
  b.hist_positions.assign(b.n * hl * sl, 0);
  b.hist_action_mask = NDArray({b.n * hl, sl}, 1.0);
  b.hist_item_mask = NDArray({b.n, hl}, 1.0);
  b.hist_recency.assign(b.n * hl, 0);
  b.label_actions.assign(b.n * m, pad);
  b.label_timings.assign(b.n * m, 0.0);

  for (std::size_t r = 0; r < b.n; ++r) {
    const Sample& s = *samples[r];
    b.user.push_back(&s.user);
    b.target_item.push_back(&s.target_item);
    const std::size_t kept = b.hist_count[r];
    const std::size_t first = s.history.size() - kept;
    for (std::size_t j = 0; j < kept; ++j) {
      const HistoryEntry& h = s.history[first + j];
      const std::size_t row = r * hl + j;
      b.hist_item[row] = &h.item;
      b.hist_item_mask[row] = 0.0;
      b.hist_recency[row] = kept - 1 - j;
      for (std::size_t k = 0; k < sl; ++k) b.hist_positions[row * sl + k] = k;
      for (std::size_t k = 0; k < h.seq.events.size(); ++k) {
        b.hist_actions[row * sl + k] = h.seq.events[k].action;
        b.hist_timings[row * sl + k] = h.seq.events[k].timing_norm;
        b.hist_action_mask[row * sl + k] = 0.0;
      }
    }
    for (std::size_t j = kept; j < hl; ++j)
      for (std::size_t k = 0; k < sl; ++k) b.hist_positions[(r * hl + j) * sl + k] = k;
    const auto& ev = s.target_seq.events;
    b.label_len.push_back(ev.size());
    for (std::size_t k = 0; k < ev.size(); ++k) {
      b.label_actions[r * m + k] = ev[k].action;
      b.label_timings[r * m + k] = ev[k].timing_norm;
    }
  }
  return b;
}

Batch make_batch(const std::vector<Sample>& samples, const ActionVocab& vocab,
                 std::size_t history_len) {
  std::vector<const Sample*> ptrs;
  ptrs.reserve(samples.size());
  for (const Sample& s : samples) ptrs.push_back(&s);
  return make_batch(ptrs, vocab, history_len);
}

}  // namespace agn
