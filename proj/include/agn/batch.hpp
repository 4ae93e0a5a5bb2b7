#pragma once

#include <span>
#include <vector>

#include "agn/domain.hpp"
#include "agn/ndarray.hpp"
#include "agn/sample.hpp"

namespace agn {

// Fixed-shape view of a mini-batch. Histories keep the `history_len` most recent
// entries (oldest first) and are right-padded to the longest history in the batch;
// history action sequences are right-padded with PAD to the longest one. Labels
// always span M positions. Pointers refer into the source samples.
struct Batch {
  std::size_t n = 0;
  std::size_t hist_len = 1;      // items per row after padding (>= 1)
  std::size_t hist_seq_len = 1;  // action slots per history item (>= 1)
  std::size_t max_len = 0;       // M

  std::vector<const FieldValues*> user;         // [n]
  std::vector<const FieldValues*> target_item;  // [n]
  std::vector<const FieldValues*> hist_item;    // [n * hist_len], padding -> empty fields

  std::vector<ActionId> hist_actions;     // [n * hist_len * hist_seq_len]
  std::vector<double> hist_timings;       // same layout
  std::vector<std::size_t> hist_positions;
  NDArray hist_action_mask;               // [n * hist_len, hist_seq_len], 1 = PAD
  NDArray hist_item_mask;                 // [n, hist_len], 1 = padding item
  std::vector<std::size_t> hist_recency;  // [n * hist_len], 0 = most recent
  std::vector<std::size_t> hist_count;    // [n]

  std::vector<ActionId> label_actions;  // [n * M], PAD past the label
  std::vector<double> label_timings;    // [n * M], 0 past the label
  std::vector<std::size_t> label_len;   // [n]
};

Batch make_batch(std::span<const Sample* const> samples, const ActionVocab& vocab,
                 std::size_t history_len);
Batch make_batch(const std::vector<Sample>& samples, const ActionVocab& vocab,
                 std::size_t history_len);
Batch make_batch(std::vector<Sample>&& samples, const ActionVocab& vocab,
                 std::size_t history_len) = delete;

}  // namespace agn
