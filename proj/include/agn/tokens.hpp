#pragma once

#include <span>
#include <string>
#include <vector>

#include "agn/domain.hpp"
#include "agn/param_store.hpp"
#include "agn/tape.hpp"

namespace agn {

// token = action_embedding[action] + timing * timing_direction + position_embedding[pos].
// PAD tokens drop the timing term. Positions range over [0, M + 2).
class TokenEncoder {
 public:
  TokenEncoder(const ActionVocab& vocab, std::size_t d_model, std::string prefix = "tok");

  void register_params(ParamStore& store) const;

  std::size_t d_model() const noexcept { return d_model_; }
  std::size_t max_positions() const noexcept { return max_positions_; }
  const std::string& action_table() const noexcept { return action_path_; }

  // actions/timings/positions are flattened [rows * len]; returns [rows, len, d_model].
  Var encode(Tape& tape, const ParamStore& store, std::span<const ActionId> actions,
             std::span<const double> timings, std::span<const std::size_t> positions,
             std::size_t rows, std::size_t len) const;

  NDArray encode_one(const ActionEvent& ev, std::size_t position, const ParamStore& store) const;

 private:
  ActionId pad_;
  std::size_t rows_;
  std::size_t d_model_;
  std::size_t max_positions_;
  std::string action_path_, timing_path_, pos_path_;
};

}  // namespace agn
