#include "agn/tokens.hpp"

#include "agn/error.hpp"
#include "agn/ops.hpp"

namespace agn {

TokenEncoder::TokenEncoder(const ActionVocab& vocab, std::size_t d_model, std::string prefix)
    : pad_(vocab.pad()),
      rows_(vocab.token_rows()),
      d_model_(d_model),
      max_positions_(vocab.num_actions() + 2),
      action_path_(prefix + ".action"),
      timing_path_(prefix + ".timing"),
      pos_path_(prefix + ".position") {
  if (d_model == 0) throw ValueError("d_model must be positive");
}

void TokenEncoder::register_params(ParamStore& store) const {
  store.add(action_path_, {rows_, d_model_}, Init::xavier());
  store.add(timing_path_, {1, d_model_}, Init::xavier());
  store.add(pos_path_, {max_positions_, d_model_}, Init::uniform(0.1));
}

Var TokenEncoder::encode(Tape& tape, const ParamStore& store, std::span<const ActionId> actions,
                         std::span<const double> timings, std::span<const std::size_t> positions,
                         std::size_t rows, std::size_t len) const {
  const std::size_t n = rows * len;
  if (actions.size() != n || timings.size() != n || positions.size() != n)
    throw ShapeError("token inputs must all have rows*len entries");
  std::vector<std::size_t> act(actions.begin(), actions.end());
  std::vector<std::size_t> pos(positions.begin(), positions.end());
  NDArray t({rows, len, 1}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (act[i] >= rows_) throw ValueError("token action id out of range");
    if (pos[i] >= max_positions_)
      throw ValueError("token position " + std::to_string(pos[i]) + " >= " +
                       std::to_string(max_positions_));
    t[i] = act[i] == pad_ ? 0.0 : timings[i];
  }
  Var a = ops::reshape(ops::embedding(tape.param(store, action_path_), act), {rows, len, d_model_});
  Var p = ops::reshape(ops::embedding(tape.param(store, pos_path_), pos), {rows, len, d_model_});
  Var tt = ops::mul(tape.constant(std::move(t)), tape.param(store, timing_path_));
  return ops::add(ops::add(a, tt), p);
}

NDArray TokenEncoder::encode_one(const ActionEvent& ev, std::size_t position,
                                 const ParamStore& store) const {
  Tape tape(false);
  const ActionId a[1] = {ev.action};
  const double t[1] = {ev.timing_norm};
  const std::size_t p[1] = {position};
  return encode(tape, store, a, t, p, 1, 1).value().reshaped({d_model_});
}

}  // namespace agn
