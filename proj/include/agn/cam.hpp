#pragma once

#include <optional>
#include <string>
#include <vector>

#include "agn/ndarray.hpp"
#include "agn/param_store.hpp"
#include "agn/tape.hpp"

namespace agn {

struct CamConfig {
  std::size_t d_model = 16;
  std::size_t n_heads = 4;
  std::size_t d_ctx = 16;
  std::size_t mlp_hidden = 32;
  std::size_t gate_hidden = 16;
  bool causal = false;
  // false selects plain multi-head attention: token-only queries and a uniform
  // head average; the context is then not consumed by the module at all.
  bool context_aware = true;

  std::size_t d_head() const { return d_model / n_heads; }
  void validate() const;
};

struct CamOutput {
  Var out;                     // [N, L, d_model]
  std::vector<Var> attention;  // per head [N, L, L]
  Var gate;                    // [N, n_heads] or [1, n_heads]
};

// Context-aware attention block. Per head h:
//   Q = [seq || ctx] Wq_h, K = seq Wk_h, V = seq Wv_h (V maps into d_model),
//   A = softmax(Q K^T / sqrt(d_head) + mask), head_h = A V.
// Heads are mixed by g = softmax(gate_mlp(ctx)): attn = sum_h g_h head_h, then
//   x = LN(seq + attn), out = LN(x + FFN(x)).
// key_mask is [N, L] with 1 marking PAD keys. Query rows with no visible key
// get a zero attention result.
class Cam {
 public:
  Cam(std::string prefix, CamConfig cfg);

  void register_params(ParamStore& store) const;
  const CamConfig& config() const noexcept { return cfg_; }
  const std::string& prefix() const noexcept { return prefix_; }

  CamOutput forward(Tape& tape, const ParamStore& store, Var seq, std::optional<Var> ctx,
                    const NDArray& key_mask,
                    const std::optional<NDArray>& gate_override = std::nullopt) const;

 private:
  std::string path(const std::string& name) const { return prefix_ + "." + name; }
  std::string head_path(std::size_t h, const std::string& name) const {
    return prefix_ + ".head" + std::to_string(h) + "." + name;
  }

  std::string prefix_;
  CamConfig cfg_;
};

// Mean over unmasked positions: [N, L, d] -> [N, d]. Throws when a row has no
// unmasked position.
Var cam_pool(Var seq_out, const NDArray& key_mask);
// Same, but rows without any unmasked position yield zeros.
Var masked_mean(Var seq, const NDArray& key_mask);

// Dense layer helpers shared by the model blocks.
Var linear(Tape& tape, const ParamStore& store, Var x, const std::string& weight,
           const std::string& bias);
Var affine_layer_norm(Tape& tape, const ParamStore& store, Var x, const std::string& prefix);

}  // namespace agn
