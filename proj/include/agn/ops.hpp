#pragma once

#include <cstddef>
#include <vector>

#include "agn/tape.hpp"

// Differentiable operators. Every function records one node on the tape of its
// first argument and rejects incompatible shapes with a ShapeError naming them.
namespace agn::ops {

// [..., n, k] x [k, m] -> [..., n, m], or batched [B..., n, k] x [B..., k, m].
Var matmul(Var a, Var b);
// Swaps the last two axes.
Var transpose(Var a);

// Elementwise with numpy-style broadcasting.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);

// Concatenation along the last axis; all other dimensions must match.
Var concat(const std::vector<Var>& parts);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
Var reshape(Var a, Shape shape);

Var relu(Var a);
Var sigmoid(Var a);
// Requires strictly positive input.
Var log(Var a);

Var softmax(Var a);      // last axis
Var log_softmax(Var a);  // last axis
Var layer_norm(Var a, double eps = 1e-5);  // last axis, no affine terms

// Rows of a rank-2 table: indices.size() x table.dim(1).
Var embedding(Var table, const std::vector<std::size_t>& indices);

// out = mask != 0 ? fill : a; mask broadcasts against a.
Var masked_fill(Var a, const NDArray& mask, double fill);

Var sum(Var a);
Var mean(Var a);
Var sum_axis(Var a, std::size_t axis, bool keepdim);
// Elementwise (a - b)^2 with broadcasting.
Var squared_error(Var a, Var b);

// Large negative logit used for attention masking.
inline constexpr double kMaskValue = -1e9;

}  // namespace agn::ops
