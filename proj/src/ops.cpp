#include "agn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "agn/error.hpp"

namespace agn::ops {
namespace {

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

void same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape || a.tape == nullptr)
    throw ValueError(std::string(op) + ": operands live on different tapes");
}

// Output shape and per-dimension input strides (0 on broadcast axes).
struct Broadcast {
  Shape out;
  std::vector<std::size_t> stride_a, stride_b;
  bool same = false;
  bool b_scalar = false;
  bool a_scalar = false;
};

std::vector<std::size_t> contiguous_strides(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

Broadcast make_broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast bc;
  if (a == b) {
    bc.out = a;
    bc.same = true;
    return bc;
  }
  const std::size_t r = std::max(a.size(), b.size());
  Shape pa(r, 1), pb(r, 1);
  std::copy(a.begin(), a.end(), pa.begin() + (r - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + (r - b.size()));
  bc.out.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (pa[i] == pb[i] || pb[i] == 1) {
      bc.out[i] = pa[i];
    } else if (pa[i] == 1) {
      bc.out[i] = pb[i];
    } else {
      shape_fail(op, a, b);
    }
  }
  auto sa = contiguous_strides(pa), sb = contiguous_strides(pb);
  for (std::size_t i = 0; i < r; ++i) {
    if (pa[i] == 1 && bc.out[i] != 1) sa[i] = 0;
    if (pb[i] == 1 && bc.out[i] != 1) sb[i] = 0;
  }
  bc.stride_a = std::move(sa);
  bc.stride_b = std::move(sb);
  bc.b_scalar = shape_numel(b) == 1;
  bc.a_scalar = shape_numel(a) == 1;
  return bc;
}

// Calls f(i, ia, ib) for every flat output index i.
template <class F>
void for_each_bc(const Broadcast& bc, F&& f) {
  const std::size_t n = shape_numel(bc.out);
  if (bc.same) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  if (bc.b_scalar && bc.a_scalar) {
    for (std::size_t i = 0; i < n; ++i) f(i, 0, 0);
    return;
  }
  const std::size_t r = bc.out.size();
  std::vector<std::size_t> idx(r, 0);
  std::size_t ia = 0, ib = 0;
  const std::size_t inner = bc.out[r - 1];
  const std::size_t sa_in = bc.stride_a[r - 1], sb_in = bc.stride_b[r - 1];
  for (std::size_t i = 0; i < n; i += inner) {
    for (std::size_t j = 0; j < inner; ++j) f(i + j, ia + j * sa_in, ib + j * sb_in);
    // advance the outer multi-index
    for (std::size_t d = r - 1; d-- > 0;) {
      ++idx[d];
      ia += bc.stride_a[d];
      ib += bc.stride_b[d];
      if (idx[d] < bc.out[d]) break;
      ia -= bc.stride_a[d] * idx[d];
      ib -= bc.stride_b[d] * idx[d];
      idx[d] = 0;
    }
  }
}

// C[n,m] (+)= A[n,k] * B[k,m]
void gemm_nn(const double* A, const double* B, double* C, std::size_t n, std::size_t k,
             std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* c = C + i * m;
    const double* a = A + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p];
      if (av == 0.0) continue;
      const double* b = B + p * m;
      for (std::size_t j = 0; j < m; ++j) c[j] += av * b[j];
    }
  }
}

// C[n,k] += G[n,m] * B[k,m]^T
void gemm_nt(const double* G, const double* B, double* C, std::size_t n, std::size_t k,
             std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* g = G + i * m;
    double* c = C + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* b = B + p * m;
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += g[j] * b[j];
      c[p] += s;
    }
  }
}

// C[k,m] += A[n,k]^T * G[n,m]
void gemm_tn(const double* A, const double* G, double* C, std::size_t n, std::size_t k,
             std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* a = A + i * k;
    const double* g = G + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p];
      if (av == 0.0) continue;
      double* c = C + p * m;
      for (std::size_t j = 0; j < m; ++j) c[j] += av * g[j];
    }
  }
}

std::size_t last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b, "matmul");
  Tape& t = *a.tape;
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) shape_fail("matmul", sa, sb);
  const std::size_t n = sa[sa.size() - 2], k = sa.back();
  if (sb[sb.size() - 2] != k) shape_fail("matmul", sa, sb);
  const std::size_t m = sb.back();
  Shape out_shape(sa.begin(), sa.end() - 1);
  out_shape.push_back(m);

  const bool shared_b = sb.size() == 2;
  std::size_t batch = 1;
  if (!shared_b) {
    if (sb.size() != sa.size() || !std::equal(sa.begin(), sa.end() - 2, sb.begin()))
      shape_fail("matmul", sa, sb);
    batch = shape_numel(Shape(sa.begin(), sa.end() - 2));
  }
  NDArray out(out_shape, 0.0);
  const double* A = a.value().raw().data();
  const double* B = b.value().raw().data();
  double* C = out.raw().data();
  if (shared_b) {
    gemm_nn(A, B, C, shape_numel(sa) / k, k, m);
  } else {
    for (std::size_t q = 0; q < batch; ++q)
      gemm_nn(A + q * n * k, B + q * k * m, C + q * n * m, n, k, m);
  }
  const std::size_t ia = a.id, ib = b.id;
  return t.record(OpKind::kMatmul, std::move(out), {ia, ib},
                  [ia, ib, n, k, m, shared_b, batch](Tape& tp, std::size_t self) {
                    const double* G = tp.grad(self).raw().data();
                    const double* A = tp.value(ia).raw().data();
                    const double* B = tp.value(ib).raw().data();
                    double* GA = tp.grad(ia).raw().data();
                    double* GB = tp.grad(ib).raw().data();
                    if (shared_b) {
                      const std::size_t rows = tp.value(ia).size() / k;
                      gemm_nt(G, B, GA, rows, k, m);
                      gemm_tn(A, G, GB, rows, k, m);
                    } else {
                      for (std::size_t q = 0; q < batch; ++q) {
                        gemm_nt(G + q * n * m, B + q * k * m, GA + q * n * k, n, k, m);
                        gemm_tn(A + q * n * k, G + q * n * m, GB + q * k * m, n, k, m);
                      }
                    }
                  });
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  const Shape& s = a.shape();
  if (s.size() < 2) throw ShapeError("transpose: rank < 2 shape " + shape_str(s));
  const std::size_t r = s[s.size() - 2], c = s.back();
  const std::size_t batch = shape_numel(s) / (r * c);
  Shape os = s;
  std::swap(os[os.size() - 1], os[os.size() - 2]);
  NDArray out(os, 0.0);
  const auto& x = a.value().raw();
  auto& y = out.raw();
  for (std::size_t q = 0; q < batch; ++q)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) y[q * r * c + j * r + i] = x[q * r * c + i * c + j];
  const std::size_t ia = a.id;
  return t.record(OpKind::kTranspose, std::move(out), {ia},
                  [ia, r, c, batch](Tape& tp, std::size_t self) {
                    const auto& g = tp.grad(self).raw();
                    auto& gx = tp.grad(ia).raw();
                    for (std::size_t q = 0; q < batch; ++q)
                      for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < c; ++j)
                          gx[q * r * c + i * c + j] += g[q * r * c + j * r + i];
                  });
}

namespace {

enum class Elementwise { kAdd, kSub, kMul, kSqErr };

Var binary(Var a, Var b, Elementwise kind, OpKind op) {
  same_tape(a, b, op_name(op));
  Tape& t = *a.tape;
  auto bc = make_broadcast(a.shape(), b.shape(), op_name(op));
  NDArray out(bc.out, 0.0);
  const auto& x = a.value().raw();
  const auto& y = b.value().raw();
  auto& z = out.raw();
  switch (kind) {
    case Elementwise::kAdd:
      for_each_bc(bc, [&](std::size_t i, std::size_t ia, std::size_t ib) { z[i] = x[ia] + y[ib]; });
      break;
    case Elementwise::kSub:
      for_each_bc(bc, [&](std::size_t i, std::size_t ia, std::size_t ib) { z[i] = x[ia] - y[ib]; });
      break;
    case Elementwise::kMul:
      for_each_bc(bc, [&](std::size_t i, std::size_t ia, std::size_t ib) { z[i] = x[ia] * y[ib]; });
      break;
    case Elementwise::kSqErr:
      for_each_bc(bc, [&](std::size_t i, std::size_t ia, std::size_t ib) {
        const double d = x[ia] - y[ib];
        z[i] = d * d;
      });
      break;
  }
  const std::size_t ia = a.id, ib = b.id;
  return t.record(op, std::move(out), {ia, ib}, [ia, ib, bc, kind](Tape& tp, std::size_t self) {
    const auto& g = tp.grad(self).raw();
    auto& ga = tp.grad(ia).raw();
    auto& gb = tp.grad(ib).raw();
    const auto& x = tp.value(ia).raw();
    const auto& y = tp.value(ib).raw();
    switch (kind) {
      case Elementwise::kAdd:
        for_each_bc(bc, [&](std::size_t i, std::size_t pa, std::size_t pb) {
          ga[pa] += g[i];
          gb[pb] += g[i];
        });
        break;
      case Elementwise::kSub:
        for_each_bc(bc, [&](std::size_t i, std::size_t pa, std::size_t pb) {
          ga[pa] += g[i];
          gb[pb] -= g[i];
        });
        break;
      case Elementwise::kMul:
        for_each_bc(bc, [&](std::size_t i, std::size_t pa, std::size_t pb) {
          ga[pa] += g[i] * y[pb];
          gb[pb] += g[i] * x[pa];
        });
        break;
      case Elementwise::kSqErr:
        for_each_bc(bc, [&](std::size_t i, std::size_t pa, std::size_t pb) {
          const double d = 2.0 * (x[pa] - y[pb]) * g[i];
          ga[pa] += d;
          gb[pb] -= d;
        });
        break;
    }
  });
}

}  // namespace

Var add(Var a, Var b) { return binary(a, b, Elementwise::kAdd, OpKind::kAdd); }
Var sub(Var a, Var b) { return binary(a, b, Elementwise::kSub, OpKind::kSub); }
Var mul(Var a, Var b) { return binary(a, b, Elementwise::kMul, OpKind::kMul); }
Var squared_error(Var a, Var b) {
  return binary(a, b, Elementwise::kSqErr, OpKind::kSquaredError);
}

Var scale(Var a, double c) {
  Tape& t = *a.tape;
  NDArray out = a.value();
  for (auto& v : out.raw()) v *= c;
  const std::size_t ia = a.id;
  return t.record(OpKind::kScale, std::move(out), {ia}, [ia, c](Tape& tp, std::size_t self) {
    const auto& g = tp.grad(self).raw();
    auto& gx = tp.grad(ia).raw();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += c * g[i];
  });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape& t = *parts[0].tape;
  const Shape& s0 = parts[0].shape();
  if (s0.empty()) throw ShapeError("concat: scalar input");
  const std::size_t rows = shape_numel(s0) / s0.back();
  std::vector<std::size_t> widths, ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    same_tape(parts[0], p, "concat");
    const Shape& s = p.shape();
    if (s.size() != s0.size() || !std::equal(s.begin(), s.end() - 1, s0.begin()))
      shape_fail("concat", s0, s);
    widths.push_back(s.back());
    ids.push_back(p.id);
    total += s.back();
  }
  Shape os = s0;
  os.back() = total;
  NDArray out(os, 0.0);
  auto& z = out.raw();
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& x = parts[k].value().raw();
    const std::size_t w = widths[k];
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(x.begin() + r * w, x.begin() + (r + 1) * w, z.begin() + r * total + off);
    off += w;
  }
  return t.record(OpKind::kConcat, std::move(out), ids,
                  [ids, widths, rows, total](Tape& tp, std::size_t self) {
                    const auto& g = tp.grad(self).raw();
                    std::size_t off = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      auto& gx = tp.grad(ids[k]).raw();
                      const std::size_t w = widths[k];
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < w; ++j) gx[r * w + j] += g[r * total + off + j];
                      off += w;
                    }
                  });
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  Tape& t = *a.tape;
  const Shape& s = a.shape();
  if (axis >= s.size() || begin >= end || end > s[axis])
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") on axis " + std::to_string(axis) + " invalid for " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = end - begin, full = s[axis];
  Shape os = s;
  os[axis] = len;
  NDArray out(os, 0.0);
  const auto& x = a.value().raw();
  auto& z = out.raw();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy(x.begin() + (o * full + begin) * inner, x.begin() + (o * full + end) * inner,
              z.begin() + o * len * inner);
  const std::size_t ia = a.id;
  return t.record(OpKind::kSlice, std::move(out), {ia},
                  [ia, outer, inner, len, full, begin](Tape& tp, std::size_t self) {
                    const auto& g = tp.grad(self).raw();
                    auto& gx = tp.grad(ia).raw();
                    for (std::size_t o = 0; o < outer; ++o)
                      for (std::size_t j = 0; j < len * inner; ++j)
                        gx[(o * full + begin) * inner + j] += g[o * len * inner + j];
                  });
}

Var reshape(Var a, Shape shape) {
  Tape& t = *a.tape;
  NDArray out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id;
  return t.record(OpKind::kReshape, std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    const auto& g = tp.grad(self).raw();
    auto& gx = tp.grad(ia).raw();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var relu(Var a) {
  Tape& t = *a.tape;
  NDArray out = a.value();
  for (auto& v : out.raw()) v = v > 0.0 ? v : 0.0;
  const std::size_t ia = a.id;
  return t.record(OpKind::kRelu, std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    const auto& g = tp.grad(self).raw();
    const auto& x = tp.value(ia).raw();
    auto& gx = tp.grad(ia).raw();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > 0.0) gx[i] += g[i];
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape;
  NDArray out = a.value();
  for (auto& v : out.raw()) {
    if (v >= 0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  const std::size_t ia = a.id;
  return t.record(OpKind::kSigmoid, std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    const auto& g = tp.grad(self).raw();
    const auto& y = tp.value(self).raw();
    auto& gx = tp.grad(ia).raw();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var log(Var a) {
  Tape& t = *a.tape;
  NDArray out = a.value();
  for (auto& v : out.raw()) {
    if (!(v > 0.0)) throw ValueError("log: non-positive input " + std::to_string(v));
    v = std::log(v);
  }
  const std::size_t ia = a.id;
  return t.record(OpKind::kLog, std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    const auto& g = tp.grad(self).raw();
    const auto& x = tp.value(ia).raw();
    auto& gx = tp.grad(ia).raw();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / x[i];
  });
}

Var softmax(Var a) {
  Tape& t = *a.tape;
  NDArray out = a.value();
  const std::size_t w = last_dim(out.shape()), rows = out.size() / w;
  auto& z = out.raw();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = z.data() + r * w;
    const double mx = *std::max_element(row, row + w);
    double s = 0.0;
    for (std::size_t j = 0; j < w; ++j) s += (row[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < w; ++j) row[j] /= s;
  }
  const std::size_t ia = a.id;
  return t.record(OpKind::kSoftmax, std::move(out), {ia}, [ia, w, rows](Tape& tp, std::size_t self) {
    const auto& g = tp.grad(self).raw();
    const auto& y = tp.value(self).raw();
    auto& gx = tp.grad(ia).raw();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < w; ++j) dot += g[r * w + j] * y[r * w + j];
      for (std::size_t j = 0; j < w; ++j) gx[r * w + j] += y[r * w + j] * (g[r * w + j] - dot);
    }
  });
}

Var log_softmax(Var a) {
  Tape& t = *a.tape;
  NDArray out = a.value();
  const std::size_t w = last_dim(out.shape()), rows = out.size() / w;
  auto& z = out.raw();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = z.data() + r * w;
    const double mx = *std::max_element(row, row + w);
    double s = 0.0;
    for (std::size_t j = 0; j < w; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < w; ++j) row[j] -= lse;
  }
  const std::size_t ia = a.id;
  return t.record(OpKind::kLogSoftmax, std::move(out), {ia},
                  [ia, w, rows](Tape& tp, std::size_t self) {
                    const auto& g = tp.grad(self).raw();
                    const auto& y = tp.value(self).raw();
                    auto& gx = tp.grad(ia).raw();
                    for (std::size_t r = 0; r < rows; ++r) {
                      double gs = 0.0;
                      for (std::size_t j = 0; j < w; ++j) gs += g[r * w + j];
                      for (std::size_t j = 0; j < w; ++j)
                        gx[r * w + j] += g[r * w + j] - std::exp(y[r * w + j]) * gs;
                    }
                  });
}

Var layer_norm(Var a, double eps) {
  Tape& t = *a.tape;
  NDArray out = a.value();
  const std::size_t w = last_dim(out.shape()), rows = out.size() / w;
  std::vector<double> inv_std(rows);
  auto& z = out.raw();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = z.data() + r * w;
    double mu = 0.0;
    for (std::size_t j = 0; j < w; ++j) mu += row[j];
    mu /= static_cast<double>(w);
    double var = 0.0;
    for (std::size_t j = 0; j < w; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(w);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < w; ++j) row[j] = (row[j] - mu) * is;
  }
  const std::size_t ia = a.id;
  return t.record(OpKind::kLayerNorm, std::move(out), {ia},
                  [ia, w, rows, inv_std = std::move(inv_std)](Tape& tp, std::size_t self) {
                    const auto& g = tp.grad(self).raw();
                    const auto& y = tp.value(self).raw();
                    auto& gx = tp.grad(ia).raw();
                    const double inv_w = 1.0 / static_cast<double>(w);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double gm = 0.0, gy = 0.0;
                      for (std::size_t j = 0; j < w; ++j) {
                        gm += g[r * w + j];
                        gy += g[r * w + j] * y[r * w + j];
                      }
                      gm *= inv_w;
                      gy *= inv_w;
                      for (std::size_t j = 0; j < w; ++j)
                        gx[r * w + j] += inv_std[r] * (g[r * w + j] - gm - y[r * w + j] * gy);
                    }
                  });
}

Var embedding(Var table, const std::vector<std::size_t>& indices) {
  Tape& t = *table.tape;
  const Shape& s = table.shape();
  if (s.size() != 2) throw ShapeError("embedding: table must be rank 2, got " + shape_str(s));
  if (indices.empty()) throw ShapeError("embedding: no indices");
  const std::size_t rows = s[0], d = s[1];
  NDArray out(Shape{indices.size(), d}, 0.0);
  const auto& x = table.value().raw();
  auto& z = out.raw();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= rows)
      throw ShapeError("embedding: index " + std::to_string(indices[r]) + " out of range for " +
                       shape_str(s));
    std::copy(x.begin() + indices[r] * d, x.begin() + (indices[r] + 1) * d, z.begin() + r * d);
  }
  const std::size_t ia = table.id;
  return t.record(OpKind::kEmbedding, std::move(out), {ia},
                  [ia, d, indices](Tape& tp, std::size_t self) {
                    const auto& g = tp.grad(self).raw();
                    auto& gx = tp.grad(ia).raw();
                    for (std::size_t r = 0; r < indices.size(); ++r)
                      for (std::size_t j = 0; j < d; ++j) gx[indices[r] * d + j] += g[r * d + j];
                  });
}

Var masked_fill(Var a, const NDArray& mask, double fill) {
  Tape& t = *a.tape;
  auto bc = make_broadcast(a.shape(), mask.shape(), "masked_fill");
  if (bc.out != a.shape()) shape_fail("masked_fill", a.shape(), mask.shape());
  NDArray out = a.value();
  auto& z = out.raw();
  const auto& m = mask.raw();
  std::vector<std::uint8_t> hit(z.size(), 0);
  for_each_bc(bc, [&](std::size_t i, std::size_t, std::size_t im) {
    if (m[im] != 0.0) {
      z[i] = fill;
      hit[i] = 1;
    }
  });
  const std::size_t ia = a.id;
  return t.record(OpKind::kMaskedFill, std::move(out), {ia},
                  [ia, hit = std::move(hit)](Tape& tp, std::size_t self) {
                    const auto& g = tp.grad(self).raw();
                    auto& gx = tp.grad(ia).raw();
                    for (std::size_t i = 0; i < g.size(); ++i)
                      if (!hit[i]) gx[i] += g[i];
                  });
}

Var sum(Var a) {
  Tape& t = *a.tape;
  double s = 0.0;
  for (double v : a.value().raw()) s += v;
  const std::size_t ia = a.id;
  return t.record(OpKind::kSum, NDArray::scalar(s), {ia}, [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    for (auto& v : tp.grad(ia).raw()) v += g;
  });
}

Var mean(Var a) {
  Tape& t = *a.tape;
  double s = 0.0;
  for (double v : a.value().raw()) s += v;
  const double n = static_cast<double>(a.value().size());
  const std::size_t ia = a.id;
  return t.record(OpKind::kMean, NDArray::scalar(s / n), {ia}, [ia, n](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0] / n;
    for (auto& v : tp.grad(ia).raw()) v += g;
  });
}

Var sum_axis(Var a, std::size_t axis, bool keepdim) {
  Tape& t = *a.tape;
  const Shape& s = a.shape();
  if (axis >= s.size()) throw ShapeError("sum_axis: axis out of range for " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  Shape os;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != axis)
      os.push_back(s[i]);
    else if (keepdim)
      os.push_back(1);
  }
  NDArray out(os, 0.0);
  const auto& x = a.value().raw();
  auto& z = out.raw();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t j = 0; j < inner; ++j) z[o * inner + j] += x[(o * len + l) * inner + j];
  const std::size_t ia = a.id;
  return t.record(OpKind::kSumAxis, std::move(out), {ia},
                  [ia, outer, inner, len](Tape& tp, std::size_t self) {
                    const auto& g = tp.grad(self).raw();
                    auto& gx = tp.grad(ia).raw();
                    for (std::size_t o = 0; o < outer; ++o)
                      for (std::size_t l = 0; l < len; ++l)
                        for (std::size_t j = 0; j < inner; ++j)
                          gx[(o * len + l) * inner + j] += g[o * inner + j];
                  });
}

}  // namespace agn::ops
