// Copyright 2026 The debugcn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "debugcn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "debugcn/error.hpp"

namespace debugcn {
namespace {

bool any_grad(const Tensor& a) { return a.requires_grad(); }
bool any_grad(const Tensor& a, const Tensor& b) {
  return a.requires_grad() || b.requires_grad();
}

void require_matrix(const Tensor& t, std::string_view op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " +
                     shape_string(t.dims()));
  }
}

using Vec16 = float __attribute__((vector_size(64)));
constexpr std::size_t kLanes = 16;
constexpr std::size_t kRowBlock = 4;

// Same vector with only float alignment, for loads and stores at any offset.
using Vec16u = float __attribute__((vector_size(64), aligned(4)));

Vec16 load16(const float* p) { return *reinterpret_cast<const Vec16u*>(p); }

void store16(float* p, Vec16 v) { *reinterpret_cast<Vec16u*>(p) = v; }

// b [k x n] copied with columns zero-padded to a multiple of 16.
std::vector<float> pack_columns(const float* b, std::size_t k, std::size_t n,
                                std::size_t padded) {
  std::vector<float> out(k * padded, 0.0f);
  for (std::size_t p = 0; p < k; ++p) std::copy_n(b + p * n, n, out.data() + p * padded);
  return out;
}

// out[r, 0:16V] = sum_p a[r, p] * b[p, 0:16V] for four rows of `a`, with the
// accumulators held in registers. Every row runs the same instruction
// sequence, so an output row never depends on which slot its input row
// occupied.
template <std::size_t V>
inline void row_fma(float ar, const Vec16* b, Vec16& c0, Vec16& c1, Vec16& c2, Vec16& c3) {
  c0 += ar * b[0];
  if constexpr (V > 1) c1 += ar * b[1];
  if constexpr (V > 2) c2 += ar * b[2];
  if constexpr (V > 3) c3 += ar * b[3];
}

template <std::size_t V>
inline void row_store(float* out, Vec16 c0, Vec16 c1, Vec16 c2, Vec16 c3) {
  store16(out, c0);
  if constexpr (V > 1) store16(out + kLanes, c1);
  if constexpr (V > 2) store16(out + 2 * kLanes, c2);
  if constexpr (V > 3) store16(out + 3 * kLanes, c3);
}

// out[r, 0:16V] = sum_p a[r, p] * b[p, 0:16V] for four rows of `a`, with the
// accumulators held in registers (named, since GCC spills arrays of vectors).
// Every row runs the same instruction sequence, so an output row never
// depends on which slot its input row occupied.
template <std::size_t V>
void block4(const float* a, std::size_t lda, const float* b, std::size_t ldb,
            std::size_t k, float* out, std::size_t ldo) {
  Vec16 c00{}, c01{}, c02{}, c03{}, c10{}, c11{}, c12{}, c13{};
  Vec16 c20{}, c21{}, c22{}, c23{}, c30{}, c31{}, c32{}, c33{};
  for (std::size_t p = 0; p < k; ++p) {
    Vec16 bv[4];
    for (std::size_t v = 0; v < V; ++v) bv[v] = load16(b + p * ldb + v * kLanes);
    row_fma<V>(a[p], bv, c00, c01, c02, c03);
    row_fma<V>(a[lda + p], bv, c10, c11, c12, c13);
    row_fma<V>(a[2 * lda + p], bv, c20, c21, c22, c23);
    row_fma<V>(a[3 * lda + p], bv, c30, c31, c32, c33);
  }
  row_store<V>(out, c00, c01, c02, c03);
  row_store<V>(out + ldo, c10, c11, c12, c13);
  row_store<V>(out + 2 * ldo, c20, c21, c22, c23);
  row_store<V>(out + 3 * ldo, c30, c31, c32, c33);
}

void block4_dispatch(std::size_t vecs, const float* a, std::size_t lda, const float* b,
                     std::size_t ldb, std::size_t k, float* out, std::size_t ldo) {
  switch (vecs) {
    case 1: block4<1>(a, lda, b, ldb, k, out, ldo); break;
    case 2: block4<2>(a, lda, b, ldb, k, out, ldo); break;
    case 3: block4<3>(a, lda, b, ldb, k, out, ldo); break;
    default: block4<4>(a, lda, b, ldb, k, out, ldo); break;
  }
}

struct Epilogue {
  const float* bias = nullptr;  // [n], added before relu
  bool relu = false;
  bool accumulate = false;
};

// c (+)= [a1 | a2] * b with a1 [m x k1], a2 [m x k2] (k2 may be 0) and
// b [(k1 + k2) x n]. Rows are copied into a small tile so both halves and the
// short final block go through the same kernel.
void gemm_rows(const float* a1, std::size_t k1, const float* a2, std::size_t k2,
               const float* b, float* c, std::size_t m, std::size_t n, const Epilogue& ep) {
  if (m == 0 || n == 0) return;
  const std::size_t k = k1 + k2;
  const std::size_t padded = (n + kLanes - 1) / kLanes * kLanes;
  const std::vector<float> bp = pack_columns(b, k, n, padded);
  std::vector<float> tile(kRowBlock * padded);
  std::vector<float> arows(kRowBlock * k, 0.0f);
  for (std::size_t i = 0; i < m; i += kRowBlock) {
    const std::size_t rows = std::min(kRowBlock, m - i);
    if (rows < kRowBlock) std::fill(arows.begin(), arows.end(), 0.0f);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(a1 + (i + r) * k1, k1, arows.data() + r * k);
      if (k2) std::copy_n(a2 + (i + r) * k2, k2, arows.data() + r * k + k1);
    }
    for (std::size_t col = 0; col < padded; col += 4 * kLanes) {
      const std::size_t vecs = std::min<std::size_t>(4, (padded - col) / kLanes);
      block4_dispatch(vecs, arows.data(), k, bp.data() + col, padded, k, tile.data() + col,
                      padded);
    }
    for (std::size_t r = 0; r < rows; ++r) {
      float* crow = c + (i + r) * n;
      float* trow = tile.data() + r * padded;
      if (ep.bias)
        for (std::size_t j = 0; j < n; ++j) trow[j] += ep.bias[j];
      if (ep.relu)
        for (std::size_t j = 0; j < n; ++j) trow[j] = trow[j] > 0.0f ? trow[j] : 0.0f;
      if (ep.accumulate) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += trow[j];
      } else {
        std::copy_n(trow, n, crow);
      }
    }
  }
}

void gemm_rows(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  Epilogue ep;
  ep.accumulate = accumulate;
  gemm_rows(a, k, nullptr, 0, b, c, m, n, ep);
}

// c [k x n] += a^T g with a [m x k], g [m x n]. Four rows of a/g are folded
// into each pass over c.
void gemm_tn_accumulate(const float* a, const float* g, float* c, std::size_t m,
                        std::size_t k, std::size_t n) {
  if (m == 0 || n == 0) return;
  const std::size_t padded = (n + kLanes - 1) / kLanes * kLanes;
  std::vector<float> cp(k * padded, 0.0f);
  std::vector<float> gp(kRowBlock * padded, 0.0f);
  std::vector<float> ap(kRowBlock * k, 0.0f);
  for (std::size_t i = 0; i < m; i += kRowBlock) {
    const std::size_t rows = std::min(kRowBlock, m - i);
    std::fill(gp.begin(), gp.end(), 0.0f);
    std::fill(ap.begin(), ap.end(), 0.0f);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(g + (i + r) * n, n, gp.data() + r * padded);
      std::copy_n(a + (i + r) * k, k, ap.data() + r * k);
    }
    for (std::size_t col = 0; col < padded; col += kLanes) {
      const Vec16 g0 = load16(gp.data() + col);
      const Vec16 g1 = load16(gp.data() + padded + col);
      const Vec16 g2 = load16(gp.data() + 2 * padded + col);
      const Vec16 g3 = load16(gp.data() + 3 * padded + col);
      for (std::size_t p = 0; p < k; ++p) {
        float* dst = cp.data() + p * padded + col;
        Vec16 acc = load16(dst);
        acc += ap[p] * g0 + ap[k + p] * g1 + ap[2 * k + p] * g2 + ap[3 * k + p] * g3;
        store16(dst, acc);
      }
    }
  }
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) c[p * n + j] += cp[p * padded + j];
}

std::vector<float> transpose(std::span<const float> x, std::size_t rows,
                             std::size_t cols) {
  std::vector<float> t(x.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = x[r * cols + c];
  return t;
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.dims()[0], k = a.dims()[1], n = b.dims()[1];
  if (b.dims()[0] != k) {
    throw ShapeError("matmul: inner dimensions differ: " + shape_string(a.dims()) +
                     " * " + shape_string(b.dims()));
  }
  std::vector<float> out(m * n);
  gemm_rows(a.values().data(), b.values().data(), out.data(), m, k, n, false);
  Tensor c({m, n}, std::move(out), any_grad(a, b));
  if (c.requires_grad()) {
    tape.record(
        "matmul",
        [a, b, c, m, k, n]() mutable {
          if (!c.has_grad()) return;
          const float* dc = c.grad().data();
          if (a.requires_grad()) {
            std::vector<float> bt = transpose(b.values(), k, n);
            gemm_rows(dc, bt.data(), a.grad_buffer().data(), m, n, k, true);
          }
          if (b.requires_grad()) {
            gemm_tn_accumulate(a.values().data(), dc, b.grad_buffer().data(), m, k, n);
          }
        },
        {a, b, c});
  }
  return c;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.dims() == b.dims()) {
    std::vector<float> out(a.size());
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    Tensor c(a.dims(), std::move(out), any_grad(a, b));
    if (c.requires_grad()) {
      tape.record(
          "add",
          [a, b, c]() mutable {
            if (!c.has_grad()) return;
            auto g = c.grad();
            for (const Tensor* t : {&a, &b}) {
              if (!t->requires_grad()) continue;
              auto dst = t->grad_buffer();
              for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
            }
          },
          {a, b, c});
    }
    return c;
  }

  const bool bias_row =
      a.rank() == 2 && ((b.rank() == 1 && b.dims()[0] == a.dims()[1]) ||
                        (b.rank() == 2 && b.dims()[0] == 1 && b.dims()[1] == a.dims()[1]));
  if (!bias_row) {
    throw ShapeError("add: cannot broadcast " + shape_string(b.dims()) + " onto " +
                     shape_string(a.dims()));
  }
  const std::size_t m = a.dims()[0], n = a.dims()[1];
  std::vector<float> out(m * n);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] + bv[j];
  Tensor c({m, n}, std::move(out), any_grad(a, b));
  if (c.requires_grad()) {
    tape.record(
        "add_bias",
        [a, b, c, m, n]() mutable {
          if (!c.has_grad()) return;
          auto g = c.grad();
          if (a.requires_grad()) {
            auto da = a.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
          }
          if (b.requires_grad()) {
            auto db = b.grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < n; ++j) db[j] += g[i * n + j];
          }
        },
        {a, b, c});
  }
  return c;
}

Tensor relu(Tape& tape, const Tensor& x) {
  auto xv = x.values();
  std::vector<float> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0f ? xv[i] : 0.0f;
  Tensor y(x.dims(), std::move(out), any_grad(x));
  if (y.requires_grad()) {
    tape.record(
        "relu",
        [x, y]() mutable {
          if (!y.has_grad()) return;
          auto g = y.grad();
          auto xv = x.values();
          auto dx = x.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i)
            if (xv[i] > 0.0f) dx[i] += g[i];
        },
        {x, y});
  }
  return y;
}

Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b) {
  require_matrix(a, "concat_cols");
  require_matrix(b, "concat_cols");
  if (a.dims()[0] != b.dims()[0]) {
    throw ShapeError("concat_cols: row counts differ: " + shape_string(a.dims()) +
                     " vs " + shape_string(b.dims()));
  }
  const std::size_t g = a.dims()[0], d1 = a.dims()[1], d2 = b.dims()[1];
  const std::size_t w = d1 + d2;
  std::vector<float> out(g * w);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t r = 0; r < g; ++r) {
    std::copy_n(av.data() + r * d1, d1, out.data() + r * w);
    std::copy_n(bv.data() + r * d2, d2, out.data() + r * w + d1);
  }
  Tensor c({g, w}, std::move(out), any_grad(a, b));
  if (c.requires_grad()) {
    tape.record(
        "concat_cols",
        [a, b, c, g, d1, d2, w]() mutable {
          if (!c.has_grad()) return;
          auto gr = c.grad();
          if (a.requires_grad()) {
            auto da = a.grad_buffer();
            for (std::size_t r = 0; r < g; ++r)
              for (std::size_t j = 0; j < d1; ++j) da[r * d1 + j] += gr[r * w + j];
          }
          if (b.requires_grad()) {
            auto db = b.grad_buffer();
            for (std::size_t r = 0; r < g; ++r)
              for (std::size_t j = 0; j < d2; ++j) db[r * d2 + j] += gr[r * w + d1 + j];
          }
        },
        {a, b, c});
  }
  return c;
}

Tensor gather_rows_scaled(Tape& tape, const Tensor& x,
                          std::span<const std::uint32_t> indices,
                          std::span<const float> scales) {
  require_matrix(x, "gather_rows_scaled");
  if (indices.size() != scales.size()) {
    throw ShapeError("gather_rows_scaled: " + std::to_string(indices.size()) +
                     " indices but " + std::to_string(scales.size()) + " scales");
  }
  const std::size_t n = x.dims()[0], d = x.dims()[1], e = indices.size();
  auto xv = x.values();
  std::vector<float> out(e * d);
  for (std::size_t r = 0; r < e; ++r) {
    if (indices[r] >= n) {
      throw IndexError("gather_rows_scaled: row index " + std::to_string(indices[r]) +
                       " >= " + std::to_string(n));
    }
    const float s = scales[r];
    const float* src = xv.data() + std::size_t{indices[r]} * d;
    float* dst = out.data() + r * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] = s * src[j];
  }
  Tensor y({e, d}, std::move(out), any_grad(x));
  if (y.requires_grad()) {
    std::vector<std::uint32_t> idx(indices.begin(), indices.end());
    std::vector<float> sc(scales.begin(), scales.end());
    tape.record(
        "gather_rows_scaled",
        [x, y, idx = std::move(idx), sc = std::move(sc), d]() mutable {
          if (!y.has_grad()) return;
          auto g = y.grad();
          auto dx = x.grad_buffer();
          for (std::size_t r = 0; r < idx.size(); ++r) {
            const float s = sc[r];
            float* dst = dx.data() + std::size_t{idx[r]} * d;
            const float* src = g.data() + r * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] += s * src[j];
          }
        },
        {x, y});
  }
  return y;
}

Tensor segment_sum(Tape& tape, const Tensor& messages,
                   std::span<const std::uint32_t> targets, std::size_t num_nodes) {
  require_matrix(messages, "segment_sum");
  const std::size_t e = messages.dims()[0], d = messages.dims()[1];
  if (targets.size() != e) {
    throw ShapeError("segment_sum: " + std::to_string(e) + " messages but " +
                     std::to_string(targets.size()) + " targets");
  }
  for (std::uint32_t t : targets) {
    if (t >= num_nodes) {
      throw IndexError("segment_sum: target " + std::to_string(t) +
                       " >= num_nodes " + std::to_string(num_nodes));
    }
  }
  auto mv = messages.values();
  std::vector<double> acc(num_nodes * d, 0.0);
  for (std::size_t r = 0; r < e; ++r) {
    double* dst = acc.data() + std::size_t{targets[r]} * d;
    const float* src = mv.data() + r * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
  }
  std::vector<float> out(acc.begin(), acc.end());
  Tensor y({num_nodes, d}, std::move(out), any_grad(messages));
  if (y.requires_grad()) {
    std::vector<std::uint32_t> tg(targets.begin(), targets.end());
    tape.record(
        "segment_sum",
        [messages, y, tg = std::move(tg), d]() mutable {
          if (!y.has_grad()) return;
          auto g = y.grad();
          auto dm = messages.grad_buffer();
          for (std::size_t r = 0; r < tg.size(); ++r) {
            const float* src = g.data() + std::size_t{tg[r]} * d;
            float* dst = dm.data() + r * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
          }
        },
        {messages, y});
  }
  return y;
}

namespace {

void group_by(std::span<const std::uint32_t> keys, std::span<const std::uint32_t> others,
              std::span<const float> weights, std::size_t num_nodes,
              std::vector<std::uint32_t>& offsets, std::vector<std::uint32_t>& grouped,
              std::vector<float>& grouped_weights) {
  offsets.assign(num_nodes + 1, 0);
  for (std::uint32_t k : keys) ++offsets[k + 1];
  for (std::size_t v = 0; v < num_nodes; ++v) offsets[v + 1] += offsets[v];
  std::vector<std::uint32_t> cursor(offsets.begin(), offsets.end() - 1);
  grouped.resize(keys.size());
  grouped_weights.resize(keys.size());
  for (std::size_t e = 0; e < keys.size(); ++e) {
    const std::uint32_t slot = cursor[keys[e]]++;
    grouped[slot] = others[e];
    grouped_weights[slot] = weights[e];
  }
}

// out[v] = sum over edges (u -> v) of w * x[u], edges taken in stored order
// and summed in double.
std::vector<float> aggregate_in(std::span<const float> x, std::size_t d, const Adjacency& adj) {
  std::vector<float> out(adj.num_nodes * d);
  std::vector<double> acc(d);
  std::vector<float> msg(d);
  for (std::size_t v = 0; v < adj.num_nodes; ++v) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::uint32_t e = adj.in_offsets[v]; e < adj.in_offsets[v + 1]; ++e) {
      const float w = adj.in_weights[e];
      const float* src = x.data() + std::size_t{adj.in_sources[e]} * d;
      for (std::size_t j = 0; j < d; ++j) msg[j] = w * src[j];
      for (std::size_t j = 0; j < d; ++j) acc[j] += msg[j];
    }
    float* dst = out.data() + v * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] = static_cast<float>(acc[j]);
  }
  return out;
}

// dx[u] += sum over edges (u -> v) of w * g[v].
void scatter_out(std::span<const float> g, std::size_t d, const Adjacency& adj,
                 std::span<float> dx) {
  for (std::size_t u = 0; u < adj.num_nodes; ++u) {
    float* dst = dx.data() + u * d;
    for (std::uint32_t e = adj.out_offsets[u]; e < adj.out_offsets[u + 1]; ++e) {
      const float w = adj.out_weights[e];
      const float* src = g.data() + std::size_t{adj.out_targets[e]} * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += w * src[j];
    }
  }
}

}  // namespace

Adjacency Adjacency::build(std::span<const std::uint32_t> sources,
                           std::span<const std::uint32_t> targets,
                           std::span<const float> weights, std::size_t num_nodes) {
  if (sources.size() != targets.size() || sources.size() != weights.size()) {
    throw ShapeError("adjacency: " + std::to_string(sources.size()) + " sources, " +
                     std::to_string(targets.size()) + " targets, " +
                     std::to_string(weights.size()) + " weights");
  }
  for (std::size_t e = 0; e < sources.size(); ++e) {
    if (sources[e] >= num_nodes || targets[e] >= num_nodes) {
      throw IndexError("adjacency: edge " + std::to_string(e) + " (" +
                       std::to_string(sources[e]) + " -> " + std::to_string(targets[e]) +
                       ") outside " + std::to_string(num_nodes) + " nodes");
    }
  }
  Adjacency a;
  a.num_nodes = num_nodes;
  group_by(targets, sources, weights, num_nodes, a.in_offsets, a.in_sources, a.in_weights);
  group_by(sources, targets, weights, num_nodes, a.out_offsets, a.out_targets, a.out_weights);
  return a;
}

Tensor weighted_aggregate(Tape& tape, const Tensor& x, const Adjacency& adj) {
  require_matrix(x, "weighted_aggregate");
  const std::size_t n = x.dims()[0], d = x.dims()[1];
  if (n != adj.num_nodes) {
    throw ShapeError("weighted_aggregate: " + std::to_string(n) + " rows but adjacency has " +
                     std::to_string(adj.num_nodes) + " nodes");
  }
  std::vector<float> out = aggregate_in(x.values(), d, adj);
  Tensor y({n, d}, std::move(out), any_grad(x));
  if (y.requires_grad()) {
    tape.record(
        "weighted_aggregate",
        [x, y, &adj, d]() {
          if (!y.has_grad()) return;
          scatter_out(y.grad(), d, adj, x.grad_buffer());
        },
        {x, y});
  }
  return y;
}

Tensor graph_conv(Tape& tape, const Tensor& x, const Adjacency& adj, const Tensor& self_weight,
                  const Tensor& neighbor_weight, const Tensor& bias, bool apply_relu) {
  require_matrix(x, "graph_conv");
  require_matrix(self_weight, "graph_conv");
  require_matrix(neighbor_weight, "graph_conv");
  const std::size_t n = x.dims()[0], din = x.dims()[1], dout = self_weight.dims()[1];
  if (self_weight.dims() != neighbor_weight.dims() || self_weight.dims()[0] != din ||
      bias.size() != dout || bias.rank() != 1) {
    throw ShapeError("graph_conv: features " + shape_string(x.dims()) + ", weights " +
                     shape_string(self_weight.dims()) + " and " +
                     shape_string(neighbor_weight.dims()) + ", bias " +
                     shape_string(bias.dims()) + " do not fit");
  }
  if (n != adj.num_nodes) {
    throw ShapeError("graph_conv: " + std::to_string(n) + " rows but adjacency has " +
                     std::to_string(adj.num_nodes) + " nodes");
  }
  auto agg = std::make_shared<std::vector<float>>(aggregate_in(x.values(), din, adj));
  std::vector<float> stacked(2 * din * dout);
  std::copy_n(self_weight.values().data(), din * dout, stacked.data());
  std::copy_n(neighbor_weight.values().data(), din * dout, stacked.data() + din * dout);
  std::vector<float> out(n * dout);
  Epilogue ep;
  ep.bias = bias.values().data();
  ep.relu = apply_relu;
  gemm_rows(x.values().data(), din, agg->data(), din, stacked.data(), out.data(), n, dout, ep);

  const bool rg = x.requires_grad() || self_weight.requires_grad() ||
                  neighbor_weight.requires_grad() || bias.requires_grad();
  Tensor y({n, dout}, std::move(out), rg);
  if (rg) {
    tape.record(
        "graph_conv",
        [x, y, self_weight, neighbor_weight, bias, agg, &adj, apply_relu, n, din, dout]() {
          if (!y.has_grad()) return;
          std::vector<float> g(y.grad().begin(), y.grad().end());
          if (apply_relu) {
            auto yv = y.values();
            for (std::size_t i = 0; i < g.size(); ++i)
              if (!(yv[i] > 0.0f)) g[i] = 0.0f;
          }
          if (self_weight.requires_grad())
            gemm_tn_accumulate(x.values().data(), g.data(),
                               self_weight.grad_buffer().data(), n, din, dout);
          if (neighbor_weight.requires_grad())
            gemm_tn_accumulate(agg->data(), g.data(), neighbor_weight.grad_buffer().data(), n,
                               din, dout);
          if (bias.requires_grad()) {
            std::vector<double> db(dout, 0.0);
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = 0; j < dout; ++j) db[j] += g[i * dout + j];
            auto dst = bias.grad_buffer();
            for (std::size_t j = 0; j < dout; ++j) dst[j] += static_cast<float>(db[j]);
          }
          if (x.requires_grad()) {
            auto dx = x.grad_buffer();
            std::vector<float> bt = transpose(self_weight.values(), din, dout);
            gemm_rows(g.data(), bt.data(), dx.data(), n, dout, din, true);
            std::vector<float> wt = transpose(neighbor_weight.values(), din, dout);
            std::vector<float> back(n * din);
            gemm_rows(g.data(), wt.data(), back.data(), n, dout, din, false);
            scatter_out(back, din, adj, dx);
          }
        },
        {x, y, self_weight, neighbor_weight, bias});
  }
  return y;
}

Tensor segment_mean(Tape& tape, const Tensor& nodes,
                    std::span<const std::uint32_t> graph_ids, std::size_t num_graphs) {
  require_matrix(nodes, "segment_mean");
  const std::size_t n = nodes.dims()[0], d = nodes.dims()[1];
  if (graph_ids.size() != n) {
    throw ShapeError("segment_mean: " + std::to_string(n) + " rows but " +
                     std::to_string(graph_ids.size()) + " graph ids");
  }
  std::vector<std::size_t> counts(num_graphs, 0);
  for (std::uint32_t g : graph_ids) {
    if (g >= num_graphs) {
      throw IndexError("segment_mean: graph id " + std::to_string(g) +
                       " >= num_graphs " + std::to_string(num_graphs));
    }
    ++counts[g];
  }
  for (std::size_t g = 0; g < num_graphs; ++g) {
    if (counts[g] == 0) {
      throw InvalidBatchError("segment_mean: graph " + std::to_string(g) +
                              " has no nodes");
    }
  }
  auto xv = nodes.values();
  std::vector<double> acc(num_graphs * d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double* dst = acc.data() + std::size_t{graph_ids[r]} * d;
    const float* src = xv.data() + r * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
  }
  std::vector<float> out(num_graphs * d);
  for (std::size_t g = 0; g < num_graphs; ++g)
    for (std::size_t j = 0; j < d; ++j)
      out[g * d + j] = static_cast<float>(acc[g * d + j] / static_cast<double>(counts[g]));
  Tensor y({num_graphs, d}, std::move(out), any_grad(nodes));
  if (y.requires_grad()) {
    std::vector<std::uint32_t> ids(graph_ids.begin(), graph_ids.end());
    tape.record(
        "segment_mean",
        [nodes, y, ids = std::move(ids), counts = std::move(counts), d]() mutable {
          if (!y.has_grad()) return;
          auto g = y.grad();
          auto dx = nodes.grad_buffer();
          for (std::size_t r = 0; r < ids.size(); ++r) {
            const float inv = 1.0f / static_cast<float>(counts[ids[r]]);
            const float* src = g.data() + std::size_t{ids[r]} * d;
            float* dst = dx.data() + r * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] += src[j] * inv;
          }
        },
        {nodes, y});
  }
  return y;
}

Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits,
                             std::span<const int> labels) {
  require_matrix(logits, "softmax_cross_entropy");
  const std::size_t g = logits.dims()[0], classes = logits.dims()[1];
  if (labels.size() != g || g == 0) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(g) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw IndexError("softmax_cross_entropy: label " + std::to_string(label) +
                       " outside [0," + std::to_string(classes) + ")");
    }
  }
  auto lv = logits.values();
  std::vector<double> probs(g * classes);
  double total = 0.0;
  for (std::size_t r = 0; r < g; ++r) {
    const float* row = lv.data() + r * classes;
    double mx = row[0];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, double{row[c]});
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t c = 0; c < classes; ++c)
      probs[r * classes + c] = std::exp(row[c] - log_z);
    total += log_z - row[labels[r]];
  }
  Tensor loss({1}, {static_cast<float>(total / static_cast<double>(g))},
              any_grad(logits));
  if (loss.requires_grad()) {
    std::vector<int> lb(labels.begin(), labels.end());
    tape.record(
        "softmax_cross_entropy",
        [logits, loss, probs = std::move(probs), lb = std::move(lb), g, classes]() mutable {
          if (!loss.has_grad()) return;
          const double upstream = loss.grad()[0];
          auto dl = logits.grad_buffer();
          const double scale = upstream / static_cast<double>(g);
          for (std::size_t r = 0; r < g; ++r)
            for (std::size_t c = 0; c < classes; ++c) {
              const double onehot = static_cast<std::size_t>(lb[r]) == c ? 1.0 : 0.0;
              dl[r * classes + c] +=
                  static_cast<float>((probs[r * classes + c] - onehot) * scale);
            }
        },
        {logits, loss});
  }
  return loss;
}

Tensor sum_all(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (float v : x.values()) total += v;
  Tensor y({1}, {static_cast<float>(total)}, any_grad(x));
  if (y.requires_grad()) {
    tape.record(
        "sum_all",
        [x, y]() mutable {
          if (!y.has_grad()) return;
          const float g = y.grad()[0];
          for (float& v : x.grad_buffer()) v += g;
        },
        {x, y});
  }
  return y;
}

}  // namespace debugcn
