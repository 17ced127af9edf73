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

#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "debugcn/batch.hpp"
#include "debugcn/ops.hpp"

namespace debugcn::testing {

DMat to_dmat(const Tensor& t) {
  DMat m(t.rank() == 1 ? 1 : t.rows(), t.rank() == 1 ? t.size() : t.cols());
  auto v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) m.v[i] = v[i];
  return m;
}

RefGraph ref_graph(const LayerGraph& g) {
  RefGraph r;
  r.x = to_dmat(g.node_features);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    r.directed.push_back({g.edges[e].u, g.edges[e].v, g.edge_weights[e]});
    r.directed.push_back({g.edges[e].v, g.edges[e].u, g.edge_weights[e]});
  }
  return r;
}

namespace {

RefLayer ref_layer(const GraphConvLayer& l) {
  RefLayer r;
  r.self_w = to_dmat(l.self_weight);
  r.neigh_w = to_dmat(l.neighbor_weight);
  r.bias = to_dmat(l.bias).v;
  return r;
}

}  // namespace

RefModel ref_model(const GcnModel& model) {
  RefModel m;
  for (const auto& l : model.fc_branch()) m.fc.push_back(ref_layer(l));
  for (const auto& l : model.conv_branch()) m.conv.push_back(ref_layer(l));
  m.head_w = to_dmat(model.head_weight());
  m.head_b = to_dmat(model.head_bias()).v;
  return m;
}

DMat ref_graph_conv(const RefLayer& layer, const DMat& h, const RefGraph& g) {
  const std::size_t n = h.rows, din = h.cols, dout = layer.self_w.cols;
  DMat agg(n, din);
  for (const RefEdge& e : g.directed)
    for (std::size_t j = 0; j < din; ++j) agg.at(e.dst, j) += e.w * h.at(e.src, j);
  DMat out(n, dout);
  for (std::size_t v = 0; v < n; ++v) {
    double* row = &out.at(v, 0);
    for (std::size_t o = 0; o < dout; ++o) row[o] = layer.bias[o];
    for (std::size_t i = 0; i < din; ++i) {
      const double hv = h.at(v, i), av = agg.at(v, i);
      const double* bs = &layer.self_w.v[i * dout];
      const double* wn = &layer.neigh_w.v[i * dout];
      for (std::size_t o = 0; o < dout; ++o) row[o] += hv * bs[o] + av * wn[o];
    }
  }
  return out;
}

DMat ref_relu(DMat x) {
  for (double& v : x.v) v = v > 0 ? v : 0;
  return x;
}

std::vector<double> ref_mean_rows(const DMat& h) {
  std::vector<double> m(h.cols, 0.0);
  for (std::size_t r = 0; r < h.rows; ++r)
    for (std::size_t c = 0; c < h.cols; ++c) m[c] += h.at(r, c);
  for (double& v : m) v /= static_cast<double>(h.rows);
  return m;
}

namespace {

std::vector<double> run_branch(const std::vector<RefLayer>& layers, const RefGraph& g) {
  DMat h = g.x;
  for (const auto& l : layers) h = ref_relu(ref_graph_conv(l, h, g));
  return ref_mean_rows(h);
}

std::vector<double> head(const RefModel& m, const std::vector<double>& pooled) {
  std::vector<double> logits(m.head_b);
  for (std::size_t i = 0; i < pooled.size(); ++i)
    for (std::size_t o = 0; o < logits.size(); ++o) logits[o] += pooled[i] * m.head_w.at(i, o);
  return logits;
}

}  // namespace

std::vector<double> ref_logits(const RefModel& m, const RefGraph& fc, const RefGraph* conv) {
  std::vector<double> pooled = run_branch(m.fc, fc);
  if (conv) {
    std::vector<double> c = run_branch(m.conv, *conv);
    pooled.insert(pooled.end(), c.begin(), c.end());
  }
  return head(m, pooled);
}

double ref_cross_entropy(std::span<const std::vector<double>> logits, std::span<const int> labels) {
  double total = 0;
  for (std::size_t g = 0; g < logits.size(); ++g) {
    const auto& z = logits[g];
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0;
    for (double v : z) s += std::exp(v - mx);
    total += -(z[static_cast<std::size_t>(labels[g])] - mx - std::log(s));
  }
  return total / static_cast<double>(logits.size());
}

namespace {

// Hidden states of one branch on one graph, kept so a perturbation in layer
// l only recomputes layers l.. onwards.
struct BranchCache {
  std::vector<DMat> states;  // states[0] = features, states[l+1] = after layer l
  std::vector<double> pooled;
};

BranchCache cache_branch(const std::vector<RefLayer>& layers, const RefGraph& g) {
  BranchCache c;
  c.states.push_back(g.x);
  for (const auto& l : layers) c.states.push_back(ref_relu(ref_graph_conv(l, c.states.back(), g)));
  c.pooled = ref_mean_rows(c.states.back());
  return c;
}

// Recomputes from layer `from`; appends the sign pattern of every
// pre-activation to `signs`.
std::vector<double> rerun_branch(const std::vector<RefLayer>& layers, const RefGraph& g,
                                 const BranchCache& cache, std::size_t from,
                                 std::vector<char>& signs) {
  DMat h = cache.states[from];
  for (std::size_t l = from; l < layers.size(); ++l) {
    DMat z = ref_graph_conv(layers[l], h, g);
    for (double v : z.v) signs.push_back(v > 0);
    h = ref_relu(std::move(z));
  }
  return ref_mean_rows(h);
}

}  // namespace

GradientCheck check_model_gradients(const GcnModel& model, std::span<const LayerGraph> fc,
                                    std::span<const LayerGraph> conv, std::span<const int> labels,
                                    double h, double floor) {
  const bool dual = model.config().dual_branch();
  GcnModel work = model.clone();

  // Engine gradients.
  std::vector<const LayerGraph*> fp, cp;
  for (const auto& g : fc) fp.push_back(&g);
  for (const auto& g : conv) cp.push_back(&g);
  GraphBatch fb = make_batch(fp, labels);
  std::optional<GraphBatch> cb;
  if (dual) cb = make_batch(cp);
  Tape tape;
  Tensor logits = work.forward(tape, fb, cb ? &*cb : nullptr);
  Tensor loss = softmax_cross_entropy(tape, logits, labels);
  tape.backward(loss);
  const std::vector<Tensor> params = work.parameters();

  // Reference with cached branch states.
  RefModel ref = ref_model(work);
  const std::size_t k = fc.size();
  std::vector<RefGraph> rf, rc;
  std::vector<BranchCache> cf, cc;
  for (std::size_t g = 0; g < k; ++g) {
    rf.push_back(ref_graph(fc[g]));
    cf.push_back(cache_branch(ref.fc, rf.back()));
    if (dual) {
      rc.push_back(ref_graph(conv[g]));
      cc.push_back(cache_branch(ref.conv, rc.back()));
    }
  }

  auto loss_of = [&](const std::vector<std::vector<double>>& fc_pool,
                     const std::vector<std::vector<double>>& conv_pool) {
    std::vector<std::vector<double>> z;
    for (std::size_t g = 0; g < k; ++g) {
      std::vector<double> pooled = fc_pool[g];
      if (dual) pooled.insert(pooled.end(), conv_pool[g].begin(), conv_pool[g].end());
      z.push_back(head(ref, pooled));
    }
    return ref_cross_entropy(z, labels);
  };
  std::vector<std::vector<double>> base_fc, base_conv;
  for (std::size_t g = 0; g < k; ++g) {
    base_fc.push_back(cf[g].pooled);
    if (dual) base_conv.push_back(cc[g].pooled);
  }

  GradientCheck result;
  auto compare = [&](const std::string& name, std::size_t index, double engine, double numeric,
                     bool kink) {
    ++result.parameters;
    if (kink) {
      ++result.kinks;
      return;
    }
    const double denom = std::max({std::abs(engine), std::abs(numeric), floor});
    const double rel = std::abs(engine - numeric) / denom;
    if (result.worst.empty() || rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst = name + "[" + std::to_string(index) + "]";
      result.engine_at_worst = engine;
      result.numeric_at_worst = numeric;
    }
  };
  auto engine_grad = [](const Tensor& t, std::size_t i) {
    return t.has_grad() ? static_cast<double>(t.grad()[i]) : 0.0;
  };

  std::size_t pi = 0;
  for (int branch = 0; branch < (dual ? 2 : 1); ++branch) {
    std::vector<RefLayer>& layers = branch == 0 ? ref.fc : ref.conv;
    const std::string prefix = branch == 0 ? "branchfc.l" : "branchconv.l";
    for (std::size_t l = 0; l < layers.size(); ++l) {
      std::vector<double>* slots[3] = {&layers[l].neigh_w.v, &layers[l].self_w.v, &layers[l].bias};
      const char* names[3] = {".W", ".B", ".bias"};
      for (int which = 0; which < 3; ++which, ++pi) {
        std::vector<double>& vals = *slots[which];
        const std::string name = prefix + std::to_string(l + 1) + names[which];
        for (std::size_t e = 0; e < vals.size(); ++e) {
          const double orig = vals[e];
          double probe[2];
          std::vector<char> signs[2];
          for (int s = 0; s < 2; ++s) {
            vals[e] = orig + (s == 0 ? h : -h);
            std::vector<std::vector<double>> pf = base_fc, pc = base_conv;
            for (std::size_t g = 0; g < k; ++g) {
              if (branch == 0) pf[g] = rerun_branch(layers, rf[g], cf[g], l, signs[s]);
              else pc[g] = rerun_branch(layers, rc[g], cc[g], l, signs[s]);
            }
            probe[s] = loss_of(pf, pc);
          }
          vals[e] = orig;
          compare(name, e, engine_grad(params[pi], e), (probe[0] - probe[1]) / (2 * h),
                  signs[0] != signs[1]);
        }
      }
    }
  }
  std::vector<double>* head_slots[2] = {&ref.head_w.v, &ref.head_b};
  const char* head_names[2] = {"head.W", "head.bias"};
  for (int which = 0; which < 2; ++which, ++pi) {
    std::vector<double>& vals = *head_slots[which];
    for (std::size_t e = 0; e < vals.size(); ++e) {
      const double orig = vals[e];
      vals[e] = orig + h;
      const double up = loss_of(base_fc, base_conv);
      vals[e] = orig - h;
      const double down = loss_of(base_fc, base_conv);
      vals[e] = orig;
      compare(head_names[which], e, engine_grad(params[pi], e), (up - down) / (2 * h), false);
    }
  }
  return result;
}

}  // namespace debugcn::testing
