/**
 * Copyright (c) GraphVeil Contributors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "graphveil/executor.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "graphveil/errors.hpp"
#include "graphveil/rng.hpp"
#include "graphveil/shape_inference.hpp"

namespace graphveil {

int64_t Tensor::numel() const {
  int64_t n = 1;
  for (int64_t d : shape.dims)
    n *= d;
  return n;
}

Tensor Tensor::zeros(const TensorShape& s) {
  Tensor t;
  t.shape = s;
  t.data.assign(size_t(t.numel()), 0.0);
  return t;
}

WeightFn default_weights() {
  return [](int64_t node_id, size_t count) {
    std::vector<double> w(count);
    Rng rng(derive_seed(0x57e1u, uint64_t(node_id)));
    double scale = 1.0 / std::sqrt(double(std::max<size_t>(count, 1)));
    for (auto& x : w)
      x = (2.0 * rng.next_double() - 1.0) * scale;
    return w;
  };
}

WeightFn ones_weights() {
  return [](int64_t, size_t count) { return std::vector<double>(count, 1.0); };
}

namespace {

struct Value {
  Tensor t;
};

void elementwise_check(const Tensor& a, const Tensor& b, int64_t node) {
  if (a.shape != b.shape)
    throw Error(Errc::shape_mismatch,
                "node " + std::to_string(node) + ": operand shapes " +
                    a.shape.str() + " vs " + b.shape.str(),
                node);
}

Tensor run_conv(const Tensor& in, const ConvAttrs& a,
                const std::vector<double>& w, int64_t node) {
  if (in.shape.rank() != 4 || in.shape.dims[1] != a.cin)
    throw Error(Errc::shape_mismatch,
                "node " + std::to_string(node) + ": conv input " + in.shape.str(),
                node);
  int64_t n = in.shape.dims[0], h = in.shape.dims[2], wd = in.shape.dims[3];
  int64_t oh = (h - a.kernel) / a.stride + 1;
  int64_t ow = (wd - a.kernel) / a.stride + 1;
  Tensor out = Tensor::zeros(TensorShape{n, a.cout, oh, ow});
  auto in_at = [&](int64_t b, int64_t c, int64_t y, int64_t x) {
    return in.data[size_t(((b * a.cin + c) * h + y) * wd + x)];
  };
  auto w_at = [&](int64_t co, int64_t ci, int64_t ky, int64_t kx) {
    return w[size_t(((co * a.cin + ci) * a.kernel + ky) * a.kernel + kx)];
  };
  size_t o = 0;
  for (int64_t b = 0; b < n; ++b)
    for (int64_t co = 0; co < a.cout; ++co)
      for (int64_t y = 0; y < oh; ++y)
        for (int64_t x = 0; x < ow; ++x, ++o) {
          double acc = 0.0;
          for (int64_t ci = 0; ci < a.cin; ++ci)
            for (int ky = 0; ky < a.kernel; ++ky)
              for (int kx = 0; kx < a.kernel; ++kx)
                acc += in_at(b, ci, y * a.stride + ky, x * a.stride + kx) *
                       w_at(co, ci, ky, kx);
          out.data[o] = acc;
        }
  return out;
}

Tensor run_pool(const Tensor& in, const ConvAttrs& a, bool take_max,
                int64_t node) {
  if (in.shape.rank() != 4)
    throw Error(Errc::shape_mismatch,
                "node " + std::to_string(node) + ": pool input " + in.shape.str(),
                node);
  int64_t n = in.shape.dims[0], c = in.shape.dims[1], h = in.shape.dims[2],
          wd = in.shape.dims[3];
  int64_t oh = (h - a.kernel) / a.stride + 1;
  int64_t ow = (wd - a.kernel) / a.stride + 1;
  Tensor out = Tensor::zeros(TensorShape{n, c, oh, ow});
  auto in_at = [&](int64_t b, int64_t ch, int64_t y, int64_t x) {
    return in.data[size_t(((b * c + ch) * h + y) * wd + x)];
  };
  size_t o = 0;
  for (int64_t b = 0; b < n; ++b)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t y = 0; y < oh; ++y)
        for (int64_t x = 0; x < ow; ++x, ++o) {
          double acc = take_max ? -HUGE_VAL : 0.0;
          for (int ky = 0; ky < a.kernel; ++ky)
            for (int kx = 0; kx < a.kernel; ++kx) {
              double v = in_at(b, ch, y * a.stride + ky, x * a.stride + kx);
              acc = take_max ? std::max(acc, v) : acc + v;
            }
          out.data[o] = take_max ? acc : acc / double(a.kernel * a.kernel);
        }
  return out;
}

Tensor run_softmax(const Tensor& in, int axis) {
  Tensor out = in;
  const auto& dims = in.shape.dims;
  int64_t axis_len = dims[size_t(axis)];
  int64_t inner = 1;
  for (size_t d = size_t(axis) + 1; d < dims.size(); ++d)
    inner *= dims[d];
  int64_t outer = in.numel() / (axis_len * inner);
  for (int64_t a = 0; a < outer; ++a)
    for (int64_t i = 0; i < inner; ++i) {
      size_t base = size_t(a * axis_len * inner + i);
      double mx = -HUGE_VAL;
      for (int64_t k = 0; k < axis_len; ++k)
        mx = std::max(mx, in.data[base + size_t(k * inner)]);
      double sum = 0.0;
      for (int64_t k = 0; k < axis_len; ++k) {
        double e = std::exp(in.data[base + size_t(k * inner)] - mx);
        out.data[base + size_t(k * inner)] = e;
        sum += e;
      }
      for (int64_t k = 0; k < axis_len; ++k)
        out.data[base + size_t(k * inner)] /= sum;
    }
  return out;
}

Tensor run_concat(const std::vector<Tensor>& ins, int axis) {
  const auto& first = ins[0].shape.dims;
  int64_t axis_total = 0;
  for (const auto& t : ins)
    axis_total += t.shape.dims[size_t(axis)];
  TensorShape out_shape;
  out_shape.dims = first;
  out_shape.dims[size_t(axis)] = axis_total;
  Tensor out = Tensor::zeros(out_shape);

  int64_t inner = 1;
  for (size_t d = size_t(axis) + 1; d < first.size(); ++d)
    inner *= first[d];
  int64_t outer = 1;
  for (size_t d = 0; d < size_t(axis); ++d)
    outer *= first[d];

  for (int64_t a = 0; a < outer; ++a) {
    int64_t offset = 0;
    for (const auto& t : ins) {
      int64_t len = t.shape.dims[size_t(axis)] * inner;
      std::copy_n(t.data.begin() + a * len, len,
                  out.data.begin() + a * axis_total * inner + offset);
      offset += len;
    }
  }
  return out;
}

Tensor run_transpose(const Tensor& in) {
  TensorShape out_shape = in.shape;
  std::reverse(out_shape.dims.begin() + 1, out_shape.dims.end());
  Tensor out = Tensor::zeros(out_shape);
  const auto& id = in.shape.dims;
  int rank = in.shape.rank();
  std::vector<int64_t> idx(size_t(rank), 0);
  for (int64_t flat = 0; flat < in.numel(); ++flat) {
    int64_t rem = flat;
    for (int d = rank - 1; d >= 0; --d) {
      idx[size_t(d)] = rem % id[size_t(d)];
      rem /= id[size_t(d)];
    }
    int64_t oflat = idx[0];
    for (int d = rank - 1; d >= 1; --d)
      oflat = oflat * id[size_t(d)] + idx[size_t(d)];
    out.data[size_t(oflat)] = in.data[size_t(flat)];
  }
  return out;
}

} // namespace

std::vector<Tensor> execute(const OpGraph& g, const std::vector<Tensor>& inputs,
                            const WeightFn& weights) {
  if (inputs.size() != g.inputs.size())
    throw Error(Errc::interface_changed,
                "expected " + std::to_string(g.inputs.size()) + " inputs, got " +
                    std::to_string(inputs.size()));
  for (size_t i = 0; i < inputs.size(); ++i) {
    const TensorShape& declared = g.inputs[i].second;
    const TensorShape& got = inputs[i].shape;
    bool ok = declared.rank() == got.rank();
    for (int d = 0; ok && d < declared.rank(); ++d)
      ok = declared.dims[size_t(d)] == got.dims[size_t(d)] ||
           (d == 0 && declared.dims[0] == TensorShape::kDynamic);
    if (!ok || int64_t(inputs[i].data.size()) != inputs[i].numel())
      throw Error(Errc::shape_mismatch,
                  "input " + std::to_string(i) + " is " + got.str() +
                      ", declared " + declared.str());
  }

  auto order = topological_order(g);
  if (!order)
    throw Error(Errc::invalid_argument, "graph has a cycle");
  auto idx = g.node_index();

  std::map<std::pair<int64_t, int>, std::pair<int64_t, int>> feeds;
  std::map<int64_t, int> indeg;
  for (const auto& e : g.edges) {
    feeds[{e.dst, e.dst_port}] = {e.src, e.src_port};
    indeg[e.dst]++;
  }
  std::map<int64_t, Tensor> declared_input;
  for (size_t i = 0; i < g.inputs.size(); ++i)
    declared_input[g.inputs[i].first] = inputs[i];

  std::map<int64_t, Tensor> value;
  for (int64_t id : *order) {
    const Node& node = g.nodes[idx.at(id)];
    if (node.op == Op::input) {
      value[id] = declared_input.at(id);
      continue;
    }
    int d = indeg.count(id) ? indeg[id] : 0;
    std::vector<Tensor> ins;
    ins.reserve(size_t(d));
    for (int p = 0; p < d; ++p)
      ins.push_back(value.at(feeds.at({id, p}).first));

    Tensor out;
    switch (node.op) {
    case Op::input:
      break;
    case Op::output:
    case Op::identity:
    case Op::batchnorm: // fixed scale 1, shift 0
      out = ins[0];
      break;
    case Op::relu:
      out = ins[0];
      for (auto& x : out.data)
        x = std::max(0.0, x);
      break;
    case Op::sigmoid:
      out = ins[0];
      for (auto& x : out.data)
        x = 1.0 / (1.0 + std::exp(-x));
      break;
    case Op::softmax:
      out = run_softmax(ins[0], std::get<AxisAttrs>(node.attrs).axis);
      break;
    case Op::add:
    case Op::fused_add_relu:
      elementwise_check(ins[0], ins[1], id);
      out = ins[0];
      for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] += ins[1].data[i];
      if (node.op == Op::fused_add_relu)
        for (auto& x : out.data)
          x = std::max(0.0, x);
      break;
    case Op::mul:
      elementwise_check(ins[0], ins[1], id);
      out = ins[0];
      for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] *= ins[1].data[i];
      break;
    case Op::concat:
      out = run_concat(ins, std::get<AxisAttrs>(node.attrs).axis);
      break;
    case Op::conv2d:
    case Op::fused_conv_relu: {
      const auto& a = std::get<ConvAttrs>(node.attrs);
      size_t wcount = size_t(a.cout) * size_t(a.cin) * size_t(a.kernel) *
                      size_t(a.kernel);
      out = run_conv(ins[0], a, weights(id, wcount), id);
      if (node.op == Op::fused_conv_relu)
        for (auto& x : out.data)
          x = std::max(0.0, x);
      break;
    }
    case Op::maxpool2d:
      out = run_pool(ins[0], std::get<ConvAttrs>(node.attrs), true, id);
      break;
    case Op::avgpool2d:
      out = run_pool(ins[0], std::get<ConvAttrs>(node.attrs), false, id);
      break;
    case Op::globalavgpool: {
      const auto& s = ins[0].shape.dims;
      if (ins[0].shape.rank() != 4)
        throw Error(Errc::shape_mismatch, "globalavgpool input " + ins[0].shape.str());
      out = Tensor::zeros(TensorShape{s[0], s[1]});
      int64_t hw = s[2] * s[3];
      for (int64_t b = 0; b < s[0]; ++b)
        for (int64_t c = 0; c < s[1]; ++c) {
          double acc = 0.0;
          for (int64_t i = 0; i < hw; ++i)
            acc += ins[0].data[size_t((b * s[1] + c) * hw + i)];
          out.data[size_t(b * s[1] + c)] = acc / double(hw);
        }
      break;
    }
    case Op::matmul: {
      const auto& A = ins[0], &B = ins[1];
      if (A.shape.rank() != 2 || B.shape.rank() != 2 ||
          A.shape.dims[1] != B.shape.dims[1])
        throw Error(Errc::shape_mismatch,
                    "matmul operands " + A.shape.str() + " x " + B.shape.str(),
                    id);
      int64_t n = A.shape.dims[0], kk = A.shape.dims[1], mo = B.shape.dims[0];
      out = Tensor::zeros(TensorShape{n, mo});
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < mo; ++j) {
          double acc = 0.0;
          for (int64_t k2 = 0; k2 < kk; ++k2)
            acc += A.data[size_t(i * kk + k2)] * B.data[size_t(j * kk + k2)];
          out.data[size_t(i * mo + j)] = acc;
        }
      break;
    }
    case Op::flatten:
    case Op::reshape: {
      out = ins[0];
      int64_t rest = ins[0].numel() / ins[0].shape.dims[0];
      out.shape = TensorShape{ins[0].shape.dims[0], rest};
      break;
    }
    case Op::transpose:
      out = run_transpose(ins[0]);
      break;
    }
    value[id] = std::move(out);
  }

  std::vector<Tensor> outs;
  outs.reserve(g.outputs.size());
  for (const auto& [id, port] : g.outputs) {
    (void)port; // single output port per node
    outs.push_back(value.at(id));
  }
  return outs;
}

EquivalenceVerdict check_equivalence(const OpGraph& g1, const OpGraph& g2,
                                     int trials, uint64_t seed, double tol,
                                     const WeightFn& weights) {
  if (g1.inputs.size() != g2.inputs.size() || g1.outputs.size() != g2.outputs.size())
    throw Error(Errc::interface_changed, "interface arity differs");
  for (size_t i = 0; i < g1.inputs.size(); ++i)
    if (g1.inputs[i].second != g2.inputs[i].second)
      throw Error(Errc::interface_changed,
                  "input " + std::to_string(i) + " shape differs: " +
                      g1.inputs[i].second.str() + " vs " + g2.inputs[i].second.str());

  EquivalenceVerdict verdict;
  verdict.pass = true;
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, uint64_t(t)));
    std::vector<Tensor> inputs;
    for (const auto& [id, shape] : g1.inputs) {
      TensorShape concrete = shape;
      if (!concrete.dims.empty() && concrete.dims[0] == TensorShape::kDynamic)
        concrete.dims[0] = 1;
      Tensor x = Tensor::zeros(concrete);
      for (auto& v : x.data)
        v = rng.next_normal();
      inputs.push_back(std::move(x));
    }
    auto out1 = execute(g1, inputs, weights);
    auto out2 = execute(g2, inputs, weights);
    for (size_t o = 0; o < out1.size(); ++o) {
      if (out1[o].shape != out2[o].shape) {
        verdict.pass = false;
        verdict.note = "output " + std::to_string(o) + " shape differs";
        return verdict;
      }
      for (size_t i = 0; i < out1[o].data.size(); ++i) {
        double a = out1[o].data[i], b = out2[o].data[i];
        double denom = std::max({std::fabs(a), std::fabs(b), 1e-12});
        double rel = std::fabs(a - b) / denom;
        verdict.max_rel_err = std::max(verdict.max_rel_err, rel);
        if (rel > tol)
          verdict.pass = false;
      }
    }
    if (!verdict.pass)
      break;
  }
  return verdict;
}

} // namespace graphveil
