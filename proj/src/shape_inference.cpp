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

#include "graphveil/shape_inference.hpp"

#include <algorithm>

namespace graphveil {

namespace {

InferOutcome fail(std::string msg) { return {false, {}, std::move(msg)}; }
InferOutcome pass(TensorShape s) { return {true, std::move(s), {}}; }

bool dims_equal(const TensorShape& a, const TensorShape& b) {
  return a.dims == b.dims;
}

int64_t non_batch_product(const TensorShape& s) {
  int64_t p = 1;
  for (size_t i = 1; i < s.dims.size(); ++i)
    p *= s.dims[i];
  return p;
}

InferOutcome spatial_window(const TensorShape& in, const ConvAttrs& a,
                            int64_t out_channels) {
  if (in.rank() != 4)
    return fail("expected a rank-4 NCHW input, got " + in.str());
  if (in.dims[1] != a.cin)
    return fail("input channels " + std::to_string(in.dims[1]) +
                " do not match cin " + std::to_string(a.cin));
  int64_t h = in.dims[2], w = in.dims[3];
  if (a.kernel > h || a.kernel > w)
    return fail("kernel " + std::to_string(a.kernel) +
                " larger than spatial dims of " + in.str());
  int64_t oh = (h - a.kernel) / a.stride + 1;
  int64_t ow = (w - a.kernel) / a.stride + 1;
  if (oh < 1 || ow < 1)
    return fail("window collapses spatial dims of " + in.str());
  return pass(TensorShape{in.dims[0], out_channels, oh, ow});
}

} // namespace

InferOutcome infer_output_shape(Op op, const Attrs& attrs,
                                const std::vector<TensorShape>& ins) {
  for (const auto& s : ins)
    if (!s.well_formed())
      return fail("malformed input shape " + s.str());

  switch (op) {
  case Op::input:
    return fail("input nodes take their shape from the graph interface");

  case Op::output:
  case Op::identity:
  case Op::relu:
  case Op::sigmoid:
  case Op::batchnorm:
    return pass(ins[0]);

  case Op::softmax: {
    const auto& a = std::get<AxisAttrs>(attrs);
    if (ins[0].rank() < 2)
      return fail("softmax needs rank >= 2, got " + ins[0].str());
    if (a.axis < 1 || a.axis >= ins[0].rank())
      return fail("softmax axis " + std::to_string(a.axis) + " out of range");
    return pass(ins[0]);
  }

  case Op::conv2d:
  case Op::fused_conv_relu: {
    const auto& a = std::get<ConvAttrs>(attrs);
    return spatial_window(ins[0], a, a.cout);
  }

  case Op::maxpool2d:
  case Op::avgpool2d: {
    const auto& a = std::get<ConvAttrs>(attrs);
    return spatial_window(ins[0], a, ins[0].rank() == 4 ? ins[0].dims[1] : 0);
  }

  case Op::globalavgpool: {
    if (ins[0].rank() != 4)
      return fail("globalavgpool expects rank-4 NCHW, got " + ins[0].str());
    return pass(TensorShape{ins[0].dims[0], ins[0].dims[1]});
  }

  case Op::matmul: {
    const auto& a = ins[0];
    const auto& b = ins[1];
    if (a.rank() != 2 || b.rank() != 2)
      return fail("matmul expects two rank-2 operands, got " + a.str() +
                  " and " + b.str());
    if (b.dims[0] == TensorShape::kDynamic)
      return fail("matmul rhs rows may not be dynamic");
    if (a.dims[1] != b.dims[1])
      return fail("matmul contraction dims disagree: " + a.str() + " vs " +
                  b.str());
    return pass(TensorShape{a.dims[0], b.dims[0]});
  }

  case Op::add:
  case Op::mul:
  case Op::fused_add_relu: {
    if (!dims_equal(ins[0], ins[1]))
      return fail("operand shapes differ: " + ins[0].str() + " vs " +
                  ins[1].str());
    return pass(ins[0]);
  }

  case Op::concat: {
    const auto& a = std::get<AxisAttrs>(attrs);
    const auto& first = ins[0];
    if (a.axis < 1 || a.axis >= first.rank())
      return fail("concat axis " + std::to_string(a.axis) + " out of range");
    int64_t total = 0;
    for (const auto& s : ins) {
      if (s.rank() != first.rank())
        return fail("concat ranks differ: " + first.str() + " vs " + s.str());
      for (int d = 0; d < first.rank(); ++d) {
        if (d == a.axis)
          continue;
        if (s.dims[d] != first.dims[d])
          return fail("concat shapes differ off-axis: " + first.str() +
                      " vs " + s.str());
      }
      total += s.dims[a.axis];
    }
    TensorShape out = first;
    out.dims[a.axis] = total;
    return pass(out);
  }

  case Op::flatten:
  case Op::reshape: {
    if (ins[0].rank() < 2)
      return fail("flatten needs rank >= 2, got " + ins[0].str());
    return pass(TensorShape{ins[0].dims[0], non_batch_product(ins[0])});
  }

  case Op::transpose: {
    TensorShape out = ins[0];
    std::reverse(out.dims.begin() + 1, out.dims.end());
    return pass(out);
  }
  }
  return fail("unhandled opcode");
}

ShapeResult propagate_shapes(const OpGraph& g) {
  ShapeResult res;

  std::map<int64_t, TensorShape> declared;
  for (const auto& [id, shape] : g.inputs)
    declared[id] = shape;

  auto order = topological_order(g);
  if (!order) {
    res.failure = {-1, "graph has a cycle"};
    return res;
  }

  auto idx = g.node_index();
  // (dst id, dst port) -> (src id, src port)
  std::map<std::pair<int64_t, int>, std::pair<int64_t, int>> feeds;
  std::map<int64_t, int> indeg;
  for (const auto& e : g.edges) {
    feeds[{e.dst, e.dst_port}] = {e.src, e.src_port};
    indeg[e.dst]++;
  }

  for (int64_t id : *order) {
    const Node& n = g.nodes[idx[id]];
    if (n.op == Op::input) {
      auto it = declared.find(id);
      if (it == declared.end()) {
        res.failure = {id, "input node has no declared shape"};
        return res;
      }
      res.shapes[{id, 0}] = it->second;
      continue;
    }
    int d = indeg.count(id) ? indeg[id] : 0;
    std::vector<TensorShape> ins(static_cast<size_t>(d));
    for (int p = 0; p < d; ++p) {
      auto f = feeds.find({id, p});
      if (f == feeds.end()) {
        res.failure = {id, "input port " + std::to_string(p) + " unfed"};
        return res;
      }
      ins[size_t(p)] = res.shapes.at(f->second);
    }
    InferOutcome out = infer_output_shape(n.op, n.attrs, ins);
    if (!out.ok) {
      res.failure = {id, out.message};
      return res;
    }
    res.shapes[{id, 0}] = out.shape;
  }

  res.ok = true;
  return res;
}

} // namespace graphveil
