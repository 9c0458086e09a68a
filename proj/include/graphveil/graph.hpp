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

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace graphveil {

/// Tensor shape. The first dimension is the batch dimension and may be the
/// dynamic sentinel; all other dimensions are concrete positive sizes.
/// Rank is capped at 5.
struct TensorShape {
  static constexpr int64_t kDynamic = -1;
  static constexpr int kMaxRank = 5;

  std::vector<int64_t> dims;

  TensorShape() = default;
  TensorShape(std::initializer_list<int64_t> d) : dims(d) {}
  explicit TensorShape(std::vector<int64_t> d) : dims(std::move(d)) {}

  int rank() const { return int(dims.size()); }

  bool well_formed() const {
    if (dims.empty() || rank() > kMaxRank)
      return false;
    for (size_t i = 0; i < dims.size(); ++i) {
      if (dims[i] == kDynamic && i == 0)
        continue;
      if (dims[i] < 1)
        return false;
    }
    return true;
  }

  bool operator==(const TensorShape& o) const { return dims == o.dims; }
  bool operator!=(const TensorShape& o) const { return !(*this == o); }

  std::string str() const;
};

/// Fixed 20-opcode vocabulary.
enum class Op : uint8_t {
  input,
  output,
  conv2d,
  matmul,
  add,
  mul,
  concat,
  relu,
  sigmoid,
  softmax,
  maxpool2d,
  avgpool2d,
  globalavgpool,
  batchnorm,
  flatten,
  reshape,
  transpose,
  identity,
  fused_conv_relu,
  fused_add_relu,
};

constexpr int kOpCount = 20;

const char* op_name(Op op);
std::optional<Op> op_from_name(const std::string& name);

/// Attributes for conv2d, maxpool2d, avgpool2d and fused_conv_relu.
/// For pooling ops channels pass through, so cin must equal cout.
struct ConvAttrs {
  int kernel = 1;
  int cin = 1;
  int cout = 1;
  int stride = 1;
  bool operator==(const ConvAttrs&) const = default;
};

/// Attributes for concat and softmax.
struct AxisAttrs {
  int axis = 1;
  bool operator==(const AxisAttrs&) const = default;
};

using Attrs = std::variant<std::monostate, ConvAttrs, AxisAttrs>;

/// True when the opcode carries ConvAttrs.
bool op_has_conv_attrs(Op op);
/// True when the opcode carries AxisAttrs.
bool op_has_axis_attrs(Op op);

struct Node {
  int64_t id = 0;
  Op op = Op::identity;
  Attrs attrs;
};

/// One tensor dependency. Each (dst, dst_port) pair is fed exactly once.
/// All opcodes produce a single output, so src_port is 0 throughout; the
/// field is kept for format stability.
struct Edge {
  int64_t src = 0;
  int src_port = 0;
  int64_t dst = 0;
  int dst_port = 0;

  bool operator==(const Edge&) const = default;
  bool operator<(const Edge& o) const {
    return std::tie(src, src_port, dst, dst_port) <
           std::tie(o.src, o.src_port, o.dst, o.dst_port);
  }
};

/// Directed acyclic computational graph of operator nodes and tensor edges.
struct OpGraph {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  /// Interface, in order: (input node id, declared shape).
  std::vector<std::pair<int64_t, TensorShape>> inputs;
  /// Interface, in order: (node id, output port).
  std::vector<std::pair<int64_t, int>> outputs;

  const Node* find_node(int64_t id) const;
  Node* find_node(int64_t id);
  std::map<int64_t, size_t> node_index() const;
  int64_t max_node_id() const;
};

/// Allowed in-degree range of an opcode.
struct ArityRange {
  int min = 1;
  int max = 1;
};

/// In-degree requirements, shared by validation and the operator-assignment
/// rule set: add/mul/matmul/fused_add_relu take exactly 2, concat 2..4,
/// input 0, everything else 1.
ArityRange op_arity(Op op);

/// A single invariant violation found by validate().
struct Violation {
  std::string kind; // "cycle", "dangling_edge", "arity", "duplicate_port", ...
  int64_t node = -1;
  std::string detail;
};

/// Checks every OpGraph invariant and returns all violations found.
/// An empty result means the graph is valid. Violations are data, not errors.
std::vector<Violation> validate(const OpGraph& g);

/// Topological order of node ids, smallest-id-first among ready nodes.
/// Empty optional if the graph has a cycle.
std::optional<std::vector<int64_t>> topological_order(const OpGraph& g);

/// True when the undirected view of the graph is connected.
bool undirected_connected(const OpGraph& g);

} // namespace graphveil
