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

#include "graphveil/graph.hpp"

#include <algorithm>
#include <array>
#include <queue>
#include <set>
#include <sstream>

namespace graphveil {

std::string TensorShape::str() const {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i)
      os << ",";
    if (dims[i] == kDynamic)
      os << "dynamic";
    else
      os << dims[i];
  }
  os << ")";
  return os.str();
}

namespace {

constexpr std::array<const char*, kOpCount> kOpNames = {
    "input",     "output",    "conv2d",        "matmul",        "add",
    "mul",       "concat",    "relu",          "sigmoid",       "softmax",
    "maxpool2d", "avgpool2d", "globalavgpool", "batchnorm",     "flatten",
    "reshape",   "transpose", "identity",      "fused_conv_relu",
    "fused_add_relu"};

} // namespace

const char* op_name(Op op) { return kOpNames[size_t(op)]; }

std::optional<Op> op_from_name(const std::string& name) {
  for (size_t i = 0; i < kOpNames.size(); ++i)
    if (name == kOpNames[i])
      return Op(i);
  return std::nullopt;
}

bool op_has_conv_attrs(Op op) {
  return op == Op::conv2d || op == Op::maxpool2d || op == Op::avgpool2d ||
         op == Op::fused_conv_relu;
}

bool op_has_axis_attrs(Op op) { return op == Op::concat || op == Op::softmax; }

ArityRange op_arity(Op op) {
  switch (op) {
  case Op::input:
    return {0, 0};
  case Op::add:
  case Op::mul:
  case Op::matmul:
  case Op::fused_add_relu:
    return {2, 2};
  case Op::concat:
    return {2, 4};
  default:
    return {1, 1};
  }
}

const Node* OpGraph::find_node(int64_t id) const {
  for (const auto& n : nodes)
    if (n.id == id)
      return &n;
  return nullptr;
}

Node* OpGraph::find_node(int64_t id) {
  for (auto& n : nodes)
    if (n.id == id)
      return &n;
  return nullptr;
}

std::map<int64_t, size_t> OpGraph::node_index() const {
  std::map<int64_t, size_t> idx;
  for (size_t i = 0; i < nodes.size(); ++i)
    idx[nodes[i].id] = i;
  return idx;
}

int64_t OpGraph::max_node_id() const {
  int64_t m = -1;
  for (const auto& n : nodes)
    m = std::max(m, n.id);
  return m;
}

std::optional<std::vector<int64_t>> topological_order(const OpGraph& g) {
  auto idx = g.node_index();
  std::map<int64_t, int> indeg;
  std::map<int64_t, std::vector<int64_t>> succ;
  for (const auto& n : g.nodes)
    indeg[n.id] = 0;
  for (const auto& e : g.edges) {
    if (!idx.count(e.src) || !idx.count(e.dst))
      return std::nullopt;
    indeg[e.dst]++;
    succ[e.src].push_back(e.dst);
  }
  std::priority_queue<int64_t, std::vector<int64_t>, std::greater<>> ready;
  for (const auto& [id, d] : indeg)
    if (d == 0)
      ready.push(id);
  std::vector<int64_t> order;
  order.reserve(g.nodes.size());
  while (!ready.empty()) {
    int64_t u = ready.top();
    ready.pop();
    order.push_back(u);
    for (int64_t v : succ[u])
      if (--indeg[v] == 0)
        ready.push(v);
  }
  if (order.size() != g.nodes.size())
    return std::nullopt;
  return order;
}

bool undirected_connected(const OpGraph& g) {
  if (g.nodes.empty())
    return true;
  std::map<int64_t, std::vector<int64_t>> adj;
  for (const auto& n : g.nodes)
    adj[n.id];
  for (const auto& e : g.edges) {
    adj[e.src].push_back(e.dst);
    adj[e.dst].push_back(e.src);
  }
  std::set<int64_t> seen;
  std::queue<int64_t> q;
  q.push(g.nodes.front().id);
  seen.insert(g.nodes.front().id);
  while (!q.empty()) {
    int64_t u = q.front();
    q.pop();
    for (int64_t v : adj[u])
      if (seen.insert(v).second)
        q.push(v);
  }
  return seen.size() == g.nodes.size();
}

namespace {

void check_attrs(const Node& n, std::vector<Violation>& out) {
  if (op_has_conv_attrs(n.op)) {
    const auto* a = std::get_if<ConvAttrs>(&n.attrs);
    if (!a) {
      out.push_back({"attrs", n.id, "missing conv attributes"});
      return;
    }
    bool kernel_ok = a->kernel == 1 || a->kernel == 3 || a->kernel == 5 || a->kernel == 7;
    if (!kernel_ok)
      out.push_back({"attrs", n.id, "kernel must be one of {1,3,5,7}"});
    if (a->cin < 1 || a->cout < 1 || a->stride < 1)
      out.push_back({"attrs", n.id, "channels and stride must be positive"});
    if ((n.op == Op::maxpool2d || n.op == Op::avgpool2d) && a->cin != a->cout)
      out.push_back({"attrs", n.id, "pooling preserves channels (cin != cout)"});
  } else if (op_has_axis_attrs(n.op)) {
    if (!std::holds_alternative<AxisAttrs>(n.attrs))
      out.push_back({"attrs", n.id, "missing axis attribute"});
  } else if (!std::holds_alternative<std::monostate>(n.attrs)) {
    out.push_back({"attrs", n.id, "opcode takes no attributes"});
  }
}

} // namespace

std::vector<Violation> validate(const OpGraph& g) {
  std::vector<Violation> out;

  std::set<int64_t> ids;
  for (const auto& n : g.nodes) {
    if (!ids.insert(n.id).second)
      out.push_back({"duplicate_id", n.id, "node id appears more than once"});
    if (n.id < 0)
      out.push_back({"node_id", n.id, "node ids must be non-negative"});
    check_attrs(n, out);
  }

  std::map<int64_t, int> indeg;
  std::set<std::pair<int64_t, int>> fed_ports;
  for (const auto& e : g.edges) {
    if (!ids.count(e.src) || !ids.count(e.dst)) {
      out.push_back({"dangling_edge", ids.count(e.src) ? e.dst : e.src,
                     "edge references a missing node"});
      continue;
    }
    if (e.src == e.dst)
      out.push_back({"self_loop", e.src, "self edges are not allowed"});
    if (e.src_port != 0)
      out.push_back({"port", e.src, "all opcodes produce a single output port"});
    if (e.dst_port < 0)
      out.push_back({"port", e.dst, "negative input port"});
    if (!fed_ports.insert({e.dst, e.dst_port}).second)
      out.push_back({"duplicate_port", e.dst,
                     "input port " + std::to_string(e.dst_port) + " fed twice"});
    indeg[e.dst]++;
  }

  for (const auto& n : g.nodes) {
    int d = indeg.count(n.id) ? indeg[n.id] : 0;
    ArityRange a = op_arity(n.op);
    if (d < a.min || d > a.max)
      out.push_back({"arity", n.id,
                     std::string(op_name(n.op)) + " has in-degree " +
                         std::to_string(d)});
    // Ports must be the contiguous range [0, d).
    for (int p = 0; p < d; ++p)
      if (!fed_ports.count({n.id, p}))
        out.push_back({"port", n.id, "input ports are not contiguous"});
  }

  // Declared graph inputs must be `input` nodes with well-formed shapes and
  // vice versa: every `input` node needs a declared shape.
  std::set<int64_t> declared_inputs;
  for (const auto& [id, shape] : g.inputs) {
    if (!declared_inputs.insert(id).second)
      out.push_back({"interface", id, "node declared as graph input twice"});
    const Node* n = g.find_node(id);
    if (!n)
      out.push_back({"interface", id, "graph input references a missing node"});
    else if (n->op != Op::input)
      out.push_back({"interface", id, "graph input is not an `input` node"});
    if (!shape.well_formed())
      out.push_back({"interface", id, "malformed input shape " + shape.str()});
  }
  for (const auto& n : g.nodes)
    if (n.op == Op::input && !declared_inputs.count(n.id))
      out.push_back({"interface", n.id, "`input` node has no declared shape"});

  for (const auto& [id, port] : g.outputs) {
    if (!ids.count(id))
      out.push_back({"interface", id, "graph output references a missing node"});
    if (port != 0)
      out.push_back({"interface", id, "graph output port out of range"});
  }

  auto topo = topological_order(g);
  if (!topo)
    out.push_back({"cycle", -1, "graph contains a directed cycle"});

  // Reachability: every node must be reachable from some input node.
  if (topo && !g.nodes.empty()) {
    std::map<int64_t, std::vector<int64_t>> succ;
    for (const auto& e : g.edges)
      succ[e.src].push_back(e.dst);
    std::set<int64_t> seen;
    std::queue<int64_t> q;
    for (const auto& n : g.nodes)
      if (n.op == Op::input) {
        seen.insert(n.id);
        q.push(n.id);
      }
    while (!q.empty()) {
      int64_t u = q.front();
      q.pop();
      for (int64_t v : succ[u])
        if (seen.insert(v).second)
          q.push(v);
    }
    for (const auto& n : g.nodes)
      if (!seen.count(n.id))
        out.push_back({"unreachable", n.id, "not reachable from any input"});
  }

  return out;
}

} // namespace graphveil
