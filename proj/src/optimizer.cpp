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

#include "graphveil/optimizer.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "graphveil/errors.hpp"

namespace graphveil {

namespace {

constexpr const char* kRuleNames[] = {"identity_elim", "fuse_conv_relu",
                                      "fuse_add_relu",
                                      "constant_fold_identity_chain"};

bool in_outputs(const OpGraph& g, int64_t id) {
  for (const auto& [oid, port] : g.outputs)
    if (oid == id)
      return true;
  return false;
}

/// Removes `victim` (a single-input node), rerouting its consumers and any
/// graph_outputs entry to (src, src_port).
void splice_out(OpGraph& g, int64_t victim, int64_t src, int src_port) {
  std::vector<Edge> kept;
  kept.reserve(g.edges.size());
  for (const auto& e : g.edges) {
    if (e.dst == victim)
      continue;
    if (e.src == victim)
      kept.push_back({src, src_port, e.dst, e.dst_port});
    else
      kept.push_back(e);
  }
  g.edges = std::move(kept);
  for (auto& [oid, port] : g.outputs)
    if (oid == victim) {
      oid = src;
      port = src_port;
    }
  std::erase_if(g.nodes, [&](const Node& n) { return n.id == victim; });
}

/// One application of a rule at the smallest matching node id; false when no
/// match exists.
bool apply_once(OpGraph& g, RewriteRule rule) {
  std::map<int64_t, int> outdeg;
  std::map<int64_t, Edge> in_edge; // for single-input nodes
  std::map<int64_t, int> indeg;
  for (const auto& e : g.edges) {
    outdeg[e.src]++;
    indeg[e.dst]++;
    in_edge[e.dst] = e;
  }
  std::vector<const Node*> by_id;
  by_id.reserve(g.nodes.size());
  for (const auto& n : g.nodes)
    by_id.push_back(&n);
  std::sort(by_id.begin(), by_id.end(),
            [](const Node* a, const Node* b) { return a->id < b->id; });

  auto single_consumer = [&](int64_t id) -> const Node* {
    if (outdeg[id] != 1)
      return nullptr;
    for (const auto& e : g.edges)
      if (e.src == id)
        return g.find_node(e.dst);
    return nullptr;
  };

  switch (rule) {
  case RewriteRule::identity_elim:
    for (const Node* n : by_id)
      if (n->op == Op::identity) {
        Edge feed = in_edge.at(n->id);
        splice_out(g, n->id, feed.src, feed.src_port);
        return true;
      }
    return false;

  case RewriteRule::constant_fold_identity_chain:
    for (const Node* n : by_id) {
      if (n->op != Op::identity || indeg[n->id] != 1)
        continue;
      Edge feed = in_edge.at(n->id);
      const Node* producer = g.find_node(feed.src);
      if (producer && producer->op == Op::identity) {
        splice_out(g, n->id, feed.src, feed.src_port);
        return true;
      }
    }
    return false;

  case RewriteRule::fuse_conv_relu:
  case RewriteRule::fuse_add_relu: {
    Op trigger = rule == RewriteRule::fuse_conv_relu ? Op::conv2d : Op::add;
    Op fused = rule == RewriteRule::fuse_conv_relu ? Op::fused_conv_relu
                                                   : Op::fused_add_relu;
    for (const Node* n : by_id) {
      if (n->op != trigger || in_outputs(g, n->id))
        continue;
      const Node* consumer = single_consumer(n->id);
      if (!consumer || consumer->op != Op::relu)
        continue;
      int64_t relu_id = consumer->id;
      g.find_node(n->id)->op = fused;
      splice_out(g, relu_id, n->id, 0);
      return true;
    }
    return false;
  }
  }
  return false;
}

} // namespace

const char* rewrite_rule_name(RewriteRule r) { return kRuleNames[size_t(r)]; }

std::optional<RewriteRule> rewrite_rule_from_name(const std::string& name) {
  for (size_t i = 0; i < 4; ++i)
    if (name == kRuleNames[i])
      return RewriteRule(i);
  return std::nullopt;
}

std::vector<RewriteRule> all_rewrite_rules() {
  return {RewriteRule::identity_elim, RewriteRule::fuse_conv_relu,
          RewriteRule::fuse_add_relu, RewriteRule::constant_fold_identity_chain};
}

OpGraph optimize(const OpGraph& g, const std::vector<RewriteRule>& rules) {
  OpGraph out = g;
  bool changed = true;
  while (changed) {
    changed = false;
    for (RewriteRule rule : rules)
      while (apply_once(out, rule))
        changed = true;
  }
  return out;
}

} // namespace graphveil
