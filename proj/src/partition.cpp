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

#include "graphveil/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "graphveil/errors.hpp"
#include "graphveil/rng.hpp"
#include "graphveil/shape_inference.hpp"

namespace graphveil {

namespace {

struct Dsu {
  std::vector<int> parent;
  explicit Dsu(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[size_t(x)] != x) {
      parent[size_t(x)] = parent[size_t(parent[size_t(x)])];
      x = parent[size_t(x)];
    }
    return x;
  }
  void unite(int a, int b) { parent[size_t(find(a))] = find(b); }
};

} // namespace

Partition contract_once(const OpGraph& g, int n, uint64_t seed) {
  const int v = int(g.nodes.size());
  if (n < 1 || n > v)
    throw Error(Errc::invalid_argument,
                "n must be in [1, |V|], got n=" + std::to_string(n) +
                    " with |V|=" + std::to_string(v));
  if (!undirected_connected(g))
    throw Error(Errc::disconnected, "graph is not connected in the undirected view");

  std::map<int64_t, int> compact;
  for (const auto& node : g.nodes)
    compact.emplace(node.id, int(compact.size()));

  // Live edge list as compact index pairs; parallel edges keep multiplicity.
  std::vector<std::pair<int, int>> live;
  live.reserve(g.edges.size());
  for (const auto& e : g.edges)
    live.emplace_back(compact.at(e.src), compact.at(e.dst));

  Dsu dsu(size_t(v));
  Rng rng(seed);
  int supernodes = v;
  while (supernodes > n) {
    if (live.empty())
      throw Error(Errc::disconnected, "ran out of edges before reaching n parts");
    size_t pick = size_t(rng.next_below(live.size()));
    auto [a, b] = live[pick];
    int ra = dsu.find(a), rb = dsu.find(b);
    if (ra == rb) { // collapsed to a self-loop; drop without consuming a merge
      live[pick] = live.back();
      live.pop_back();
      continue;
    }
    dsu.unite(ra, rb);
    --supernodes;
    live[pick] = live.back();
    live.pop_back();
  }

  Partition p;
  p.n = n;
  // Canonical part numbering: first appearance over ascending node id.
  std::map<int, int> root_to_part;
  for (const auto& node : g.nodes) {
    int root = dsu.find(compact.at(node.id));
    auto [it, fresh] = root_to_part.emplace(root, int(root_to_part.size()));
    p.assignment[node.id] = it->second;
    (void)fresh;
  }
  p.part_sizes.assign(size_t(n), 0);
  for (const auto& [id, part] : p.assignment)
    p.part_sizes[size_t(part)]++;

  std::vector<Edge> sorted_edges = g.edges;
  std::sort(sorted_edges.begin(), sorted_edges.end());
  for (const auto& e : sorted_edges) {
    int sp = p.assignment.at(e.src);
    int dp = p.assignment.at(e.dst);
    if (sp != dp)
      p.cross_edges.emplace_back(e, sp, dp);
  }
  return p;
}

double part_size_stddev(const std::vector<int>& sizes) {
  if (sizes.empty())
    return 0.0;
  double mean = std::accumulate(sizes.begin(), sizes.end(), 0.0) / double(sizes.size());
  double acc = 0.0;
  for (int s : sizes)
    acc += (double(s) - mean) * (double(s) - mean);
  return std::sqrt(acc / double(sizes.size()));
}

Partition partition_balanced(const OpGraph& g, const PartitionConfig& cfg) {
  if (cfg.trials < 1)
    throw Error(Errc::invalid_argument, "trials must be >= 1");
  Partition best;
  double best_dev = 0.0;
  for (int t = 0; t < cfg.trials; ++t) {
    Partition cand = contract_once(g, cfg.n, cfg.seed + uint64_t(t));
    double dev = part_size_stddev(cand.part_sizes);
    if (t == 0 || dev < best_dev) {
      best = std::move(cand);
      best_dev = dev;
    }
  }
  return best;
}

ExtractResult extract_subgraphs(const OpGraph& g, const Partition& p) {
  ShapeResult shapes = propagate_shapes(g);
  if (!shapes.ok)
    throw Error(Errc::invalid_argument,
                "graph does not shape-propagate: " + shapes.failure.message);

  const int n = p.n;
  ExtractResult res;
  res.parts.resize(size_t(n));
  res.binding.n = n;
  res.binding.local_to_orig.resize(size_t(n));

  // Canonical local ids: part nodes in ascending original id.
  std::vector<std::map<int64_t, int64_t>> orig_to_local(size_t(n));
  std::vector<std::vector<int64_t>> part_nodes(size_t(n));
  {
    std::vector<int64_t> ids;
    ids.reserve(g.nodes.size());
    for (const auto& node : g.nodes)
      ids.push_back(node.id);
    std::sort(ids.begin(), ids.end());
    for (int64_t id : ids)
      part_nodes[size_t(p.assignment.at(id))].push_back(id);
  }
  auto idx = g.node_index();
  for (int i = 0; i < n; ++i) {
    for (int64_t id : part_nodes[size_t(i)]) {
      int64_t local = int64_t(res.binding.local_to_orig[size_t(i)].size());
      orig_to_local[size_t(i)][id] = local;
      res.binding.local_to_orig[size_t(i)].push_back(id);
      const Node& src = g.nodes[idx.at(id)];
      res.parts[size_t(i)].nodes.push_back({local, src.op, src.attrs});
    }
  }

  // Internal edges.
  for (const auto& e : g.edges) {
    int sp = p.assignment.at(e.src);
    int dp = p.assignment.at(e.dst);
    if (sp == dp)
      res.parts[size_t(sp)].edges.push_back({orig_to_local[size_t(sp)].at(e.src),
                                             e.src_port,
                                             orig_to_local[size_t(sp)].at(e.dst),
                                             e.dst_port});
  }

  // Original interface first, so parts keep the protected graph's own
  // inputs/outputs at the head of their slot lists.
  for (size_t k = 0; k < g.inputs.size(); ++k) {
    const auto& [id, shape] = g.inputs[k];
    int part = p.assignment.at(id);
    res.binding.input_map.emplace_back(part,
                                       int(res.parts[size_t(part)].inputs.size()));
    res.parts[size_t(part)].inputs.emplace_back(orig_to_local[size_t(part)].at(id),
                                                shape);
  }
  for (size_t k = 0; k < g.outputs.size(); ++k) {
    const auto& [id, port] = g.outputs[k];
    int part = p.assignment.at(id);
    res.binding.output_map.emplace_back(part,
                                        int(res.parts[size_t(part)].outputs.size()));
    res.parts[size_t(part)].outputs.emplace_back(orig_to_local[size_t(part)].at(id),
                                                 port);
  }

  // Cross edges: inject a fresh `input` on the consumer side and export the
  // producer (node, port) once per distinct pair. p.cross_edges is already
  // canonically sorted.
  std::vector<std::map<std::pair<int64_t, int>, int>> export_slot(size_t(n));
  for (const auto& [e, sp, dp] : p.cross_edges) {
    auto& producer = res.parts[size_t(sp)];
    auto key = std::make_pair(e.src, e.src_port);
    auto it = export_slot[size_t(sp)].find(key);
    int pslot;
    if (it != export_slot[size_t(sp)].end()) {
      pslot = it->second;
    } else {
      pslot = int(producer.outputs.size());
      export_slot[size_t(sp)][key] = pslot;
      producer.outputs.emplace_back(orig_to_local[size_t(sp)].at(e.src), e.src_port);
    }

    auto& consumer = res.parts[size_t(dp)];
    int64_t fresh = int64_t(consumer.nodes.size());
    const TensorShape& shape = shapes.shapes.at({e.src, e.src_port});
    consumer.nodes.push_back({fresh, Op::input, {}});
    int cslot = int(consumer.inputs.size());
    consumer.inputs.emplace_back(fresh, shape);
    consumer.edges.push_back({fresh, 0, orig_to_local[size_t(dp)].at(e.dst), e.dst_port});

    res.binding.cross.push_back({sp, pslot, dp, cslot, shape});
  }

  return res;
}

OpGraph stitch_parts(const std::vector<OpGraph>& parts, const Binding& binding) {
  if (int(parts.size()) != binding.n)
    throw Error(Errc::invalid_argument, "part count does not match binding");

  // Boundary input nodes per part (to be spliced out).
  std::vector<std::set<int64_t>> spliced(parts.size());
  for (const auto& r : binding.cross) {
    const auto& consumer = parts[size_t(r.consumer_part)];
    if (r.consumer_slot >= int(consumer.inputs.size()))
      throw Error(Errc::interface_changed,
                  "consumer input slot missing in part " +
                      std::to_string(r.consumer_part),
                  r.consumer_part);
    spliced[size_t(r.consumer_part)].insert(
        consumer.inputs[size_t(r.consumer_slot)].first);
  }

  // Restore original ids where the binding knows them; everything else
  // (nodes minted by an optimizer) gets fresh ids above the original range.
  int64_t fresh = 0;
  for (const auto& locals : binding.local_to_orig)
    for (int64_t orig : locals)
      fresh = std::max(fresh, orig + 1);

  std::vector<std::map<int64_t, int64_t>> id_map(parts.size());
  OpGraph out;
  for (size_t i = 0; i < parts.size(); ++i) {
    const auto& locals = binding.local_to_orig[i];
    for (const auto& node : parts[i].nodes) {
      if (spliced[i].count(node.id))
        continue;
      int64_t mapped;
      if (node.id >= 0 && node.id < int64_t(locals.size()))
        mapped = locals[size_t(node.id)];
      else
        mapped = fresh++;
      id_map[i][node.id] = mapped;
      out.nodes.push_back({mapped, node.op, node.attrs});
    }
  }

  // Intra-part edges, skipping those that leave a spliced boundary input.
  for (size_t i = 0; i < parts.size(); ++i)
    for (const auto& e : parts[i].edges) {
      if (spliced[i].count(e.src))
        continue;
      out.edges.push_back({id_map[i].at(e.src), e.src_port, id_map[i].at(e.dst),
                           e.dst_port});
    }

  // Cross wiring: producer output slot -> every consumer of the boundary input.
  for (const auto& r : binding.cross) {
    const auto& producer = parts[size_t(r.producer_part)];
    if (r.producer_slot >= int(producer.outputs.size()))
      throw Error(Errc::interface_changed,
                  "producer output slot missing in part " +
                      std::to_string(r.producer_part),
                  r.producer_part);
    auto [src_local, src_port] = producer.outputs[size_t(r.producer_slot)];
    int64_t src = id_map[size_t(r.producer_part)].at(src_local);

    const auto& consumer = parts[size_t(r.consumer_part)];
    int64_t boundary = consumer.inputs[size_t(r.consumer_slot)].first;
    for (const auto& e : consumer.edges)
      if (e.src == boundary)
        out.edges.push_back({src, src_port,
                             id_map[size_t(r.consumer_part)].at(e.dst), e.dst_port});
  }

  for (const auto& [part, slot] : binding.input_map) {
    const auto& [local, shape] = parts[size_t(part)].inputs[size_t(slot)];
    out.inputs.emplace_back(id_map[size_t(part)].at(local), shape);
  }
  for (const auto& [part, slot] : binding.output_map) {
    const auto& [local, port] = parts[size_t(part)].outputs[size_t(slot)];
    out.outputs.emplace_back(id_map[size_t(part)].at(local), port);
  }

  return out;
}

} // namespace graphveil
