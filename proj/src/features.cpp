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

#include "graphveil/features.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>

namespace graphveil {

const char* const kFeatureNames[kFeatureDim] = {"avg_degree", "clustering",
                                                "diameter", "node_count"};

SimpleGraph SimpleGraph::from_edges(int n,
                                    const std::vector<std::pair<int, int>>& edges) {
  SimpleGraph g;
  g.n = n;
  std::vector<std::set<int>> adj(static_cast<size_t>(n));
  for (auto [a, b] : edges) {
    if (a == b)
      continue;
    adj[size_t(a)].insert(b);
    adj[size_t(b)].insert(a);
  }
  g.adj.reserve(size_t(n));
  for (auto& s : adj)
    g.adj.emplace_back(s.begin(), s.end());
  return g;
}

SimpleGraph undirected_view(const OpGraph& g) {
  std::map<int64_t, int> compact;
  for (const auto& n : g.nodes)
    compact.emplace(n.id, int(compact.size()));
  std::vector<std::pair<int, int>> edges;
  edges.reserve(g.edges.size());
  for (const auto& e : g.edges)
    edges.emplace_back(compact.at(e.src), compact.at(e.dst));
  return SimpleGraph::from_edges(int(g.nodes.size()), edges);
}

namespace {

// BFS distances from src; unreachable nodes stay -1.
std::vector<int> bfs_dist(const SimpleGraph& g, int src) {
  std::vector<int> dist(size_t(g.n), -1);
  std::queue<int> q;
  dist[size_t(src)] = 0;
  q.push(src);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : g.adj[size_t(u)])
      if (dist[size_t(v)] < 0) {
        dist[size_t(v)] = dist[size_t(u)] + 1;
        q.push(v);
      }
  }
  return dist;
}

} // namespace

FeatureVector compute_features(const SimpleGraph& g) {
  FeatureVector f;
  f.node_count = g.n;
  if (g.n == 0)
    return f;

  int64_t edge_count = 0;
  for (const auto& a : g.adj)
    edge_count += int64_t(a.size());
  edge_count /= 2;
  f.avg_degree = 2.0 * double(edge_count) / double(g.n);

  // Mean local clustering; nodes of degree < 2 contribute 0.
  double cl = 0.0;
  for (int v = 0; v < g.n; ++v) {
    const auto& nb = g.adj[size_t(v)];
    size_t d = nb.size();
    if (d < 2)
      continue;
    int links = 0;
    for (size_t i = 0; i < d; ++i)
      for (size_t j = i + 1; j < d; ++j) {
        const auto& ni = g.adj[size_t(nb[i])];
        if (std::binary_search(ni.begin(), ni.end(), nb[j]))
          ++links;
      }
    cl += 2.0 * double(links) / (double(d) * double(d - 1));
  }
  f.clustering = cl / double(g.n);

  // Diameter of the largest connected component.
  std::vector<int> comp(size_t(g.n), -1);
  int best_root = 0, best_size = 0;
  for (int v = 0; v < g.n; ++v) {
    if (comp[size_t(v)] >= 0)
      continue;
    auto dist = bfs_dist(g, v);
    int size = 0;
    for (int u = 0; u < g.n; ++u)
      if (dist[size_t(u)] >= 0) {
        comp[size_t(u)] = v;
        ++size;
      }
    if (size > best_size) {
      best_size = size;
      best_root = v;
    }
  }
  int diameter = 0;
  auto in_comp = bfs_dist(g, best_root);
  for (int v = 0; v < g.n; ++v) {
    if (in_comp[size_t(v)] < 0)
      continue;
    auto dist = bfs_dist(g, v);
    for (int u = 0; u < g.n; ++u)
      diameter = std::max(diameter, dist[size_t(u)]);
  }
  f.diameter = diameter;
  return f;
}

FeatureVector compute_features(const OpGraph& g) {
  return compute_features(undirected_view(g));
}

} // namespace graphveil
