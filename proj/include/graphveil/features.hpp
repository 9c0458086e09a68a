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

#include <array>
#include <cstdint>
#include <vector>

#include "graphveil/graph.hpp"

namespace graphveil {

/// Undirected simple graph over nodes 0..n-1. The statistics below are all
/// defined on this view.
struct SimpleGraph {
  int n = 0;
  std::vector<std::vector<int>> adj; // sorted neighbour lists, no duplicates

  static SimpleGraph from_edges(int n, const std::vector<std::pair<int, int>>& edges);
};

/// Builds the undirected simple view of an OpGraph (ids compacted, parallel
/// edges and direction dropped).
SimpleGraph undirected_view(const OpGraph& g);

/// Graph statistics: average degree, mean local clustering coefficient,
/// diameter of the largest connected component, node count.
struct FeatureVector {
  double avg_degree = 0.0;
  double clustering = 0.0;
  int diameter = 0;
  int node_count = 0;

  std::array<double, 4> as_array() const {
    return {avg_degree, clustering, double(diameter), double(node_count)};
  }
};

constexpr int kFeatureDim = 4;
extern const char* const kFeatureNames[kFeatureDim];

FeatureVector compute_features(const SimpleGraph& g);
FeatureVector compute_features(const OpGraph& g);

} // namespace graphveil
