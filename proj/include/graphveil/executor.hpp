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
#include <functional>
#include <string>
#include <vector>

#include "graphveil/graph.hpp"

namespace graphveil {

/// Row-major dense tensor of doubles. Runtime shapes are fully concrete.
struct Tensor {
  TensorShape shape;
  std::vector<double> data;

  static Tensor zeros(const TensorShape& s);
  int64_t numel() const;
};

/// Supplies the `count` kernel weights of a node (only conv-style nodes ask).
/// The default derives values deterministically from the node id, so a graph
/// rewritten without renumbering keeps its semantics and fused nodes reuse
/// their constituents' weights.
using WeightFn = std::function<std::vector<double>(int64_t node_id, size_t count)>;

WeightFn default_weights();
WeightFn ones_weights();

/// Reference interpreter: naive direct kernels, nodes evaluated in
/// topological order. Inputs follow the graph_inputs order; the dynamic batch
/// dim accepts whatever the provided tensors carry. Returns one tensor per
/// graph_outputs entry.
std::vector<Tensor> execute(const OpGraph& g, const std::vector<Tensor>& inputs,
                            const WeightFn& weights = default_weights());

struct EquivalenceVerdict {
  bool pass = false;
  double max_rel_err = 0.0;
  std::string note;
};

/// Runs `trials` seeded standard-normal inputs through both graphs and
/// compares outputs elementwise; pass iff the max relative error never
/// exceeds tol. Throws Error{interface_changed} when the graph interfaces
/// differ (input count/shapes or output count).
EquivalenceVerdict check_equivalence(const OpGraph& g1, const OpGraph& g2,
                                     int trials, uint64_t seed, double tol,
                                     const WeightFn& weights = default_weights());

} // namespace graphveil
