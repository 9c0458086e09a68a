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

#include <map>
#include <string>
#include <vector>

#include "graphveil/graph.hpp"

namespace graphveil {

using ShapeMap = std::map<std::pair<int64_t, int>, TensorShape>;

struct ShapeFailure {
  int64_t node = -1;
  std::string message;
};

struct ShapeResult {
  bool ok = false;
  ShapeMap shapes;
  ShapeFailure failure;
};

/// Output shape of a single operator given its input shapes, or an error
/// message. The batch dimension (first, possibly dynamic) passes through.
///
/// Rules:
///   conv2d/fused_conv_relu  NCHW; C must equal cin; spatial
///                           out = floor((in - k) / stride) + 1, no padding
///   maxpool2d/avgpool2d     NCHW; channels preserved; same spatial rule
///   globalavgpool           (N,C,H,W) -> (N,C)
///   matmul                  (N,K) x (M,K) -> (N,M), contraction on the last
///                           dimension of both operands
///   add/mul/fused_add_relu  both shapes equal
///   concat                  equal except on `axis`
///   flatten/reshape         collapse all non-batch dims into one
///   transpose               batch kept, remaining dims reversed
///   softmax/relu/sigmoid/batchnorm/identity/output  unchanged
struct InferOutcome {
  bool ok = false;
  TensorShape shape;
  std::string message;
};

InferOutcome infer_output_shape(Op op, const Attrs& attrs,
                                const std::vector<TensorShape>& ins);

/// Propagates shapes from the declared graph inputs through every node.
/// Requires a graph that passes validate(). On failure, `failure` names the
/// offending node.
ShapeResult propagate_shapes(const OpGraph& g);

} // namespace graphveil
