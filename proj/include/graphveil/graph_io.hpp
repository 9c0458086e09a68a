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

#include <string>

#include "graphveil/graph.hpp"

namespace graphveil {

/// Canonical single-document text form of a graph:
///   {"nodes":[{"id":0,"op":"conv2d","attrs":{...}},...],
///    "edges":[{"src":0,"sp":0,"dst":1,"dp":0},...],
///    "inputs":[[0,[1,3,8,8]]],"outputs":[[5,0]]}
/// Nodes are sorted by id and edges by (src,sp,dst,dp), so equal graphs
/// serialize byte-identically. The dynamic batch dimension serializes as the
/// string "dynamic". Interface lists keep their declared order.
std::string serialize(const OpGraph& g);

/// Inverse of serialize. Rejects unknown fields, unknown opcodes and
/// malformed shapes; throws Error{parse_error} with field context.
OpGraph parse(const std::string& text);

/// Structural equality through the canonical text form.
inline bool graphs_equal(const OpGraph& a, const OpGraph& b) {
  return serialize(a) == serialize(b);
}

void save_graph(const OpGraph& g, const std::string& path);
OpGraph load_graph(const std::string& path);

} // namespace graphveil
