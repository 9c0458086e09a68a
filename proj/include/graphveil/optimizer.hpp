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

#include <optional>
#include <string>
#include <vector>

#include "graphveil/graph.hpp"

namespace graphveil {

/// Exact, interface-preserving local rewrites. Surviving nodes keep their
/// ids (fusions morph the producer in place), so id-derived pseudo-weights
/// stay aligned across a rewrite.
enum class RewriteRule {
  identity_elim,
  fuse_conv_relu,
  fuse_add_relu,
  constant_fold_identity_chain,
};

const char* rewrite_rule_name(RewriteRule r);
std::optional<RewriteRule> rewrite_rule_from_name(const std::string& name);
std::vector<RewriteRule> all_rewrite_rules();

/// Applies the rules to fixpoint in the listed order. The result is valid,
/// has the same interface, and never more nodes than the input.
OpGraph optimize(const OpGraph& g, const std::vector<RewriteRule>& rules);

} // namespace graphveil
