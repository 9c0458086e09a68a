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

#include "graphveil/populate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "graphveil/errors.hpp"
#include "graphveil/graph_io.hpp"
#include "graphveil/rng.hpp"
#include "graphveil/shape_inference.hpp"

namespace graphveil {

using nlohmann::json;

VocabSpec VocabSpec::standard() {
  VocabSpec v;
  for (int i = 0; i < kOpCount; ++i) {
    Op op = Op(i);
    if (op == Op::fused_conv_relu || op == Op::fused_add_relu)
      continue;
    v.assignable.push_back(op);
  }
  return v;
}

RuleSet generate_ruleset(const DirectedTopology& topo, const VocabSpec& vocab,
                         bool force_sink_output) {
  RuleSet rules;
  rules.vocab = vocab;
  rules.force_sink_output = force_sink_output;
  auto indeg = topo.in_degrees();
  auto outdeg = topo.out_degrees();
  rules.domains.resize(size_t(topo.n));
  for (int v = 0; v < topo.n; ++v) {
    std::vector<Op>& dom = rules.domains[size_t(v)];
    for (Op op : vocab.assignable) {
      ArityRange a = op_arity(op);
      if (indeg[size_t(v)] < a.min || indeg[size_t(v)] > a.max)
        continue;
      if (op == Op::output && outdeg[size_t(v)] > 0)
        continue;
      if (op != Op::output && force_sink_output && outdeg[size_t(v)] == 0 &&
          indeg[size_t(v)] > 0)
        continue;
      dom.push_back(op);
    }
    if (dom.empty())
      throw Error(Errc::unsatisfiable,
                  "node " + std::to_string(v) + " with in-degree " +
                      std::to_string(indeg[size_t(v)]) + " has no viable opcode",
                  v);
  }
  return rules;
}

double NGramModel::prob(Op src, Op dst) const {
  const auto& row = counts[size_t(src)];
  uint64_t total = 0;
  for (uint64_t c : row)
    total += c;
  return (double(row[size_t(dst)]) + laplace) /
         (double(total) + laplace * kOpCount);
}

double NGramModel::logp(Op src, Op dst) const { return std::log(prob(src, dst)); }

double NGramModel::sequence_logprob(const OpGraph& g) const {
  auto idx = g.node_index();
  double acc = 0.0;
  for (const auto& e : g.edges)
    acc += logp(g.nodes[idx.at(e.src)].op, g.nodes[idx.at(e.dst)].op);
  return acc;
}

NGramModel fit_ngram(const Corpus& corpus) {
  if (corpus.models.empty())
    throw Error(Errc::empty_corpus, "cannot fit an n-gram on an empty corpus");
  NGramModel m;
  for (const auto& model : corpus.models) {
    auto idx = model.graph.node_index();
    for (const auto& e : model.graph.edges)
      m.counts[size_t(model.graph.nodes[idx.at(e.src)].op)]
              [size_t(model.graph.nodes[idx.at(e.dst)].op)]++;
  }
  return m;
}

void save_ngram(const NGramModel& m, const std::string& path) {
  json doc;
  doc["laplace"] = m.laplace;
  doc["vocab"] = json::array();
  for (int i = 0; i < kOpCount; ++i)
    doc["vocab"].push_back(op_name(Op(i)));
  doc["counts"] = json::array();
  for (const auto& row : m.counts)
    doc["counts"].push_back(row);
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(Errc::io_error, "cannot write " + path);
  out << doc.dump() << "\n";
}

NGramModel load_ngram(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(Errc::io_error, "cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("ngram model: ") + e.what());
  }
  NGramModel m;
  m.laplace = doc.value("laplace", 1.0);
  const auto& rows = doc.value("counts", json::array());
  if (rows.size() != kOpCount)
    throw Error(Errc::parse_error, "ngram model: bad count matrix");
  for (size_t i = 0; i < rows.size(); ++i) {
    auto row = rows[i].get<std::vector<uint64_t>>();
    if (row.size() != kOpCount)
      throw Error(Errc::parse_error, "ngram model: bad count row");
    std::copy(row.begin(), row.end(), m.counts[i].begin());
  }
  return m;
}

namespace {

struct PortEdge {
  int src;
  int dst;
  int dst_port;
};

/// Search-internal view of the problem: nodes 0..n-1, port-resolved edges,
/// explicit per-source input shapes and optional pinned values.
struct SearchProblem {
  int n = 0;
  std::vector<PortEdge> edges;
  const RuleSet* rules = nullptr;
  const NGramModel* ngram = nullptr;
  std::map<int, TensorShape> input_shapes;
  std::map<int, std::pair<Op, Attrs>> pinned;
  int max_solns = 256;
};

struct RawSolution {
  std::vector<std::pair<Op, Attrs>> values;
  double logprob = 0.0;
};

/// Canonical comparison key so result ordering never depends on search
/// incidentals.
std::string value_key(const std::pair<Op, Attrs>& v) {
  char buf[64];
  if (const auto* c = std::get_if<ConvAttrs>(&v.second))
    std::snprintf(buf, sizeof buf, "%02d:%d:%d:%d:%d", int(v.first), c->kernel,
                  c->cin, c->cout, c->stride);
  else if (const auto* a = std::get_if<AxisAttrs>(&v.second))
    std::snprintf(buf, sizeof buf, "%02d:a%d", int(v.first), a->axis);
  else
    std::snprintf(buf, sizeof buf, "%02d", int(v.first));
  return buf;
}

std::string solution_key(const RawSolution& s) {
  std::string key;
  for (const auto& v : s.values) {
    key += value_key(v);
    key += '|';
  }
  return key;
}

class Enumerator {
public:
  explicit Enumerator(const SearchProblem& p) : p_(p) {
    in_edges_.resize(size_t(p.n));
    succs_.resize(size_t(p.n));
    indeg_.assign(size_t(p.n), 0);
    outdeg_.assign(size_t(p.n), 0);
    for (const auto& e : p.edges) {
      in_edges_[size_t(e.dst)].push_back(e);
      succs_[size_t(e.src)].push_back(e.dst);
      indeg_[size_t(e.dst)]++;
      outdeg_[size_t(e.src)]++;
    }
    for (auto& ins : in_edges_)
      std::sort(ins.begin(), ins.end(),
                [](const PortEdge& a, const PortEdge& b) {
                  return a.dst_port < b.dst_port;
                });
    order_ = topo_order();
    values_.resize(size_t(p.n));
    shapes_.resize(size_t(p.n));
  }

  std::vector<RawSolution> run() {
    if (!order_.empty() || p_.n == 0)
      descend(0, 0.0);
    return std::move(solutions_);
  }

private:
  std::vector<int> topo_order() {
    std::vector<int> indeg = indeg_;
    std::vector<int> order;
    std::set<int> ready;
    for (int v = 0; v < p_.n; ++v)
      if (indeg[size_t(v)] == 0)
        ready.insert(v);
    while (!ready.empty()) {
      int u = *ready.begin();
      ready.erase(ready.begin());
      order.push_back(u);
      for (int v : succs_[size_t(u)])
        if (--indeg[size_t(v)] == 0)
          ready.insert(v);
    }
    if (int(order.size()) != p_.n)
      throw Error(Errc::invalid_argument, "assignment topology has a cycle");
    return order;
  }

  /// Candidate values for `node` given its (already computed) input shapes,
  /// ordered by descending bigram score with deterministic tiebreaks.
  std::vector<std::pair<std::pair<Op, Attrs>, TensorShape>>
  candidates(int node, const std::vector<TensorShape>& ins) {
    std::vector<std::pair<Op, Attrs>> raw;
    auto pinned = p_.pinned.find(node);
    if (pinned != p_.pinned.end()) {
      raw.push_back(pinned->second);
    } else {
      for (Op op : p_.rules->domains[size_t(node)])
        expand_attrs(op, ins, raw);
    }

    // Score by summed bigram log-probability from assigned predecessors.
    struct Scored {
      std::pair<Op, Attrs> value;
      TensorShape out;
      double score;
      std::string key;
    };
    std::vector<Scored> scored;
    for (auto& v : raw) {
      InferOutcome o;
      if (v.first == Op::input) {
        auto shape = p_.input_shapes.find(node);
        if (shape == p_.input_shapes.end())
          continue;
        o = {true, shape->second, {}};
      } else {
        o = infer_output_shape(v.first, v.second, ins);
      }
      if (!o.ok)
        continue;
      double score = 0.0;
      for (const auto& e : in_edges_[size_t(node)])
        score += p_.ngram->logp(values_[size_t(e.src)].first, v.first);
      scored.push_back({v, o.shape, score, value_key(v)});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
      if (a.score != b.score)
        return a.score > b.score;
      int c = std::strcmp(op_name(a.value.first), op_name(b.value.first));
      if (c != 0)
        return c < 0;
      return a.key < b.key;
    });
    std::vector<std::pair<std::pair<Op, Attrs>, TensorShape>> out;
    out.reserve(scored.size());
    for (auto& s : scored)
      out.emplace_back(std::move(s.value), std::move(s.out));
    return out;
  }

  void expand_attrs(Op op, const std::vector<TensorShape>& ins,
                    std::vector<std::pair<Op, Attrs>>& out) {
    const VocabSpec& v = p_.rules->vocab;
    switch (op) {
    case Op::conv2d: {
      if (ins.size() != 1 || ins[0].rank() != 4)
        return;
      int cin = int(ins[0].dims[1]);
      int64_t spatial = std::min(ins[0].dims[2], ins[0].dims[3]);
      for (int k : v.kernels) {
        if (k > spatial)
          continue;
        for (int s : v.strides)
          for (int cout : v.channels)
            out.push_back({op, ConvAttrs{k, cin, cout, s}});
      }
      return;
    }
    case Op::maxpool2d:
    case Op::avgpool2d: {
      if (ins.size() != 1 || ins[0].rank() != 4)
        return;
      int c = int(ins[0].dims[1]);
      int64_t spatial = std::min(ins[0].dims[2], ins[0].dims[3]);
      for (int k : v.kernels) {
        if (k > spatial)
          continue;
        for (int s : v.strides)
          out.push_back({op, ConvAttrs{k, c, c, s}});
      }
      return;
    }
    case Op::concat:
      out.push_back({op, AxisAttrs{1}});
      return;
    case Op::softmax:
      if (!ins.empty() && ins[0].rank() >= 2)
        out.push_back({op, AxisAttrs{ins[0].rank() - 1}});
      return;
    default:
      out.push_back({op, {}});
      return;
    }
  }

  void descend(size_t depth, double logprob) {
    if (int(solutions_.size()) >= p_.max_solns)
      return;
    if (depth == order_.size()) {
      RawSolution s;
      s.values = values_;
      s.logprob = logprob;
      std::string key = solution_key(s);
      if (emitted_.insert(std::move(key)).second)
        solutions_.push_back(std::move(s));
      return;
    }
    int node = order_[depth];
    std::vector<TensorShape> ins;
    ins.reserve(in_edges_[size_t(node)].size());
    for (const auto& e : in_edges_[size_t(node)])
      ins.push_back(shapes_[size_t(e.src)]);
    for (auto& [value, out_shape] : candidates(node, ins)) {
      double edge_lp = 0.0;
      for (const auto& e : in_edges_[size_t(node)])
        edge_lp += p_.ngram->logp(values_[size_t(e.src)].first, value.first);
      values_[size_t(node)] = value;
      shapes_[size_t(node)] = out_shape;
      descend(depth + 1, logprob + edge_lp);
      if (int(solutions_.size()) >= p_.max_solns)
        return;
    }
  }

  const SearchProblem& p_;
  std::vector<std::vector<PortEdge>> in_edges_;
  std::vector<std::vector<int>> succs_;
  std::vector<int> indeg_, outdeg_;
  std::vector<int> order_;
  std::vector<std::pair<Op, Attrs>> values_;
  std::vector<TensorShape> shapes_;
  std::vector<RawSolution> solutions_;
  std::set<std::string> emitted_;
};

std::vector<PortEdge> port_edges_from_topology(const DirectedTopology& topo) {
  // Input ports follow ascending source index.
  std::vector<std::vector<int>> incoming(size_t(topo.n));
  for (auto [u, v] : topo.edges)
    incoming[size_t(v)].push_back(u);
  std::vector<PortEdge> edges;
  for (int v = 0; v < topo.n; ++v) {
    auto& in = incoming[size_t(v)];
    std::sort(in.begin(), in.end());
    for (size_t p = 0; p < in.size(); ++p)
      edges.push_back({in[p], v, int(p)});
  }
  return edges;
}

std::vector<OpAssignment> finish(std::vector<RawSolution> raw, double pct,
                                 const TensorShape& source_shape) {
  std::vector<OpAssignment> sols;
  sols.reserve(raw.size());
  for (auto& r : raw) {
    OpAssignment a;
    a.values = std::move(r.values);
    a.logprob = r.logprob;
    a.source_shape = source_shape;
    sols.push_back(std::move(a));
  }
  std::sort(sols.begin(), sols.end(), [](const OpAssignment& a, const OpAssignment& b) {
    if (a.logprob != b.logprob)
      return a.logprob > b.logprob;
    RawSolution ra{a.values, 0.0}, rb{b.values, 0.0};
    return solution_key(ra) < solution_key(rb);
  });
  size_t keep = size_t(std::max<int64_t>(
      1, int64_t(std::ceil(pct / 100.0 * double(sols.size())))));
  if (keep < sols.size())
    sols.resize(keep);
  return sols;
}

} // namespace

std::vector<OpAssignment> enumerate_assignments(const DirectedTopology& topo,
                                                const RuleSet& rules,
                                                const NGramModel& ngram,
                                                const EnumConfig& cfg) {
  if (cfg.pct <= 0.0 || cfg.pct > 100.0)
    throw Error(Errc::invalid_argument, "pct must lie in (0, 100]");
  if (cfg.max_solns < 1)
    throw Error(Errc::invalid_argument, "max_solns must be >= 1");

  SearchProblem p;
  p.n = topo.n;
  p.edges = port_edges_from_topology(topo);
  p.rules = &rules;
  p.ngram = &ngram;
  p.max_solns = cfg.max_solns;

  // 4-D canonical inputs first; topologies with no conv-style assignment fall
  // back to the 2-D shape.
  for (const TensorShape& shape : {kCanonicalInput4d, kCanonicalInput2d}) {
    p.input_shapes.clear();
    auto indeg = topo.in_degrees();
    for (int v = 0; v < topo.n; ++v)
      if (indeg[size_t(v)] == 0)
        p.input_shapes[v] = shape;
    std::vector<RawSolution> raw = Enumerator(p).run();
    if (!raw.empty())
      return finish(std::move(raw), cfg.pct, shape);
  }
  throw Error(Errc::no_solution, "no syntactically valid assignment exists");
}

OpGraph materialize_assignment(const DirectedTopology& topo,
                               const OpAssignment& assignment) {
  if (int(assignment.values.size()) != topo.n)
    throw Error(Errc::invalid_argument, "assignment arity mismatch");
  OpGraph g;
  for (int v = 0; v < topo.n; ++v)
    g.nodes.push_back(
        {int64_t(v), assignment.values[size_t(v)].first, assignment.values[size_t(v)].second});
  for (const auto& e : port_edges_from_topology(topo))
    g.edges.push_back({int64_t(e.src), 0, int64_t(e.dst), e.dst_port});
  auto indeg = topo.in_degrees();
  auto outdeg = topo.out_degrees();
  for (int v = 0; v < topo.n; ++v) {
    if (indeg[size_t(v)] == 0)
      g.inputs.emplace_back(int64_t(v), assignment.source_shape);
    if (outdeg[size_t(v)] == 0)
      g.outputs.emplace_back(int64_t(v), 0);
  }
  return g;
}

std::vector<OpGraph> populate(const DirectedTopology& topo, const RuleSet& rules,
                              const NGramModel& ngram, const EnumConfig& cfg,
                              int k) {
  if (k < 1)
    throw Error(Errc::invalid_argument, "k must be >= 1");
  std::vector<OpAssignment> sols = enumerate_assignments(topo, rules, ngram, cfg);
  if (int(sols.size()) < k)
    throw Error(Errc::insufficient_solutions,
                "found " + std::to_string(sols.size()) + " assignments, need " +
                    std::to_string(k),
                int64_t(sols.size()), k);
  std::vector<size_t> order(sols.size());
  for (size_t i = 0; i < order.size(); ++i)
    order[i] = i;
  Rng rng(cfg.seed);
  rng.shuffle(order);
  std::vector<OpGraph> out;
  out.reserve(size_t(k));
  for (int i = 0; i < k; ++i)
    out.push_back(materialize_assignment(topo, sols[order[size_t(i)]]));
  return out;
}

OpGraph perturb_popular(const OpGraph& base, int delta, const NGramModel& ngram,
                        const VocabSpec& vocab, uint64_t seed) {
  if (!validate(base).empty())
    throw Error(Errc::invalid_argument, "base graph is invalid");
  int v = int(base.nodes.size());
  if (delta < 1 || delta > std::max(1, v / 4))
    throw Error(Errc::invalid_argument,
                "delta must lie in [1, |V|/4], got " + std::to_string(delta));

  for (int attempt = 0; attempt < 20; ++attempt) {
    Rng rng(derive_seed(seed, uint64_t(attempt)));
    OpGraph g = base;
    std::set<int64_t> interface_nodes;
    for (const auto& [id, shape] : g.inputs)
      interface_nodes.insert(id);
    for (const auto& [id, port] : g.outputs)
      interface_nodes.insert(id);

    std::set<int64_t> perturbed;
    bool structure_ok = true;
    for (int step = 0; step < delta && structure_ok; ++step) {
      bool insert = rng.next_below(2) == 0;
      if (!insert) {
        // Removable: exactly one in, one out, off the interface.
        std::map<int64_t, int> indeg, outdeg;
        for (const auto& e : g.edges) {
          indeg[e.dst]++;
          outdeg[e.src]++;
        }
        std::vector<int64_t> removable;
        for (const auto& node : g.nodes) {
          if (interface_nodes.count(node.id) || node.op == Op::input ||
              node.op == Op::output || perturbed.count(node.id))
            continue;
          if (indeg[node.id] == 1 && outdeg[node.id] == 1)
            removable.push_back(node.id);
        }
        if (removable.empty()) {
          insert = true; // graph too tight to shrink; grow instead
        } else {
          int64_t victim = removable[rng.next_below(removable.size())];
          Edge in_edge{}, out_edge{};
          for (const auto& e : g.edges) {
            if (e.dst == victim)
              in_edge = e;
            if (e.src == victim)
              out_edge = e;
          }
          std::vector<Edge> kept;
          for (const auto& e : g.edges)
            if (e.src != victim && e.dst != victim)
              kept.push_back(e);
          kept.push_back({in_edge.src, in_edge.src_port, out_edge.dst,
                          out_edge.dst_port});
          g.edges = std::move(kept);
          std::erase_if(g.nodes, [&](const Node& n) { return n.id == victim; });
          perturbed.insert(in_edge.src);
          perturbed.insert(out_edge.dst);
        }
      }
      if (insert) {
        if (g.edges.empty()) {
          structure_ok = false;
          break;
        }
        size_t pick = size_t(rng.next_below(g.edges.size()));
        Edge e = g.edges[pick];
        int64_t fresh = g.max_node_id() + 1;
        g.edges[pick] = {e.src, e.src_port, fresh, 0};
        g.edges.push_back({fresh, 0, e.dst, e.dst_port});
        g.nodes.push_back({fresh, Op::identity, {}});
        perturbed.insert(fresh);
      }
    }
    if (!structure_ok)
      continue;

    // Free set: perturbed nodes plus immediate neighbours, minus interface.
    std::set<int64_t> free = perturbed;
    for (const auto& e : g.edges) {
      if (perturbed.count(e.src))
        free.insert(e.dst);
      if (perturbed.count(e.dst))
        free.insert(e.src);
    }
    for (const auto& node : g.nodes)
      if (node.op == Op::input || node.op == Op::output)
        free.erase(node.id);

    // Rebuild as a search problem over compact indices.
    std::vector<int64_t> ids;
    for (const auto& node : g.nodes)
      ids.push_back(node.id);
    std::sort(ids.begin(), ids.end());
    std::map<int64_t, int> compact;
    for (int64_t id : ids)
      compact.emplace(id, int(compact.size()));

    SearchProblem p;
    p.n = int(ids.size());
    p.rules = nullptr;
    p.ngram = &ngram;
    p.max_solns = 32;
    for (const auto& e : g.edges)
      p.edges.push_back({compact.at(e.src), compact.at(e.dst), e.dst_port});
    for (const auto& [id, shape] : g.inputs)
      p.input_shapes[compact.at(id)] = shape;
    auto idx = g.node_index();
    for (const auto& node : g.nodes)
      if (!free.count(node.id))
        p.pinned[compact.at(node.id)] = {node.op, node.attrs};

    DirectedTopology topo;
    topo.n = p.n;
    for (const auto& e : g.edges)
      topo.edges.emplace_back(compact.at(e.src), compact.at(e.dst));
    RuleSet rules;
    try {
      rules = generate_ruleset(topo, vocab, /*force_sink_output=*/false);
    } catch (const Error&) {
      continue;
    }
    p.rules = &rules;

    std::vector<RawSolution> raw = Enumerator(p).run();
    if (raw.empty())
      continue;
    const RawSolution* best = &raw.front();
    for (const auto& r : raw)
      if (r.logprob > best->logprob ||
          (r.logprob == best->logprob &&
           solution_key(r) < solution_key(*best)))
        best = &r;

    OpGraph out = g;
    for (auto& node : out.nodes) {
      const auto& val = best->values[size_t(compact.at(node.id))];
      node.op = val.first;
      node.attrs = val.second;
    }
    (void)idx;
    if (validate(out).empty() && propagate_shapes(out).ok)
      return out;
  }
  throw Error(Errc::no_solution,
              "no valid re-population found after 20 perturbation attempts");
}

} // namespace graphveil
