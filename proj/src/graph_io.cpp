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

#include "graphveil/graph_io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "graphveil/errors.hpp"

namespace graphveil {

using nlohmann::json;

namespace {

json shape_to_json(const TensorShape& s) {
  json arr = json::array();
  for (int64_t d : s.dims) {
    if (d == TensorShape::kDynamic)
      arr.push_back("dynamic");
    else
      arr.push_back(d);
  }
  return arr;
}

TensorShape shape_from_json(const json& arr, const std::string& where) {
  if (!arr.is_array())
    throw Error(Errc::parse_error, where + ": shape must be an array");
  TensorShape s;
  for (size_t i = 0; i < arr.size(); ++i) {
    const auto& d = arr[i];
    if (d.is_string()) {
      if (d.get<std::string>() != "dynamic" || i != 0)
        throw Error(Errc::parse_error,
                    where + ": only the first dim may be \"dynamic\"");
      s.dims.push_back(TensorShape::kDynamic);
    } else if (d.is_number_integer()) {
      s.dims.push_back(d.get<int64_t>());
    } else {
      throw Error(Errc::parse_error, where + ": shape entries must be integers");
    }
  }
  if (!s.well_formed())
    throw Error(Errc::parse_error, where + ": malformed shape");
  return s;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw Error(Errc::parse_error, where + ": unknown field '" + it.key() + "'");
}

int get_int(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer())
    throw Error(Errc::parse_error, where + ": missing integer field '" + key + "'");
  return it->get<int>();
}

} // namespace

std::string serialize(const OpGraph& g) {
  OpGraph c = g;
  std::sort(c.nodes.begin(), c.nodes.end(),
            [](const Node& a, const Node& b) { return a.id < b.id; });
  std::sort(c.edges.begin(), c.edges.end());

  json doc;
  doc["nodes"] = json::array();
  for (const auto& n : c.nodes) {
    json jn;
    jn["id"] = n.id;
    jn["op"] = op_name(n.op);
    if (const auto* a = std::get_if<ConvAttrs>(&n.attrs)) {
      jn["attrs"] = {{"kernel", a->kernel},
                     {"cin", a->cin},
                     {"cout", a->cout},
                     {"stride", a->stride}};
    } else if (const auto* a = std::get_if<AxisAttrs>(&n.attrs)) {
      jn["attrs"] = {{"axis", a->axis}};
    }
    doc["nodes"].push_back(std::move(jn));
  }
  doc["edges"] = json::array();
  for (const auto& e : c.edges)
    doc["edges"].push_back(
        {{"src", e.src}, {"sp", e.src_port}, {"dst", e.dst}, {"dp", e.dst_port}});
  doc["inputs"] = json::array();
  for (const auto& [id, shape] : c.inputs)
    doc["inputs"].push_back(json::array({id, shape_to_json(shape)}));
  doc["outputs"] = json::array();
  for (const auto& [id, port] : c.outputs)
    doc["outputs"].push_back(json::array({id, port}));
  return doc.dump();
}

OpGraph parse(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
  if (!doc.is_object())
    throw Error(Errc::parse_error, "document must be a JSON object");
  reject_unknown(doc, {"nodes", "edges", "inputs", "outputs"}, "document");

  OpGraph g;
  for (const auto& jn : doc.value("nodes", json::array())) {
    reject_unknown(jn, {"id", "op", "attrs"}, "node");
    Node n;
    if (!jn.contains("id") || !jn["id"].is_number_integer())
      throw Error(Errc::parse_error, "node: missing integer 'id'");
    n.id = jn["id"].get<int64_t>();
    std::optional<Op> op;
    if (jn.contains("op") && jn["op"].is_string())
      op = op_from_name(jn["op"].get<std::string>());
    if (!op)
      throw Error(Errc::parse_error,
                  "node " + std::to_string(n.id) + ": unknown opcode");
    n.op = *op;
    std::string where = "node " + std::to_string(n.id);
    if (op_has_conv_attrs(n.op)) {
      if (!jn.contains("attrs"))
        throw Error(Errc::parse_error, where + ": missing attrs");
      const auto& ja = jn["attrs"];
      reject_unknown(ja, {"kernel", "cin", "cout", "stride"}, where);
      n.attrs = ConvAttrs{get_int(ja, "kernel", where), get_int(ja, "cin", where),
                          get_int(ja, "cout", where), get_int(ja, "stride", where)};
    } else if (op_has_axis_attrs(n.op)) {
      if (!jn.contains("attrs"))
        throw Error(Errc::parse_error, where + ": missing attrs");
      const auto& ja = jn["attrs"];
      reject_unknown(ja, {"axis"}, where);
      n.attrs = AxisAttrs{get_int(ja, "axis", where)};
    } else if (jn.contains("attrs")) {
      throw Error(Errc::parse_error, where + ": opcode takes no attrs");
    }
    g.nodes.push_back(std::move(n));
  }

  for (const auto& je : doc.value("edges", json::array())) {
    reject_unknown(je, {"src", "sp", "dst", "dp"}, "edge");
    Edge e;
    e.src = get_int(je, "src", "edge");
    e.src_port = get_int(je, "sp", "edge");
    e.dst = get_int(je, "dst", "edge");
    e.dst_port = get_int(je, "dp", "edge");
    g.edges.push_back(e);
  }

  for (const auto& ji : doc.value("inputs", json::array())) {
    if (!ji.is_array() || ji.size() != 2 || !ji[0].is_number_integer())
      throw Error(Errc::parse_error, "inputs: entries must be [id, shape]");
    g.inputs.emplace_back(ji[0].get<int64_t>(), shape_from_json(ji[1], "inputs"));
  }

  for (const auto& jo : doc.value("outputs", json::array())) {
    if (!jo.is_array() || jo.size() != 2 || !jo[0].is_number_integer() ||
        !jo[1].is_number_integer())
      throw Error(Errc::parse_error, "outputs: entries must be [id, port]");
    g.outputs.emplace_back(jo[0].get<int64_t>(), jo[1].get<int>());
  }

  return g;
}

void save_graph(const OpGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(Errc::io_error, "cannot open " + path + " for writing");
  out << serialize(g) << "\n";
}

OpGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(Errc::io_error, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

} // namespace graphveil
