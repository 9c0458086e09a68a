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

#include "graphveil/density.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "graphveil/errors.hpp"

namespace graphveil {

using nlohmann::json;

std::array<double, kFeatureDim>
feature_stddev(const std::vector<FeatureVector>& pool) {
  std::array<double, kFeatureDim> mean{}, var{};
  for (const auto& f : pool) {
    auto x = f.as_array();
    for (int j = 0; j < kFeatureDim; ++j)
      mean[size_t(j)] += x[size_t(j)];
  }
  for (auto& m : mean)
    m /= double(pool.size());
  for (const auto& f : pool) {
    auto x = f.as_array();
    for (int j = 0; j < kFeatureDim; ++j) {
      double d = x[size_t(j)] - mean[size_t(j)];
      var[size_t(j)] += d * d;
    }
  }
  std::array<double, kFeatureDim> sd{};
  for (int j = 0; j < kFeatureDim; ++j)
    sd[size_t(j)] = std::sqrt(var[size_t(j)] / double(pool.size()));
  return sd;
}

double DensityModel::evaluate(const std::array<double, kFeatureDim>& x) const {
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  double acc = 0.0;
  for (const auto& p : points) {
    double k = 1.0;
    for (int j = 0; j < kFeatureDim; ++j) {
      double z = (x[size_t(j)] - p[size_t(j)]) / bandwidth[size_t(j)];
      k *= inv_sqrt_2pi / bandwidth[size_t(j)] * std::exp(-0.5 * z * z);
    }
    acc += k;
  }
  double v = acc / double(points.size());
  // Gaussian kernels never reach zero, but guard against underflow so
  // importance weights 1/p stay finite.
  return std::max(v, 1e-300);
}

DensityModel fit_density(const std::vector<FeatureVector>& pool) {
  if (int(pool.size()) < kDensityMinPool)
    throw Error(Errc::invalid_argument,
                "density fit needs at least " + std::to_string(kDensityMinPool) +
                    " pool graphs, got " + std::to_string(pool.size()));

  DensityModel m;
  auto sd = feature_stddev(pool);
  double scott = std::pow(double(pool.size()), -1.0 / (kFeatureDim + 4));
  for (int j = 0; j < kFeatureDim; ++j) {
    double h = sd[size_t(j)] * scott;
    if (h < kBandwidthFloor) {
      m.degenerate.push_back(j);
      h = kBandwidthFloor;
    }
    m.bandwidth[size_t(j)] = h;
  }
  m.points.reserve(pool.size());
  for (const auto& f : pool)
    m.points.push_back(f.as_array());
  return m;
}

DensityModel fit_density(const std::vector<OpGraph>& pool) {
  std::vector<FeatureVector> feats;
  feats.reserve(pool.size());
  for (const auto& g : pool)
    feats.push_back(compute_features(g));
  return fit_density(feats);
}

void save_density(const DensityModel& m, const std::string& path) {
  json doc;
  doc["bandwidth"] = m.bandwidth;
  doc["degenerate"] = m.degenerate;
  doc["points"] = json::array();
  for (const auto& p : m.points)
    doc["points"].push_back(p);
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(Errc::io_error, "cannot write " + path);
  out << doc.dump() << "\n";
}

DensityModel load_density(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(Errc::io_error, "cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("density model: ") + e.what());
  }
  DensityModel m;
  auto bw = doc.value("bandwidth", std::vector<double>{});
  if (bw.size() != kFeatureDim)
    throw Error(Errc::parse_error, "density model: bad bandwidth vector");
  std::copy(bw.begin(), bw.end(), m.bandwidth.begin());
  m.degenerate = doc.value("degenerate", std::vector<int>{});
  for (const auto& jp : doc.value("points", json::array())) {
    auto p = jp.get<std::vector<double>>();
    if (p.size() != kFeatureDim)
      throw Error(Errc::parse_error, "density model: bad point dimension");
    std::array<double, kFeatureDim> a{};
    std::copy(p.begin(), p.end(), a.begin());
    m.points.push_back(a);
  }
  if (m.points.empty())
    throw Error(Errc::parse_error, "density model: no points");
  return m;
}

} // namespace graphveil
