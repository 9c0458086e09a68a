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
#include <string>
#include <vector>

#include "graphveil/features.hpp"

namespace graphveil {

/// Product-kernel Gaussian KDE over the 4-dimensional feature space.
/// Per-feature bandwidths follow Scott's rule, n^(-1/(d+4)) * stddev with
/// d = 4; zero-variance features get a 1e-6 bandwidth floor instead of
/// failing (the index is recorded in `degenerate`). Densities are strictly
/// positive everywhere.
struct DensityModel {
  std::array<double, kFeatureDim> bandwidth{};
  std::vector<std::array<double, kFeatureDim>> points;
  std::vector<int> degenerate;

  double evaluate(const std::array<double, kFeatureDim>& x) const;
  double evaluate(const FeatureVector& f) const { return evaluate(f.as_array()); }
};

constexpr double kBandwidthFloor = 1e-6;
constexpr int kDensityMinPool = 20;

DensityModel fit_density(const std::vector<FeatureVector>& pool);
DensityModel fit_density(const std::vector<OpGraph>& pool);

void save_density(const DensityModel& m, const std::string& path);
DensityModel load_density(const std::string& path);

/// Per-feature population standard deviation of a feature sample; used for
/// bandwidths and for the default sampling box widths.
std::array<double, kFeatureDim>
feature_stddev(const std::vector<FeatureVector>& pool);

} // namespace graphveil
