// Copyright 2026 The LGU Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>

#include "lgu/autodiff.hpp"
#include "lgu/tensor.hpp"

namespace lgu {

// Rigid transform x -> R(q) x + t. Quaternion stored as (w, x, y, z).
struct PoseSE3 {
  std::array<double, 4> q{1.0, 0.0, 0.0, 0.0};
  std::array<double, 3> t{0.0, 0.0, 0.0};

  static PoseSE3 identity() { return {}; }
  // Rotation of `angle` radians about `axis` (normalized internally), then translation t.
  static PoseSE3 from_axis_angle(const std::array<double, 3>& axis, double angle, const std::array<double, 3>& t);

  // (a * b)(x) = a(b(x)).
  PoseSE3 operator*(const PoseSE3& b) const;
  PoseSE3 inverse() const;
  std::array<double, 3> apply(const std::array<double, 3>& x) const;
  // Row-major 3x3 rotation matrix.
  std::array<double, 9> rotation() const;
  double quat_norm() const;
};

struct Camera {
  double fx = 64.0;
  double fy = 64.0;
  double cx = 31.5;
  double cy = 23.5;

  // Throws ContractError unless fx, fy > 0.
  void validate() const;
  // Pinhole at grid resolution: focal length W, principal point at the grid centre.
  static Camera for_grid(std::size_t h, std::size_t w);
};

inline constexpr double kMinDepth = 1e-6;

template <Real T>
struct Reprojection {
  Tensor<T> coords;     // [2, H, W], channel 0 = x, 1 = y
  Tensor<T> inv_depth;  // [H, W], inverse depth of each point in the target frame
  Tensor<T> valid;      // [H, W], 1 where the target depth exceeds kMinDepth, else 0
};

// Integer pixel grid [2, H, W]: (x, y) = (column, row).
template <Real T>
Tensor<T> grid_coords(std::size_t h, std::size_t w);

// Moves points at `coords` with inverse depth `inv_depth` through `pose` and projects them.
// Invalid pixels get coordinates far outside the grid.
template <Real T>
Reprojection<T> reproject(const Tensor<T>& coords, const Tensor<T>& inv_depth, const PoseSE3& pose,
                          const Camera& cam);

// Differentiable in the inverse depth; coordinates are taken as constants.
template <Real T>
ad::Var<T> reproject(const Tensor<T>& coords, const ad::Var<T>& inv_depth, const PoseSE3& pose, const Camera& cam);

struct SceneConfig {
  std::size_t height = 48;
  std::size_t width = 64;
  std::size_t channels = 32;
  double motion_min = 0.05;  // translation magnitude range, scene units
  double motion_max = 0.25;
  double rotation_per_unit = 0.1;  // rotation angle (rad) per unit of translation
  double ambiguous_fraction = 0.2;
  double flow_bound = 8.0;  // max |flow| component in pixels
  int max_retries = 12;

  void validate() const;
};

template <Real T>
struct SceneSample {
  Tensor<T> image_i;    // [C, H, W]
  Tensor<T> image_j;    // [C, H, W]
  Tensor<T> inv_depth;  // [H, W]
  PoseSE3 pose;         // frame i -> frame j
  Camera camera;
  Tensor<T> flow;       // [2, H, W]
  Tensor<T> ambiguous;  // [H, W], 1 inside smooth regions
  Tensor<T> valid;      // [H, W]
};

// Independent stream seed for item `index` of a run seeded with `seed`.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index);

template <Real T>
SceneSample<T> generate_scene(const SceneConfig& cfg, std::uint64_t seed);

}  // namespace lgu
