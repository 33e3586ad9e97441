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

#include "lgu/geometry.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <random>

namespace lgu {

namespace {

Eigen::Quaterniond to_eigen(const std::array<double, 4>& q) { return {q[0], q[1], q[2], q[3]}; }

std::array<double, 4> from_eigen(Eigen::Quaterniond q) {
  q.normalize();
  return {q.w(), q.x(), q.y(), q.z()};
}

// R - I written directly from the quaternion so the identity rotation gives exact zeros.
std::array<double, 9> rotation_minus_identity(const std::array<double, 4>& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return {-2 * (y * y + z * z), 2 * (x * y - w * z),      2 * (x * z + w * y),
          2 * (x * y + w * z),  -2 * (x * x + z * z),     2 * (y * z - w * x),
          2 * (x * z - w * y),  2 * (y * z + w * x),      -2 * (x * x + y * y)};
}

// Per-point reprojection in displacement form:
//   x' = u + (fx*d0 - (u - cx)*d2) / (1 + d2),  with delta = (R - I) ray + t * inv_depth,
// which is exact for the identity pose.
struct PointMap {
  double x, y, inv_depth, dx_dd, dy_dd;
  bool valid;
};

PointMap map_point(double u, double v, double d, const std::array<double, 9>& rmi, const std::array<double, 3>& t,
                   const Camera& cam) {
  const double r0 = (u - cam.cx) / cam.fx, r1 = (v - cam.cy) / cam.fy;
  double delta[3];
  for (int k = 0; k < 3; ++k) delta[k] = rmi[3 * k] * r0 + rmi[3 * k + 1] * r1 + rmi[3 * k + 2] + t[k] * d;
  const double den = 1.0 + delta[2];
  PointMap m{};
  m.valid = den / d > kMinDepth;
  if (!m.valid) {
    m.x = m.y = -1e4;
    return m;
  }
  const double nx = cam.fx * delta[0] - (u - cam.cx) * delta[2];
  const double ny = cam.fy * delta[1] - (v - cam.cy) * delta[2];
  m.x = u + nx / den;
  m.y = v + ny / den;
  m.inv_depth = d / den;
  m.dx_dd = (cam.fx * t[0] - (u - cam.cx) * t[2]) / den - nx * t[2] / (den * den);
  m.dy_dd = (cam.fy * t[1] - (v - cam.cy) * t[2]) / den - ny * t[2] / (den * den);
  return m;
}

void check_reproject_shapes(const Shape& coords, const Shape& inv_depth) {
  if (coords.size() != 3 || coords[0] != 2 || inv_depth.size() != 2 || inv_depth[0] != coords[1] ||
      inv_depth[1] != coords[2]) {
    throw ShapeError("reproject: need coords [2,H,W] and inv_depth [H,W], got " + shape_str(coords) + ", " +
                     shape_str(inv_depth));
  }
}

}  // namespace

PoseSE3 PoseSE3::from_axis_angle(const std::array<double, 3>& axis, double angle, const std::array<double, 3>& t) {
  Eigen::Vector3d a(axis[0], axis[1], axis[2]);
  const double n = a.norm();
  PoseSE3 p;
  if (n > 0) p.q = from_eigen(Eigen::Quaterniond(Eigen::AngleAxisd(angle, a / n)));
  p.t = t;
  return p;
}

PoseSE3 PoseSE3::operator*(const PoseSE3& b) const {
  PoseSE3 out;
  out.q = from_eigen(to_eigen(q) * to_eigen(b.q));
  out.t = apply(b.t);
  return out;
}

PoseSE3 PoseSE3::inverse() const {
  PoseSE3 out;
  const Eigen::Quaterniond qi = to_eigen(q).conjugate();
  out.q = from_eigen(qi);
  const Eigen::Vector3d ti = -(qi * Eigen::Vector3d(t[0], t[1], t[2]));
  out.t = {ti.x(), ti.y(), ti.z()};
  return out;
}

std::array<double, 3> PoseSE3::apply(const std::array<double, 3>& x) const {
  const Eigen::Vector3d y = to_eigen(q) * Eigen::Vector3d(x[0], x[1], x[2]);
  return {y.x() + t[0], y.y() + t[1], y.z() + t[2]};
}

std::array<double, 9> PoseSE3::rotation() const {
  auto r = rotation_minus_identity(q);
  r[0] += 1.0;
  r[4] += 1.0;
  r[8] += 1.0;
  return r;
}

double PoseSE3::quat_norm() const { return std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]); }

void Camera::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw ContractError("camera focal lengths must be positive");
}

Camera Camera::for_grid(std::size_t h, std::size_t w) {
  const double f = static_cast<double>(w);
  return {f, f, (static_cast<double>(w) - 1) / 2, (static_cast<double>(h) - 1) / 2};
}

template <Real T>
Tensor<T> grid_coords(std::size_t h, std::size_t w) {
  Tensor<T> g({2, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      g[y * w + x] = static_cast<T>(x);
      g[h * w + y * w + x] = static_cast<T>(y);
    }
  }
  return g;
}

template <Real T>
Reprojection<T> reproject(const Tensor<T>& coords, const Tensor<T>& inv_depth, const PoseSE3& pose,
                          const Camera& cam) {
  check_reproject_shapes(coords.shape(), inv_depth.shape());
  cam.validate();
  const std::size_t h = inv_depth.dim(0), w = inv_depth.dim(1), n = h * w;
  const auto rmi = rotation_minus_identity(pose.q);
  Reprojection<T> out{Tensor<T>(coords.shape()), Tensor<T>(inv_depth.shape()), Tensor<T>(inv_depth.shape())};
  for (std::size_t p = 0; p < n; ++p) {
    const double d = inv_depth[p];
    if (!(d > 0)) throw ContractError("reproject: inverse depth must be positive");
    const PointMap m = map_point(coords[p], coords[n + p], d, rmi, pose.t, cam);
    out.coords[p] = static_cast<T>(m.x);
    out.coords[n + p] = static_cast<T>(m.y);
    out.inv_depth[p] = static_cast<T>(m.valid ? m.inv_depth : 0.0);
    out.valid[p] = m.valid ? T(1) : T(0);
  }
  return out;
}

template <Real T>
ad::Var<T> reproject(const Tensor<T>& coords, const ad::Var<T>& inv_depth, const PoseSE3& pose, const Camera& cam) {
  Reprojection<T> r = reproject(coords, inv_depth.value(), pose, cam);
  const std::size_t n = inv_depth.value().numel();
  Tensor<T> jac({2, n});
  const auto rmi = rotation_minus_identity(pose.q);
  for (std::size_t p = 0; p < n; ++p) {
    const PointMap m = map_point(coords[p], coords[n + p], inv_depth.value()[p], rmi, pose.t, cam);
    jac[p] = m.valid ? static_cast<T>(m.dx_dd) : T(0);
    jac[n + p] = m.valid ? static_cast<T>(m.dy_dd) : T(0);
  }
  const std::size_t id = inv_depth.id();
  return inv_depth.tape()->record(std::move(r.coords), {inv_depth},
                                  [id, jac = std::move(jac), n](ad::Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
                                    Tensor<T> gd(t.value(id).shape());
                                    for (std::size_t p = 0; p < n; ++p) gd[p] = g[p] * jac[p] + g[n + p] * jac[n + p];
                                    t.accumulate(id, std::move(gd));
                                  });
}

void SceneConfig::validate() const {
  if (height == 0 || width == 0 || channels == 0) throw ConfigError("scene: H, W and C must be positive");
  if (motion_min < 0 || motion_max < motion_min) throw ConfigError("scene: need 0 <= motion_min <= motion_max");
  if (ambiguous_fraction < 0 || ambiguous_fraction > 1) throw ConfigError("scene: ambiguous_fraction must be in [0,1]");
  if (!(flow_bound > 0)) throw ConfigError("scene: flow_bound must be positive");
}

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(seed ^ mix(index));
}

namespace {

struct Wave {
  double wx, wy, phase, amp;
};

struct Rect {
  double x0, y0, x1, y1;
  bool contains(double x, double y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

}  // namespace

template <Real T>
SceneSample<T> generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t h = cfg.height, w = cfg.width, c = cfg.channels, n = h * w;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const Camera cam = Camera::for_grid(h, w);

  // Slanted plane n . X = 1 in frame i; inverse depth is n . ray.
  const std::array<double, 3> plane{uni(-0.08, 0.08), uni(-0.08, 0.08), uni(0.22, 0.45)};

  std::vector<std::vector<Wave>> waves(c);
  std::vector<double> flat(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (int k = 0; k < 3; ++k) {
      const double mag = uni(0.25, 1.1), ang = uni(0, 2 * M_PI);
      waves[ch].push_back({mag * std::cos(ang), mag * std::sin(ang), uni(0, 2 * M_PI), uni(0.4, 0.8)});
    }
    flat[ch] = uni(-0.5, 0.5);
  }

  // Smooth regions are rectangles in frame-i pixel space.
  std::vector<Rect> rects;
  Tensor<T> ambiguous({h, w});
  auto covered = [&] {
    std::size_t k = 0;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        bool in = false;
        for (const auto& r : rects) in = in || r.contains(double(x), double(y));
        ambiguous[y * w + x] = in ? T(1) : T(0);
        k += in;
      }
    return static_cast<double>(k) / static_cast<double>(n);
  };
  if (cfg.ambiguous_fraction > 0) {
    while (covered() < cfg.ambiguous_fraction) {
      const double rw = uni(0.2, 0.45) * double(w), rh = uni(0.2, 0.45) * double(h);
      const double x0 = uni(-0.1 * double(w), double(w) - 0.9 * rw), y0 = uni(-0.1 * double(h), double(h) - 0.9 * rh);
      rects.push_back({x0, y0, x0 + rw, y0 + rh});
    }
  }
  auto smooth = [&](double x, double y) {
    for (const auto& r : rects)
      if (r.contains(x, y)) return true;
    return false;
  };

  auto ray_dot = [&](const std::array<double, 3>& nrm, double u, double v) {
    return nrm[0] * (u - cam.cx) / cam.fx + nrm[1] * (v - cam.cy) / cam.fy + nrm[2];
  };

  // Motion, damped until the flow fits the bound.
  std::array<double, 3> dir{normal(rng), normal(rng), normal(rng)};
  const double dn = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
  const std::array<double, 3> axis{normal(rng), normal(rng), normal(rng)};
  double mag = uni(cfg.motion_min, cfg.motion_max);
  const double spin = uni(-1.0, 1.0);

  const Tensor<double> grid = grid_coords<double>(h, w);
  Tensor<double> inv_depth({h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) inv_depth[y * w + x] = ray_dot(plane, double(x), double(y));

  PoseSE3 pose;
  Reprojection<double> fwd;
  for (int attempt = 0;; ++attempt) {
    const std::array<double, 3> t{mag * dir[0] / dn, mag * dir[1] / dn, mag * dir[2] / dn};
    pose = PoseSE3::from_axis_angle(axis, cfg.rotation_per_unit * mag * spin, t);
    if (mag == 0) pose = PoseSE3::identity();
    fwd = reproject(grid, inv_depth, pose, cam);
    double worst = 0;
    bool all_valid = true;
    for (std::size_t p = 0; p < n; ++p) {
      all_valid = all_valid && fwd.valid[p] > 0;
      worst = std::max({worst, std::abs(fwd.coords[p] - grid[p]), std::abs(fwd.coords[n + p] - grid[n + p])});
    }
    if (all_valid && worst <= cfg.flow_bound) break;
    if (attempt + 1 >= cfg.max_retries) throw ContractError("generate_scene: flow exceeds bound after damping");
    mag *= 0.5;
  }

  // Plane in frame j, used to pull frame-j pixels back into frame-i pixel space.
  const auto rot = pose.rotation();
  std::array<double, 3> rn{};
  for (int k = 0; k < 3; ++k) rn[k] = rot[3 * k] * plane[0] + rot[3 * k + 1] * plane[1] + rot[3 * k + 2] * plane[2];
  const double rn_t = rn[0] * pose.t[0] + rn[1] * pose.t[1] + rn[2] * pose.t[2];
  const std::array<double, 3> plane_j{rn[0] / (1 + rn_t), rn[1] / (1 + rn_t), rn[2] / (1 + rn_t)};
  Tensor<double> inv_depth_j({h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) inv_depth_j[y * w + x] = ray_dot(plane_j, double(x), double(y));
  const Reprojection<double> back = reproject(grid, inv_depth_j, pose.inverse(), cam);

  auto texture = [&](std::size_t ch, double u, double v) {
    if (smooth(u, v)) return flat[ch];
    double s = 0;
    for (const auto& wv : waves[ch]) s += wv.amp * std::sin(wv.wx * u + wv.wy * v + wv.phase);
    return s;
  };

  SceneSample<T> out;
  out.image_i = Tensor<T>({c, h, w});
  out.image_j = Tensor<T>({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < n; ++p) {
      out.image_i[ch * n + p] = static_cast<T>(texture(ch, grid[p], grid[n + p]) + 0.01 * normal(rng));
      out.image_j[ch * n + p] = static_cast<T>(texture(ch, back.coords[p], back.coords[n + p]) + 0.01 * normal(rng));
    }
  }
  out.inv_depth = inv_depth.cast<T>();
  out.pose = pose;
  out.camera = cam;
  out.flow = Tensor<T>({2, h, w});
  for (std::size_t i = 0; i < 2 * n; ++i) out.flow[i] = static_cast<T>(fwd.coords[i] - grid[i]);
  out.ambiguous = std::move(ambiguous);
  out.valid = fwd.valid.cast<T>();
  return out;
}

#define LGU_INSTANTIATE_GEOMETRY(T)                                                                              \
  template Tensor<T> grid_coords<T>(std::size_t, std::size_t);                                                 \
  template Reprojection<T> reproject(const Tensor<T>&, const Tensor<T>&, const PoseSE3&, const Camera&);       \
  template ad::Var<T> reproject(const Tensor<T>&, const ad::Var<T>&, const PoseSE3&, const Camera&);           \
  template SceneSample<T> generate_scene<T>(const SceneConfig&, std::uint64_t);

LGU_INSTANTIATE_GEOMETRY(float)
LGU_INSTANTIATE_GEOMETRY(double)

}  // namespace lgu
