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

#include "lgu/model.hpp"

#include <random>

#include "lgu/geometry.hpp"
#include "lgu/layers.hpp"

namespace lgu {

UpdateDims ModelConfig::update_dims() const {
  UpdateDims d;
  d.corr = kPyramidLevels * lookup_taps(radius);
  d.hidden = hidden;
  d.context = context;
  d.corr_mid = corr_mid;
  d.corr_out = corr_out;
  d.flow_mid = flow_mid;
  d.flow_out = flow_out;
  d.head_mid = head_mid;
  return d;
}

void ModelConfig::validate() const {
  if (channels == 0 || hidden == 0 || context == 0 || corr_mid == 0 || corr_out == 0 || flow_mid == 0 ||
      flow_out == 0 || head_mid == 0) {
    throw ConfigError("model widths must be positive");
  }
  if (radius < 1 || radius > 8) throw ConfigError("lookup radius must be in [1, 8]");
  if (iterations < 1) throw ConfigError("iterations must be positive");
  if (!(offset_bound > 0)) throw ConfigError("offset bound must be positive");
  if (!(gaussian.alpha > 0) || !(gaussian.beta > 0) || !(gaussian.eps > 0) || !(gaussian.mask_scale >= 0)) {
    throw ConfigError("alpha, beta and eps must be positive and the mask scale non-negative");
  }
}

template <Real T>
void init_model(ad::ParamStore<T>& store, const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const std::size_t c = cfg.channels;
  init_conv(store, "feat", c, c, 3, rng, 0.5);
  init_conv(store, "ctx", cfg.hidden + cfg.context, c, 3, rng);
  init_gaussian_encoder(store, "gauss", c, rng);
  init_offset_decoders(store, "offset", c, cfg.radius, rng);
  init_update_operator(store, "update", cfg.update_dims(), rng);
  store.set_seed(seed);
}

template <Real T>
ModelOutput<T> forward(ad::Tape<T>& tape, ad::ParamStore<T>& store, const ModelConfig& cfg, const ad::Var<T>& image_i,
                       const ad::Var<T>& image_j) {
  const Shape& s = image_i.shape();
  if (s.size() != 3 || s[0] != cfg.channels || image_j.shape() != s) {
    throw ShapeError("forward: images must both be [" + std::to_string(cfg.channels) + ", H, W], got " + shape_str(s) +
                     " and " + shape_str(image_j.shape()));
  }
  const std::size_t h = s[1], w = s[2];
  if (h % 8 != 0 || w % 8 != 0) throw ShapeError("forward: grid sides must be multiples of 8, got " + shape_str(s));

  const auto fi = ad::add(image_i, conv(tape, store, "feat", image_i));
  const auto fj = ad::add(image_j, conv(tape, store, "feat", image_j));
  const auto ctx_all = conv(tape, store, "ctx", image_i);
  auto hidden = ad::tanh(ad::slice(ctx_all, 0, cfg.hidden));
  const auto context = ad::gelu(ad::slice(ctx_all, cfg.hidden, cfg.hidden + cfg.context));

  ModelOutput<T> out;
  const auto grid = tape.constant(grid_coords<T>(h, w));
  const auto raw = encode_gaussian(tape, store, "gauss", fi, fj);
  out.e_mu = ad::add(grid, raw.e_r);
  out.e_c = normalize_covariance(raw.raw_ec, cfg.gaussian);
  out.r1 = truncation_radius(h, w);

  CorrPyramidVar<T> pyr;
  if (cfg.corr_mode == CorrMode::materialized) {
    pyr = cfg.use_lgu ? pyramid_materialized(fi, fj, cfg.radius, &out.e_mu, &out.e_c, out.r1, cfg.gaussian.mask_scale)
                      : pyramid_materialized<T>(fi, fj, cfg.radius);
  } else {
    pyr = pyramid_onthefly(fi, fj, cfg.radius);
    if (cfg.use_lgu) {
      pyr.masked = true;
      pyr.mu = out.e_mu;
      pyr.ec = out.e_c;
      pyr.r1 = out.r1;
      pyr.mask_scale = static_cast<T>(cfg.gaussian.mask_scale);
    }
  }
  if (cfg.use_deform) out.offsets = decode_offsets(tape, store, "offset", fi, fj, cfg.gaussian.eps, cfg.offset_bound);

  auto flow = tape.constant(Tensor<T>({2, h, w}));
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto coords = ad::add(grid, flow);
    auto lookup = lookup_fixed(pyr, coords);
    if (cfg.use_deform) {
      const auto gate = uncertainty_gate(lookup);
      out.gates.push_back(gate);
      lookup = deformable_lookup(pyr, coords, gated_offsets(out.offsets, gate));
    }
    const auto step = update_operator(tape, store, "update", hidden, lookup, flow, context, cfg.use_kan);
    hidden = step.hidden;
    flow = ad::add(flow, step.delta_flow);
    out.flows.push_back(flow);
  }
  return out;
}

#define LGU_INSTANTIATE_MODEL(T)                                                                                \
  template void init_model(ad::ParamStore<T>&, const ModelConfig&, std::uint64_t);                              \
  template ModelOutput<T> forward(ad::Tape<T>&, ad::ParamStore<T>&, const ModelConfig&, const ad::Var<T>&, \
                                  const ad::Var<T>&);

LGU_INSTANTIATE_MODEL(float)
LGU_INSTANTIATE_MODEL(double)

}  // namespace lgu
