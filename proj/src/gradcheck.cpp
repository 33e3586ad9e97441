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

#include "lgu/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <random>

#include "json.hpp"
#include "lgu/correlation.hpp"
#include "lgu/deformable.hpp"
#include "lgu/error.hpp"
#include "lgu/gaussian.hpp"
#include "lgu/geometry.hpp"
#include "lgu/layers.hpp"
#include "lgu/losses.hpp"
#include "lgu/model.hpp"
#include "lgu/temporal.hpp"

namespace lgu {

namespace {

using V = ad::Var<double>;
using Tp = ad::Tape<double>;

constexpr double kOpTolerance = 1e-5;
constexpr double kPipelineTolerance = 1e-4;

struct Input {
  Shape shape;
  double lo = -1, hi = 1;
};

struct Outcome {
  double err = 0;
  std::size_t coords = 0;
};

Tensor<double> uniform(const Shape& s, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(s);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// Scalar probe <y, w> with fixed random weights, so every output coordinate matters.
V probe(Tp& t, const V& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  return ad::sum(ad::mul(y, t.constant(uniform(y.shape(), rng, -1, 1))));
}

using MultiFn = std::function<V(Tp&, const std::vector<V>&)>;

// Checks the gradient of probe(f(inputs)) with respect to each input in turn.
Outcome check_inputs(std::uint64_t seed, const std::vector<Input>& inputs, const MultiFn& f,
                     std::vector<std::size_t> wrt = {}) {
  std::mt19937_64 rng(seed);
  std::vector<Tensor<double>> vals;
  for (const auto& in : inputs) vals.push_back(uniform(in.shape, rng, in.lo, in.hi));
  if (wrt.empty())
    for (std::size_t k = 0; k < inputs.size(); ++k) wrt.push_back(k);
  Outcome o;
  for (std::size_t k : wrt) {
    const ad::ScalarFn<double> fn = [&](Tp& t, const V& x) {
      std::vector<V> args;
      for (std::size_t j = 0; j < vals.size(); ++j) args.push_back(j == k ? x : t.constant(vals[j]));
      return probe(t, f(t, args), seed);
    };
    const auto rep = ad::fd_check<double>(fn, vals[k], 1e-6, 48, seed + k);
    o.err = std::max(o.err, rep.max_rel_error);
    o.coords += rep.checked;
  }
  return o;
}

// Same over the parameters of a module initialized by `init`.
Outcome check_params(std::uint64_t seed, const std::function<void(ad::ParamStore<double>&, std::mt19937_64&)>& init,
                     const std::function<V(Tp&, ad::ParamStore<double>&)>& f, std::size_t coords_per_param = 8) {
  ad::ParamStore<double> ps(seed);
  std::mt19937_64 rng(seed);
  init(ps, rng);
  Outcome o;
  for (const auto& name : ps.names()) {
    // Non-zero biases so that zero-initialized tensors are probed away from special points.
    if (name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0) ps.value(name) = uniform(ps.value(name).shape(), rng, -0.3, 0.3);
  }
  const std::function<V(Tp&)> loss = [&](Tp& t) { return probe(t, f(t, ps), seed); };
  for (const auto& name : ps.names()) {
    const auto rep = ad::fd_check_param<double>(ps, name, loss, 1e-6, coords_per_param, seed);
    o.err = std::max(o.err, rep.max_rel_error);
    o.coords += rep.checked;
  }
  return o;
}

Tensor<double> jittered_grid(std::size_t h, std::size_t w, std::mt19937_64& rng, double spread) {
  auto c = grid_coords<double>(h, w);
  std::uniform_real_distribution<double> u(-spread, spread);
  for (auto& v : c.data()) v += u(rng);
  return c;
}

using Check = std::function<Outcome(std::uint64_t)>;

Check unary(std::function<V(const V&)> op, double lo = -2, double hi = 2, Shape shape = {3, 4, 5}) {
  return [op, lo, hi, shape](std::uint64_t seed) {
    return check_inputs(seed, {{shape, lo, hi}}, [op](Tp&, const std::vector<V>& a) { return op(a[0]); });
  };
}

Check binary(std::function<V(const V&, const V&)> op) {
  return [op](std::uint64_t seed) {
    return check_inputs(seed, {{{3, 4, 5}}, {{3, 4, 5}}}, [op](Tp&, const std::vector<V>& a) { return op(a[0], a[1]); });
  };
}

Outcome pipeline_check(std::uint64_t seed) {
  ModelConfig m;
  m.channels = 3;
  m.radius = 1;
  m.hidden = 4;
  m.context = 3;
  m.corr_mid = 5;
  m.corr_out = 4;
  m.flow_mid = 3;
  m.flow_out = 3;
  m.head_mid = 4;
  const std::size_t h = 8, w = 8;
  std::mt19937_64 rng(seed + 77);
  const auto ii = uniform({3, h, w}, rng, -1, 1), ij = uniform({3, h, w}, rng, -1, 1);
  const auto gt = uniform({2, h, w}, rng, -2, 2);
  Tensor<double> valid({h, w});
  valid.fill(1.0);
  ad::ParamStore<double> ps(seed);
  init_model(ps, m, seed);
  // The self-supervised target is a stop-gradient; it is held at its unperturbed value.
  Tensor<double> target = grid_coords<double>(h, w);
  {
    Tp t;
    const auto out = forward(t, ps, m, t.constant(ii), t.constant(ij));
    const auto& f = out.flows.back().value();
    for (std::size_t i = 0; i < target.numel(); ++i) target[i] += f[i];
  }
  const std::function<V(Tp&)> loss = [&](Tp& t) {
    const auto out = forward(t, ps, m, t.constant(ii), t.constant(ij));
    return total_loss(flow_loss(out.flows, gt, valid), self_supervised_loss(out.e_mu, out.e_c, t.constant(target)));
  };
  Outcome o;
  for (const auto& name : ps.names()) {
    const auto rep = ad::fd_check_param<double>(ps, name, loss, 1e-6, 2, seed);
    o.err = std::max(o.err, rep.max_rel_error);
    o.coords += rep.checked;
  }
  return o;
}

const std::vector<std::pair<std::string, Check>>& registry() {
  static const std::vector<std::pair<std::string, Check>> checks = [] {
    std::vector<std::pair<std::string, Check>> c;
    c.emplace_back("add", binary([](const V& a, const V& b) { return ad::add(a, b); }));
    c.emplace_back("sub", binary([](const V& a, const V& b) { return ad::sub(a, b); }));
    c.emplace_back("mul", binary([](const V& a, const V& b) { return ad::mul(a, b); }));
    c.emplace_back("scale", unary([](const V& a) { return ad::scale(a, -1.7); }));
    c.emplace_back("add_scalar", unary([](const V& a) { return ad::add_scalar(a, 0.3); }));
    c.emplace_back("sigmoid", unary([](const V& a) { return ad::sigmoid(a); }));
    c.emplace_back("tanh", unary([](const V& a) { return ad::tanh(a); }));
    c.emplace_back("gelu", unary([](const V& a) { return ad::gelu(a); }));
    c.emplace_back("exp", unary([](const V& a) { return ad::exp(a); }));
    c.emplace_back("log", unary([](const V& a) { return ad::log(a); }, 0.2, 3));
    c.emplace_back("square", unary([](const V& a) { return ad::square(a); }));
    c.emplace_back("abs", unary([](const V& a) { return ad::abs(a); }));
    c.emplace_back("sum", unary([](const V& a) { return ad::sum(a); }));
    c.emplace_back("mean", unary([](const V& a) { return ad::mean(a); }));
    c.emplace_back("reshape", unary([](const V& a) { return ad::reshape(a, {12, 5}); }));
    c.emplace_back("concat", binary([](const V& a, const V& b) { return ad::concat<double>({a, b, a}); }));
    c.emplace_back("slice", unary([](const V& a) { return ad::slice(a, 1, 3); }));
    c.emplace_back("mul_channels", [](std::uint64_t seed) {
      return check_inputs(seed, {{{3, 4, 5}}, {{4, 5}}},
                          [](Tp&, const std::vector<V>& a) { return ad::mul_channels(a[0], a[1]); });
    });
    c.emplace_back("conv2d", [](std::uint64_t seed) {
      return check_inputs(seed, {{{2, 5, 6}}, {{3, 2, 3, 3}}, {{3}}},
                          [](Tp&, const std::vector<V>& a) { return ad::conv2d(a[0], a[1], &a[2]); });
    });
    c.emplace_back("avg_pool2d", unary([](const V& a) { return ad::avg_pool2d(a, 2); }, -2, 2, {3, 4, 6}));
    c.emplace_back("upsample2x", unary([](const V& a) { return ad::upsample2x(a); }));
    c.emplace_back("norm_corr", unary([](const V& a) { return norm_corr(a); }));
    c.emplace_back("bounded_sigmoid", unary([](const V& a) { return bounded_sigmoid(a, 0.05, 5.05); }));
    c.emplace_back("bounded_tanh", unary([](const V& a) { return bounded_tanh(a, kOffsetBound); }));
    c.emplace_back("build_volume", [](std::uint64_t seed) {
      return check_inputs(seed, {{{3, 4, 5}}, {{3, 4, 5}}},
                          [](Tp&, const std::vector<V>& a) { return build_volume(a[0], a[1]); });
    });
    c.emplace_back("lookup_level", [](std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      const auto coords = jittered_grid(6, 7, rng, 2.5);
      Outcome o = check_inputs(seed, {{{6, 7, 3, 4}}, {{18, 6, 7}, -1.5, 1.5}},
                               [&](Tp& t, const std::vector<V>& a) {
                                 return lookup_level(a[0], t.constant(coords), 1, 1, &a[1]);
                               });
      const Outcome oc = check_inputs(seed, {{{6, 7, 6, 7}}, {{2, 6, 7}, 0, 6}, {{18, 6, 7}, -1.5, 1.5}},
                                      [](Tp&, const std::vector<V>& a) { return lookup_level(a[0], a[1], 0, 1, &a[2]); },
                                      {1});
      o.err = std::max(o.err, oc.err);
      o.coords += oc.coords;
      return o;
    });
    c.emplace_back("lookup_onthefly_level", [](std::uint64_t seed) {
      return check_inputs(
          seed, {{{3, 6, 6}}, {{3, 3, 3}}, {{2, 6, 6}, 0, 5}, {{18, 6, 6}, -1.5, 1.5}, {{2, 6, 6}, 0, 5}, {{2, 6, 6}, 0.3, 3}},
          [](Tp&, const std::vector<V>& a) { return lookup_onthefly_level(a[0], a[1], a[2], 1, 1, &a[3], &a[4], &a[5], 1, 3.0); });
    });
    c.emplace_back("density", [](std::uint64_t seed) {
      return check_inputs(seed, {{{2, 4, 5}, 0, 4}, {{2, 4, 5}, 0.3, 3}, {{2, 4, 5}, 0, 4}},
                          [](Tp&, const std::vector<V>& a) { return density(a[0], a[1], a[2]); });
    });
    c.emplace_back("normalize_covariance", unary([](const V& a) { return normalize_covariance(ad::slice(a, 0, 2)); }));
    c.emplace_back("apply_mask", [](std::uint64_t seed) {
      return check_inputs(seed, {{{4, 5, 4, 5}}, {{2, 4, 5}, 0.6, 3.4}, {{2, 4, 5}, 0.3, 3}},
                          [](Tp&, const std::vector<V>& a) { return apply_mask(a[0], a[1], a[2], 1, 3.0); });
    });
    c.emplace_back("pyramid_materialized", [](std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      const auto coords = jittered_grid(8, 8, rng, 2.0);
      return check_inputs(seed, {{{3, 8, 8}}, {{3, 8, 8}}, {{2, 8, 8}, 0.6, 6.4}, {{2, 8, 8}, 0.3, 3}},
                          [&](Tp& t, const std::vector<V>& a) {
                            const auto pyr = pyramid_materialized(a[0], a[1], 1, &a[2], &a[3], 1, 3.0);
                            return lookup_fixed(pyr, t.constant(coords));
                          });
    });
    c.emplace_back("deformable_lookup", [](std::uint64_t seed) {
      return check_inputs(seed, {{{3, 8, 8}}, {{3, 8, 8}}, {{2, 8, 8}, 0.5, 6.5}, {{18, 8, 8}, -1.5, 1.5}},
                          [](Tp&, const std::vector<V>& a) {
                            const auto pyr = pyramid_onthefly(a[0], a[1], 1);
                            return deformable_lookup(pyr, a[2], {a[3], ad::scale(a[3], 0.5), a[3], a[3]});
                          });
    });
    c.emplace_back("compose_scale_offsets", binary([](const V& a, const V& b) { return compose_scale_offsets(a, b, 2); }));
    c.emplace_back("tap_variance", [](std::uint64_t seed) {
      return check_inputs(seed, {{{36, 3, 4}}}, [](Tp&, const std::vector<V>& a) { return tap_variance(a[0]); });
    });
    c.emplace_back("uncertainty_gate", [](std::uint64_t seed) {
      return check_inputs(seed, {{{36, 3, 4}}}, [](Tp&, const std::vector<V>& a) { return uncertainty_gate(a[0]); });
    });
    c.emplace_back("gated_offsets", [](std::uint64_t seed) {
      return check_inputs(seed, {{{18, 4, 4}}, {{18, 4, 4}}, {{4, 4}, 0.5, 1}}, [](Tp&, const std::vector<V>& a) {
        return ad::concat(gated_offsets(OffsetPair<double>{a[0], a[1]}, a[2]));
      });
    });
    c.emplace_back("decode_offsets", [](std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      const auto fi = uniform({3, 6, 6}, rng, -1, 1), fj = uniform({3, 6, 6}, rng, -1, 1);
      return check_params(
          seed, [](auto& ps, auto& r) { init_offset_decoders(ps, "off", 3, 1, r); },
          [&](Tp& t, ad::ParamStore<double>& ps) {
            const auto off = decode_offsets(t, ps, "off", t.constant(fi), t.constant(fj));
            return ad::concat<double>({off.top, off.res});
          });
    });
    c.emplace_back("encode_gaussian", [](std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      const auto fi = uniform({3, 4, 5}, rng, -1, 1), fj = uniform({3, 4, 5}, rng, -1, 1);
      return check_params(
          seed, [](auto& ps, auto& r) { init_gaussian_encoder(ps, "g", 3, r); },
          [&](Tp& t, ad::ParamStore<double>& ps) {
            const auto g = encode_gaussian(t, ps, "g", t.constant(fi), t.constant(fj));
            return ad::concat<double>({g.e_r, g.raw_ec});
          });
    });
    c.emplace_back("reproject", [](std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      const auto coords = jittered_grid(4, 5, rng, 0.4);
      const PoseSE3 pose = PoseSE3::from_axis_angle({0.3, -0.5, 0.8}, 0.05, {0.1, -0.05, 0.03});
      const Camera cam{4.0, 4.0, 2.0, 1.5};
      return check_inputs(seed, {{{4, 5}, 0.2, 1.0}},
                          [&](Tp&, const std::vector<V>& a) { return reproject(coords, a[0], pose, cam); });
    });
    c.emplace_back("kan_activation", [](std::uint64_t seed) {
      return check_inputs(seed, {{{3, 4, 5}, -1.3, 1.3}, {{3}}, {{3, 11}}},
                          [](Tp&, const std::vector<V>& a) { return kan_activation(a[0], a[1], a[2]); });
    });
    c.emplace_back("kan_bias", [](std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      const auto h = uniform({4, 3, 4}, rng, -1, 1);
      return check_params(
          seed, [](auto& ps, auto& r) { init_kan_bias(ps, "k", 4, r); },
          [&](Tp& t, ad::ParamStore<double>& ps) {
            const auto b = kan_bias(t, ps, "k", t.constant(h));
            return ad::concat<double>({b.z, b.r, b.o});
          });
    });
    c.emplace_back("gru_step", [](std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      const auto h = uniform({4, 3, 4}, rng, -1, 1), x = uniform({3, 3, 4}, rng, -1, 1);
      return check_params(
          seed,
          [](auto& ps, auto& r) {
            init_gru(ps, "gru", 4, 3, r);
            init_kan_bias(ps, "k", 4, r);
          },
          [&](Tp& t, ad::ParamStore<double>& ps) {
            const auto hv = t.constant(h);
            const auto b = kan_bias(t, ps, "k", hv);
            return gru_step(t, ps, "gru", hv, t.constant(x), &b);
          });
    });
    c.emplace_back("update_operator", [](std::uint64_t seed) {
      UpdateDims d;
      d.corr = 36;
      d.hidden = 4;
      d.context = 3;
      d.corr_mid = 5;
      d.corr_out = 4;
      d.flow_mid = 3;
      d.flow_out = 3;
      d.head_mid = 4;
      std::mt19937_64 rng(seed);
      const auto h = uniform({4, 4, 4}, rng, -1, 1), look = uniform({36, 4, 4}, rng, -1, 1);
      const auto flow = uniform({2, 4, 4}, rng, -2, 2), ctx = uniform({3, 4, 4}, rng, -1, 1);
      return check_params(
          seed, [&](auto& ps, auto& r) { init_update_operator(ps, "u", d, r); },
          [&](Tp& t, ad::ParamStore<double>& ps) {
            const auto u = update_operator(t, ps, "u", t.constant(h), t.constant(look), t.constant(flow),
                                           t.constant(ctx), true);
            return ad::concat<double>({u.hidden, u.delta_flow});
          },
          4);
    });
    c.emplace_back("flow_loss", [](std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      const auto gt = uniform({2, 4, 5}, rng, -2, 2);
      Tensor<double> valid({4, 5});
      valid.fill(1.0);
      valid[3] = 0;
      return check_inputs(seed, {{{2, 4, 5}, -3, 3}, {{2, 4, 5}, -3, 3}}, [&](Tp&, const std::vector<V>& a) {
        return flow_loss<double>({a[0], a[1]}, gt, valid);
      });
    });
    c.emplace_back("self_supervised_loss", [](std::uint64_t seed) {
      return check_inputs(seed, {{{2, 4, 5}, 0, 5}, {{2, 4, 5}, 0.1, 5}, {{2, 4, 5}, 0, 5}},
                          [](Tp&, const std::vector<V>& a) { return self_supervised_loss(a[0], a[1], a[2]); }, {0, 1});
    });
    c.emplace_back("total_loss", [](std::uint64_t seed) {
      return check_inputs(seed, {{{}}, {{}}}, [](Tp&, const std::vector<V>& a) { return total_loss(a[0], a[1]); });
    });
    c.emplace_back("pipeline", pipeline_check);
    return c;
  }();
  return checks;
}

}  // namespace

std::string GradcheckResult::to_json() const {
  nlohmann::json j;
  j["op"] = op;
  j["max_rel_error"] = max_rel_error;
  j["tolerance"] = tolerance;
  j["seeds"] = seeds;
  j["coords"] = coords;
  j["wall_ms"] = wall_ms;
  j["pass"] = pass;
  return j.dump();
}

std::vector<std::string> gradcheck_ops() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

GradcheckResult run_gradcheck(const std::string& op, std::size_t seeds, std::uint64_t base_seed) {
  const auto& reg = registry();
  const auto it = std::find_if(reg.begin(), reg.end(), [&](const auto& e) { return e.first == op; });
  if (it == reg.end()) throw ConfigError("gradcheck: unknown op '" + op + "'");
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckResult r;
  r.op = op;
  r.seeds = seeds;
  r.tolerance = op == "pipeline" ? kPipelineTolerance : kOpTolerance;
  for (std::size_t s = 0; s < seeds; ++s) {
    const Outcome o = it->second(base_seed + s);
    r.max_rel_error = std::max(r.max_rel_error, o.err);
    r.coords += o.coords;
  }
  r.pass = r.max_rel_error <= r.tolerance;
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace lgu
