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

#include "lgu/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "json.hpp"
#include "lgu/correlation.hpp"
#include "lgu/gaussian.hpp"
#include "lgu/geometry.hpp"
#include "lgu/gradcheck.hpp"
#include "lgu/parallel.hpp"
#include "lgu/serialize.hpp"
#include "lgu/training.hpp"

namespace lgu {

namespace {

template <Real T>
Tensor<T> uniform(const Shape& s, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<T> t(s);
  for (auto& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

template <Real T>
Tensor<T> jittered_coords(std::size_t h, std::size_t w, std::mt19937_64& rng, double spread) {
  auto c = grid_coords<T>(h, w);
  std::uniform_real_distribution<double> u(-spread, spread);
  for (auto& v : c.data()) v += static_cast<T>(u(rng));
  return c;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void prepare(const RunConfig& cfg) {
  cfg.validate();
  set_num_threads(cfg.threads);
  tune_allocator();
}

template <Real T>
int train_typed(const RunConfig& cfg, const LineSink& out) {
  try {
    const auto sum = train<T>(cfg.train, [&](const LossReport& r) { out(r.to_json()); });
    nlohmann::ordered_json j;
    j["summary"] = "train";
    j["steps"] = sum.steps;
    j["initial_epe"] = sum.initial_epe;
    j["final_epe"] = sum.final_epe;
    j["epe_ratio"] = sum.initial_epe > 0 ? sum.final_epe / sum.initial_epe : 0.0;
    out(j.dump());
  } catch (const NumericError& e) {
    nlohmann::ordered_json j;
    j["error"] = "numeric";
    j["message"] = e.what();
    out(j.dump());
    return kExitNumeric;
  }
  return kExitOk;
}

template <Real T>
void load_or_init(ad::ParamStore<T>& ps, const RunConfig& cfg, const std::filesystem::path& checkpoint) {
  init_model(ps, cfg.train.model, cfg.train.seed);
  if (!checkpoint.empty()) ad::load_checkpoint(ps, checkpoint);
}

template <Real T>
int eval_typed(const RunConfig& cfg, const std::filesystem::path& checkpoint, const LineSink& out) {
  ad::ParamStore<T> ps(cfg.train.seed);
  load_or_init(ps, cfg, checkpoint);
  const auto held_out = make_corpus<T>(cfg.train.scene, cfg.train.seed, cfg.train.eval_size, true);
  const double epe = evaluate(ps, cfg.train.model, held_out);
  nlohmann::ordered_json j;
  j["epe"] = epe;
  j["scenes"] = held_out.size();
  j["checkpoint"] = checkpoint.string();
  j["use_lgu"] = cfg.train.model.use_lgu;
  j["use_deform"] = cfg.train.model.use_deform;
  j["use_kan"] = cfg.train.model.use_kan;
  out(j.dump());
  return kExitOk;
}

template <Real T>
int demo_typed(const RunConfig& cfg, std::uint64_t scene_seed, const std::filesystem::path& checkpoint,
               const LineSink& out) {
  const auto& dir = cfg.train.out_dir;
  if (dir.empty()) throw ConfigError("demo: an output directory is required");
  std::filesystem::create_directories(dir);
  ad::ParamStore<T> ps(cfg.train.seed);
  load_or_init(ps, cfg, checkpoint);
  const auto scene = generate_scene<T>(cfg.train.scene, scene_seed);
  ad::Tape<T> tape;
  const auto fwd = forward(tape, ps, cfg.train.model, tape.constant(scene.image_i), tape.constant(scene.image_j));

  std::vector<std::string> files;
  auto dump = [&](const Tensor<T>& t, const std::string& name) {
    save_tensor(t, dir / (name + ".lgut"));
    files.push_back(name + ".lgut");
  };
  dump(scene.image_i, "image_i");
  dump(scene.image_j, "image_j");
  dump(scene.flow, "flow_gt");
  dump(scene.valid, "valid");
  dump(scene.ambiguous, "ambiguous");
  dump(fwd.e_mu.value(), "e_mu");
  dump(fwd.e_c.value(), "e_c");
  if (cfg.train.model.use_lgu) {
    const auto mask = build_mask(fwd.e_mu.value(), fwd.e_c.value(), fwd.r1, cfg.train.model.gaussian.mask_scale);
    dump(mask.anchor, "mask_anchor");
    dump(mask.values, "mask_values");
  }
  if (cfg.train.model.use_deform) {
    dump(fwd.offsets.top.value(), "offsets_top");
    dump(fwd.offsets.res.value(), "offsets_res");
    for (int s = 0; s < kPyramidLevels; ++s) {
      dump(compose_scale_offsets(fwd.offsets.top, fwd.offsets.res, s).value(), "offsets_level" + std::to_string(s));
    }
    for (std::size_t t = 0; t < fwd.gates.size(); ++t) dump(fwd.gates[t].value(), "gate_" + std::to_string(t + 1));
  }
  for (std::size_t t = 0; t < fwd.flows.size(); ++t) dump(fwd.flows[t].value(), "flow_" + std::to_string(t + 1));

  nlohmann::ordered_json j;
  j["scene_seed"] = scene_seed;
  j["out_dir"] = dir.string();
  j["r1"] = fwd.r1;
  j["epe"] = end_point_error(fwd.flows.back().value(), scene.flow, scene.valid);
  j["files"] = files;
  out(j.dump());
  return kExitOk;
}

}  // namespace

std::string BenchRecord::to_json() const {
  nlohmann::ordered_json j;
  j["path"] = path;
  j["H"] = h;
  j["W"] = w;
  j["C"] = c;
  j["r"] = r;
  j["threads"] = threads;
  j["repeat"] = repeat;
  j["median_ms"] = median_ms;
  j["mac_estimate"] = mac_estimate;
  return j.dump();
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("loglog_slope: need at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0) throw ContractError("loglog_slope: x values must differ");
  return sxy / sxx;
}

double lookup_path_gap(std::size_t h, std::size_t w, std::size_t c, int r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto fi = uniform<double>({c, h, w}, rng, -1, 1);
  const auto fj = uniform<double>({c, h, w}, rng, -1, 1);
  const auto coords = jittered_coords<double>(h, w, rng, 3.0);
  std::vector<Tensor<double>> offsets;
  for (int s = 0; s < kPyramidLevels; ++s) {
    offsets.push_back(uniform<double>({2 * lookup_taps(r), h, w}, rng, -kOffsetBound, kOffsetBound));
  }
  const auto mat = CorrPyramid<double>::materialize(fi, fj, r);
  const auto otf = CorrPyramid<double>::onthefly(fi, fj, r);
  return std::max(max_abs_diff(mat.lookup(coords), otf.lookup(coords)),
                  max_abs_diff(mat.lookup(coords, offsets), otf.lookup(coords, offsets)));
}

BenchReport run_bench(const std::vector<std::size_t>& sizes, std::size_t c, int r, std::size_t repeat,
                      std::uint64_t seed, int threads) {
  if (sizes.empty() || repeat == 0) throw ConfigError("bench: need at least one size and one repetition");
  BenchReport rep;
  rep.equivalence_max_abs = std::max(lookup_path_gap(16, 16, c, r, seed), lookup_path_gap(sizes.front(), sizes.front(), c, r, seed + 1));
  std::vector<double> hw, tm, to;
  for (std::size_t s : sizes) {
    std::mt19937_64 rng(split_seed(seed, s));
    const auto fi = uniform<float>({c, s, s}, rng, -1, 1);
    const auto fj = uniform<float>({c, s, s}, rng, -1, 1);
    const auto coords = jittered_coords<float>(s, s, rng, 3.0);
    for (const CorrMode mode : {CorrMode::materialized, CorrMode::onthefly}) {
      auto run_once = [&] {
        const auto t0 = std::chrono::steady_clock::now();
        const auto pyr = mode == CorrMode::materialized ? CorrPyramid<float>::materialize(fi, fj, r)
                                                         : CorrPyramid<float>::onthefly(fi, fj, r);
        const auto out = pyr.lookup(coords);
        const auto dt = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (!std::isfinite(out[0])) throw NumericError("bench: non-finite lookup");
        return dt;
      };
      run_once();  // warm-up
      std::vector<double> times;
      for (std::size_t k = 0; k < repeat; ++k) times.push_back(run_once());
      BenchRecord b;
      b.path = mode == CorrMode::materialized ? "materialized" : "onthefly";
      b.h = b.w = s;
      b.c = c;
      b.r = r;
      b.threads = threads;
      b.repeat = repeat;
      b.median_ms = median(times);
      b.mac_estimate = mode == CorrMode::materialized ? mac_materialized(s, s, c) : mac_onthefly(s, s, c, r);
      (mode == CorrMode::materialized ? tm : to).push_back(b.median_ms);
      rep.records.push_back(b);
    }
    hw.push_back(static_cast<double>(s * s));
  }
  if (hw.size() >= 2) {
    rep.slope_materialized = loglog_slope(hw, tm);
    rep.slope_onthefly = loglog_slope(hw, to);
  }
  return rep;
}

int cmd_gradcheck(const RunConfig& cfg, const LineSink& out) {
  prepare(cfg);
  bool ok = true;
  for (const auto& op : gradcheck_ops()) {
    const auto r = run_gradcheck(op, cfg.gradcheck_seeds, cfg.train.seed);
    ok = ok && r.pass;
    out(r.to_json());
  }
  return ok ? kExitOk : kExitVerification;
}

int cmd_bench(const RunConfig& cfg, const LineSink& out) {
  prepare(cfg);
  const auto rep = run_bench(cfg.bench_sizes, cfg.bench_channels, cfg.train.model.radius, cfg.bench_repeat,
                             cfg.train.seed, cfg.threads);
  const bool equivalent = rep.equivalence_max_abs <= 1e-10;
  for (const auto& r : rep.records) out(r.to_json());
  nlohmann::ordered_json j;
  j["summary"] = "bench";
  j["equivalence_max_abs"] = rep.equivalence_max_abs;
  j["equivalent"] = equivalent;
  if (cfg.bench_sizes.size() >= 2) {
    j["slope_materialized"] = rep.slope_materialized;
    j["slope_onthefly"] = rep.slope_onthefly;
  }
  out(j.dump());
  return equivalent ? kExitOk : kExitVerification;
}

int cmd_train(const RunConfig& cfg, const LineSink& out) {
  prepare(cfg);
  if (!cfg.train.out_dir.empty()) std::filesystem::create_directories(cfg.train.out_dir);
  return cfg.dtype == DType::f32 ? train_typed<float>(cfg, out) : train_typed<double>(cfg, out);
}

int cmd_demo(const RunConfig& cfg, std::uint64_t scene_seed, const std::filesystem::path& checkpoint,
             const LineSink& out) {
  prepare(cfg);
  return cfg.dtype == DType::f32 ? demo_typed<float>(cfg, scene_seed, checkpoint, out)
                                 : demo_typed<double>(cfg, scene_seed, checkpoint, out);
}

int cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, const LineSink& out) {
  prepare(cfg);
  return cfg.dtype == DType::f32 ? eval_typed<float>(cfg, checkpoint, out) : eval_typed<double>(cfg, checkpoint, out);
}

}  // namespace lgu
