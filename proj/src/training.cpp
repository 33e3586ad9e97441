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

#include "lgu/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

#include "json.hpp"
#include "lgu/parallel.hpp"
#include "lgu/serialize.hpp"

namespace lgu {

namespace {

constexpr std::uint64_t kHeldOutStream = 0x5eedfacec0ffeeULL;

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  scene.validate();
  if (scene.channels != model.channels) throw ConfigError("scene channels must equal model channels");
  if (corpus_size == 0 || eval_size == 0) throw ConfigError("corpus and eval sizes must be positive");
  if (batch == 0) throw ConfigError("batch must be positive");
  if (!(adam.lr >= 0) || !std::isfinite(adam.lr)) throw ConfigError("learning rate must be finite and non-negative");
  if (!(loss.gamma > 0 && loss.gamma <= 1)) throw ConfigError("gamma must be in (0, 1]");
  if (!(loss.flow >= 0) || !(loss.self >= 0)) throw ConfigError("loss weights must be non-negative");
}

std::string LossReport::to_json() const {
  nlohmann::json j;
  j["step"] = step;
  j["l_flow"] = l_flow;
  j["l_self"] = l_self;
  j["total"] = total;
  j["epe"] = epe;
  j["lr"] = lr;
  j["wall_ms"] = wall_ms;
  return j.dump();
}

template <Real T>
std::vector<SceneSample<T>> make_corpus(const SceneConfig& cfg, std::uint64_t seed, std::size_t count, bool held_out) {
  const std::uint64_t base = held_out ? split_seed(seed, kHeldOutStream) : seed;
  std::vector<SceneSample<T>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_scene<T>(cfg, split_seed(base, i)));
  return out;
}

template <Real T>
SampleLoss<T> sample_loss(ad::Tape<T>& tape, ad::ParamStore<T>& store, const TrainConfig& cfg,
                          const SceneSample<T>& scene, ModelOutput<T>* out) {
  ModelOutput<T> fwd = forward(tape, store, cfg.model, tape.constant(scene.image_i), tape.constant(scene.image_j));
  SampleLoss<T> r;
  r.l_flow = flow_loss(fwd.flows, scene.flow, scene.valid, cfg.loss.gamma);
  if (cfg.model.use_lgu) {
    const auto target = ad::detach(ad::add(tape.constant(grid_coords<T>(scene.flow.dim(1), scene.flow.dim(2))),
                                           fwd.flows.back()));
    r.l_self = self_supervised_loss(fwd.e_mu, fwd.e_c, target);
  } else {
    r.l_self = tape.constant(Tensor<T>::scalar(T(0)));
  }
  r.total = total_loss(r.l_flow, r.l_self, cfg.loss);
  r.epe = end_point_error(fwd.flows.back().value(), scene.flow, scene.valid);
  if (out) *out = std::move(fwd);
  return r;
}

template <Real T>
double evaluate(ad::ParamStore<T>& store, const ModelConfig& cfg, const std::vector<SceneSample<T>>& scenes) {
  if (scenes.empty()) throw ContractError("evaluate: no scenes");
  double acc = 0;
  for (const auto& s : scenes) {
    ad::Tape<T> tape;
    const auto out = forward(tape, store, cfg, tape.constant(s.image_i), tape.constant(s.image_j));
    acc += end_point_error(out.flows.back().value(), s.flow, s.valid);
  }
  return acc / static_cast<double>(scenes.size());
}

template <Real T>
Trainer<T>::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)), params_(cfg_.seed), adam_(cfg_.adam) {
  cfg_.validate();
  tune_allocator();
  init_model(params_, cfg_.model, cfg_.seed);
  corpus_ = make_corpus<T>(cfg_.scene, cfg_.seed, cfg_.corpus_size, false);
}

template <Real T>
LossReport Trainer<T>::step() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(split_seed(cfg_.seed ^ 0xba7c4ULL, step_));
  std::uniform_int_distribution<std::size_t> pick(0, corpus_.size() - 1);
  std::vector<std::size_t> picks(cfg_.batch);
  for (auto& p : picks) p = pick(rng);

  params_.zero_grad();
  LossReport rep;
  const double inv_batch = 1.0 / static_cast<double>(cfg_.batch);
  try {
    for (std::size_t b : picks) {
      ad::Tape<T> tape;
      const auto loss = sample_loss(tape, params_, cfg_, corpus_[b]);
      tape.backward(ad::scale(loss.total, static_cast<T>(inv_batch)));
      rep.l_flow += static_cast<double>(loss.l_flow.value().item()) * inv_batch;
      rep.l_self += static_cast<double>(loss.l_self.value().item()) * inv_batch;
      rep.total += static_cast<double>(loss.total.value().item()) * inv_batch;
      rep.epe += loss.epe * inv_batch;
    }
    adam_.step(params_);
    for (const auto& name : params_.names()) check_finite(params_.value(name), "adam update of " + name);
  } catch (const NumericError& e) {
    dump_batch(picks, e.what());
    throw;
  }
  ++step_;
  params_.set_step(step_);
  rep.step = step_;
  rep.lr = cfg_.adam.lr;
  rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

template <Real T>
void Trainer<T>::dump_batch(const std::vector<std::size_t>& picks, const std::string& what) const {
  if (cfg_.out_dir.empty()) return;
  const auto dir = cfg_.out_dir / ("abort_step_" + std::to_string(step_));
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["step"] = step_;
  j["error"] = what;
  j["scenes"] = picks;
  std::ofstream(dir / "diagnostic.json") << j.dump(2) << "\n";
  for (std::size_t k = 0; k < picks.size(); ++k) {
    const auto& s = corpus_[picks[k]];
    const std::string tag = "sample" + std::to_string(k);
    save_tensor(s.image_i, dir / (tag + "_image_i.lgut"));
    save_tensor(s.image_j, dir / (tag + "_image_j.lgut"));
    save_tensor(s.flow, dir / (tag + "_flow.lgut"));
  }
  ad::save_checkpoint(params_, dir / "params");
}

template <Real T>
TrainSummary train(const TrainConfig& cfg, const std::function<void(const LossReport&)>& report,
                   ad::ParamStore<T>* final_params) {
  Trainer<T> trainer(cfg);
  const auto held_out = make_corpus<T>(cfg.scene, cfg.seed, cfg.eval_size, true);
  TrainSummary sum;
  sum.initial_epe = evaluate(trainer.params(), cfg.model, held_out);
  for (std::size_t i = 0; i < cfg.steps; ++i) {
    const auto rep = trainer.step();
    if (report) report(rep);
    if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 && rep.step % cfg.checkpoint_every == 0) {
      ad::save_checkpoint(trainer.params(), cfg.out_dir / ("checkpoint_" + std::to_string(rep.step)));
    }
  }
  if (!cfg.out_dir.empty()) ad::save_checkpoint(trainer.params(), cfg.out_dir / "checkpoint_final");
  sum.final_epe = evaluate(trainer.params(), cfg.model, held_out);
  sum.steps = cfg.steps;
  if (final_params) *final_params = trainer.params();
  return sum;
}

#define LGU_INSTANTIATE_TRAINING(T)                                                                                \
  template std::vector<SceneSample<T>> make_corpus(const SceneConfig&, std::uint64_t, std::size_t, bool);          \
  template SampleLoss<T> sample_loss(ad::Tape<T>&, ad::ParamStore<T>&, const TrainConfig&, const SceneSample<T>&, \
                                     ModelOutput<T>*);                                                            \
  template double evaluate(ad::ParamStore<T>&, const ModelConfig&, const std::vector<SceneSample<T>>&);           \
  template class Trainer<T>;                                                                                       \
  template TrainSummary train(const TrainConfig&, const std::function<void(const LossReport&)>&,                   \
                              ad::ParamStore<T>*);

LGU_INSTANTIATE_TRAINING(float)
LGU_INSTANTIATE_TRAINING(double)

}  // namespace lgu
