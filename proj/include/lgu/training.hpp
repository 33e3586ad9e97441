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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lgu/autodiff.hpp"
#include "lgu/geometry.hpp"
#include "lgu/losses.hpp"
#include "lgu/model.hpp"

namespace lgu {

struct TrainConfig {
  ModelConfig model;
  SceneConfig scene;
  LossWeights loss;
  ad::AdamConfig adam{.lr = 1e-3};
  std::size_t corpus_size = 200;
  std::size_t eval_size = 16;
  std::size_t batch = 2;
  std::size_t steps = 2000;
  std::size_t checkpoint_every = 500;  // 0 disables
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;  // empty: no checkpoints or dumps

  void validate() const;
};

struct LossReport {
  std::size_t step = 0;
  double l_flow = 0;
  double l_self = 0;
  double total = 0;
  double epe = 0;
  double lr = 0;
  double wall_ms = 0;

  std::string to_json() const;
};

// Training scenes use split_seed(seed, i); held-out scenes a disjoint stream.
template <Real T>
std::vector<SceneSample<T>> make_corpus(const SceneConfig& cfg, std::uint64_t seed, std::size_t count, bool held_out);

template <Real T>
struct SampleLoss {
  ad::Var<T> l_flow, l_self, total;
  double epe = 0;
};

// Forward pass and losses for one scene. Without the Gaussian module the self-supervised
// term is dropped.
template <Real T>
SampleLoss<T> sample_loss(ad::Tape<T>& tape, ad::ParamStore<T>& store, const TrainConfig& cfg,
                          const SceneSample<T>& scene, ModelOutput<T>* out = nullptr);

// Mean final-iteration EPE over the scenes.
template <Real T>
double evaluate(ad::ParamStore<T>& store, const ModelConfig& cfg, const std::vector<SceneSample<T>>& scenes);

template <Real T>
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  // One optimizer step over a batch drawn deterministically from the corpus.
  LossReport step();
  std::size_t steps_done() const { return step_; }
  ad::ParamStore<T>& params() { return params_; }
  const TrainConfig& config() const { return cfg_; }
  const std::vector<SceneSample<T>>& corpus() const { return corpus_; }

 private:
  void dump_batch(const std::vector<std::size_t>& picks, const std::string& what) const;

  TrainConfig cfg_;
  ad::ParamStore<T> params_;
  ad::Adam<T> adam_;
  std::vector<SceneSample<T>> corpus_;
  std::size_t step_ = 0;
};

struct TrainSummary {
  double initial_epe = 0;
  double final_epe = 0;
  std::size_t steps = 0;
};

// Runs cfg.steps steps, reporting each one, checkpointing every cfg.checkpoint_every steps
// and at the end (when out_dir is set). EPE before and after is measured on the held-out split.
template <Real T>
TrainSummary train(const TrainConfig& cfg, const std::function<void(const LossReport&)>& report,
                   ad::ParamStore<T>* final_params = nullptr);

}  // namespace lgu
