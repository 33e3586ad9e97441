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
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lgu/tensor.hpp"

namespace lgu::ad {

template <Real T>
class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
template <Real T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  std::size_t id() const { return id_; }
  Tape<T>* tape() const { return tape_; }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Named parameters with one gradient buffer each, in insertion order.
template <Real T>
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  Tensor<T>& add(const std::string& name, Tensor<T> init);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor<T>& value(const std::string& name);
  const Tensor<T>& value(const std::string& name) const;
  Tensor<T>& grad(const std::string& name);
  const Tensor<T>& grad(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::size_t numel() const;
  void zero_grad();

  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t s) { seed_ = s; }
  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }

 private:
  std::size_t at(const std::string& name) const;

  std::uint64_t seed_;
  std::uint64_t step_ = 0;
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
  std::vector<Tensor<T>> grads_;
  std::map<std::string, std::size_t> index_;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so reverse id
// order is a valid reverse topological order.
template <Real T>
class Tape {
 public:
  // Receives the tape, the node's output gradient and its forward value;
  // accumulates into the node's inputs.
  using BackwardFn = std::function<void(Tape&, const Tensor<T>& grad, const Tensor<T>& out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value);
  // Differentiable input that is not a parameter; its gradient is read with grad_of().
  Var<T> input(Tensor<T> value);
  // Same name returns the same node for the lifetime of the tape.
  Var<T> param(ParamStore<T>& store, const std::string& name);

  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn backward);
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn backward);

  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Adds g into the gradient of node `id`; a no-op for nodes that need no gradient.
  void accumulate(std::size_t id, const Tensor<T>& g);
  void accumulate(std::size_t id, Tensor<T>&& g);
  // Mutable gradient buffer (zero-initialized on first access).
  Tensor<T>& grad_buffer(std::size_t id);

  // Runs reverse accumulation from a scalar node and adds parameter gradients
  // into their stores. Re-running on the same tape reproduces the same node gradients.
  void backward(const Var<T>& loss);

  // Gradient of the last backward() with respect to v, or nullptr if v was not reached.
  const Tensor<T>* grad_of(const Var<T>& v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    std::optional<Tensor<T>> grad;
    BackwardFn backward;
    bool requires_grad = false;
    ParamStore<T>* store = nullptr;
    std::string param_name;
  };

  std::deque<Node> nodes_;  // stable references across appends
  std::map<std::pair<const ParamStore<T>*, std::string>, std::size_t> param_nodes_;
};

template <Real T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <Real T>
bool Var<T>::requires_grad() const {
  return tape_->requires_grad(id_);
}

// ---- elementwise / structural ops -------------------------------------------------

template <Real T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <Real T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <Real T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <Real T> Var<T> scale(const Var<T>& a, T c);
template <Real T> Var<T> add_scalar(const Var<T>& a, T c);
template <Real T> Var<T> sigmoid(const Var<T>& a);
template <Real T> Var<T> tanh(const Var<T>& a);
// Exact (erf-based) GELU.
template <Real T> Var<T> gelu(const Var<T>& a);
template <Real T> Var<T> exp(const Var<T>& a);
template <Real T> Var<T> log(const Var<T>& a);
template <Real T> Var<T> square(const Var<T>& a);
template <Real T> Var<T> abs(const Var<T>& a);
template <Real T> Var<T> sum(const Var<T>& a);
template <Real T> Var<T> mean(const Var<T>& a);
template <Real T> Var<T> reshape(const Var<T>& a, Shape s);
// Stops gradient flow; the result is a constant copy.
template <Real T> Var<T> detach(const Var<T>& a);

// Concatenate / slice along dim 0.
template <Real T> Var<T> concat(const std::vector<Var<T>>& parts);
template <Real T> Var<T> slice(const Var<T>& a, std::size_t begin, std::size_t end);

// x [C, H, W] times g [H, W] broadcast over channels.
template <Real T> Var<T> mul_channels(const Var<T>& x, const Var<T>& g);

// ---- spatial ops ---------------------------------------------------------------------

template <Real T> Var<T> conv2d(const Var<T>& x, const Var<T>& kernel, const Var<T>* bias);
template <Real T> Var<T> avg_pool2d(const Var<T>& x, int k);
template <Real T> Var<T> upsample2x(const Var<T>& x);

// ---- optimisation --------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // global-norm clip; <= 0 disables
};

template <Real T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
  // Clips, then applies one bias-corrected update. Returns the pre-clip global norm.
  double step(ParamStore<T>& params);
  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::map<std::string, std::pair<Tensor<T>, Tensor<T>>> moments_;
};

template <Real T>
double global_grad_norm(const ParamStore<T>& params);

// ---- checkpoints ---------------------------------------------------------------------

// Writes one tensor file per parameter plus manifest.json (names, files, seed, step).
template <Real T>
void save_checkpoint(const ParamStore<T>& params, const std::filesystem::path& dir);

// Loads values into an existing store; every stored parameter must exist with the same shape.
template <Real T>
void load_checkpoint(ParamStore<T>& params, const std::filesystem::path& dir);

// ---- finite-difference oracle ----------------------------------------------------------

template <Real T>
using ScalarFn = std::function<Var<T>(Tape<T>&, const Var<T>&)>;

struct FdReport {
  double max_rel_error = 0;
  std::size_t worst_index = 0;
  double analytic = 0;
  double numeric = 0;
  std::size_t checked = 0;
};

// Max over checked coordinates of |analytic - central difference| / max(1, |analytic|).
// max_coords = 0 checks every coordinate; otherwise a seeded random subset.
template <Real T>
FdReport fd_check(const ScalarFn<T>& f, const Tensor<T>& x, T h = T(1e-6), std::size_t max_coords = 0,
                  std::uint64_t seed = 0);

// Same oracle over a named parameter; `loss` builds the scalar from the current store.
template <Real T>
FdReport fd_check_param(ParamStore<T>& params, const std::string& name,
                        const std::function<Var<T>(Tape<T>&)>& loss, T h = T(1e-6), std::size_t max_coords = 0,
                        std::uint64_t seed = 0);

}  // namespace lgu::ad
