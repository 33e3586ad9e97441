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

#include "lgu/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <utility>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "json.hpp"

#include "array_eval.hpp"
#include "lgu/ops.hpp"
#include "lgu/serialize.hpp"

namespace lgu::ad {


// ---- ParamStore ----------------------------------------------------------------------

template <Real T>
Tensor<T>& ParamStore<T>::add(const std::string& name, Tensor<T> init) {
  if (contains(name)) throw ContractError("duplicate parameter '" + name + "'");
  index_[name] = names_.size();
  names_.push_back(name);
  grads_.emplace_back(init.shape());
  values_.push_back(std::move(init));
  return values_.back();
}

template <Real T>
std::size_t ParamStore<T>::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

template <Real T>
Tensor<T>& ParamStore<T>::value(const std::string& name) {
  return values_[at(name)];
}
template <Real T>
const Tensor<T>& ParamStore<T>::value(const std::string& name) const {
  return values_[at(name)];
}
template <Real T>
Tensor<T>& ParamStore<T>::grad(const std::string& name) {
  return grads_[at(name)];
}
template <Real T>
const Tensor<T>& ParamStore<T>::grad(const std::string& name) const {
  return grads_[at(name)];
}

template <Real T>
std::size_t ParamStore<T>::numel() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.numel();
  return n;
}

template <Real T>
void ParamStore<T>::zero_grad() {
  for (auto& g : grads_) g.fill(T(0));
}

// ---- Tape ------------------------------------------------------------------------------

template <Real T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  nodes_.push_back(Node{std::move(value), std::nullopt, nullptr, false, nullptr, {}});
  return Var<T>(this, nodes_.size() - 1);
}

template <Real T>
Var<T> Tape<T>::input(Tensor<T> value) {
  nodes_.push_back(Node{std::move(value), std::nullopt, nullptr, true, nullptr, {}});
  return Var<T>(this, nodes_.size() - 1);
}

template <Real T>
Var<T> Tape<T>::param(ParamStore<T>& store, const std::string& name) {
  const auto key = std::make_pair(static_cast<const ParamStore<T>*>(&store), name);
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return Var<T>(this, it->second);
  nodes_.push_back(Node{store.value(name), std::nullopt, nullptr, true, &store, name});
  param_nodes_[key] = nodes_.size() - 1;
  return Var<T>(this, nodes_.size() - 1);
}

template <Real T>
Var<T> Tape<T>::record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn backward) {
  return record(std::move(value), std::vector<Var<T>>(inputs), std::move(backward));
}

template <Real T>
Var<T> Tape<T>::record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn backward) {
  check_finite(value, "tape op");
  bool rg = false;
  for (const auto& v : inputs) {
    if (v.tape() != this) throw ContractError("op mixes variables from different tapes");
    rg = rg || requires_grad(v.id());
  }
  nodes_.push_back(Node{std::move(value), std::nullopt, rg ? std::move(backward) : nullptr, rg, nullptr, {}});
  return Var<T>(this, nodes_.size() - 1);
}

template <Real T>
void Tape<T>::accumulate(std::size_t id, const Tensor<T>& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (g.numel() != n.value.numel()) {
    throw ShapeError("gradient shape " + shape_str(g.shape()) + " does not match value " + shape_str(n.value.shape()));
  }
  if (!n.grad) {
    n.grad = g.reshaped(n.value.shape());
    return;
  }
  T* dst = n.grad->ptr();
  const T* src = g.ptr();
  for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += src[i];
}

template <Real T>
void Tape<T>::accumulate(std::size_t id, Tensor<T>&& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad || g.numel() != n.value.numel()) {
    accumulate(id, static_cast<const Tensor<T>&>(g));
    return;
  }
  n.grad = std::move(g).reshaped(n.value.shape());
}

template <Real T>
Tensor<T>& Tape<T>::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad) n.grad = Tensor<T>(n.value.shape());
  return *n.grad;
}

template <Real T>
void Tape<T>::backward(const Var<T>& loss) {
  if (loss.tape() != this) throw ContractError("loss belongs to another tape");
  if (value(loss.id()).numel() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_str(value(loss.id()).shape()));
  }
  for (auto& n : nodes_) n.grad.reset();
  if (!requires_grad(loss.id())) return;
  nodes_[loss.id()].grad = Tensor<T>(value(loss.id()).shape(), T(1));
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad && n.backward) n.backward(*this, *n.grad, n.value);
  }
  for (auto& n : nodes_) {
    if (n.store != nullptr && n.grad) {
      Tensor<T>& dst = n.store->grad(n.param_name);
      for (std::size_t i = 0; i < dst.numel(); ++i) dst[i] += (*n.grad)[i];
    }
  }
}

template <Real T>
const Tensor<T>* Tape<T>::grad_of(const Var<T>& v) const {
  const Node& n = nodes_[v.id()];
  return n.grad ? &*n.grad : nullptr;
}

// ---- ops -------------------------------------------------------------------------------

namespace {

using lgu::detail::CArrayMap;
using lgu::detail::chunked;

template <Real T, typename Fwd, typename Deriv>
Var<T> unary(const Var<T>& a, Fwd fwd, Deriv deriv) {
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = fwd(x[i]);
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia, deriv](Tape<T>& t, const Tensor<T>& g, const Tensor<T>& out) {
    const Tensor<T>& xin = t.value(ia);
    Tensor<T> gx(xin.shape());
    for (std::size_t i = 0; i < xin.numel(); ++i) gx[i] = g[i] * deriv(xin[i], out[i]);
    t.accumulate(ia, std::move(gx));
  });
}

template <Real T, typename Fwd, typename Deriv>
Var<T> unary_array(const Var<T>& a, Fwd fwd, Deriv deriv) {
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape());
  chunked<T>(y.ptr(), y.numel(), fwd, x.ptr());
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia, deriv](Tape<T>& t, const Tensor<T>& g, const Tensor<T>& out) {
    const Tensor<T>& xin = t.value(ia);
    Tensor<T> gx(xin.shape());
    chunked<T>(
        gx.ptr(), gx.numel(),
        [&](const CArrayMap<T>& gc, const CArrayMap<T>& xc, const CArrayMap<T>& yc) { return gc * deriv(xc, yc); },
        g.ptr(), xin.ptr(), out.ptr());
    t.accumulate(ia, std::move(gx));
  });
}


}  // namespace

template <Real T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor<T> y = a.value();
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] += b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(y), {a, b}, [ia, ib](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

template <Real T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor<T> y = a.value();
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] -= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(y), {a, b}, [ia, ib](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    t.accumulate(ia, g);
    if (t.requires_grad(ib)) {
      Tensor<T> ng = g;
      for (auto& v : ng.data()) v = -v;
      t.accumulate(ib, std::move(ng));
    }
  });
}

template <Real T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor<T> y = a.value();
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(y), {a, b}, [ia, ib](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    if (t.requires_grad(ia)) {
      Tensor<T> ga = g;
      for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] *= t.value(ib)[i];
      t.accumulate(ia, std::move(ga));
    }
    if (t.requires_grad(ib)) {
      Tensor<T> gb = g;
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] *= t.value(ia)[i];
      t.accumulate(ib, std::move(gb));
    }
  });
}

template <Real T>
Var<T> scale(const Var<T>& a, T c) {
  return unary<T>(a, [c](T x) { return c * x; }, [c](T, T) { return c; });
}

template <Real T>
Var<T> add_scalar(const Var<T>& a, T c) {
  return unary<T>(a, [c](T x) { return x + c; }, [](T, T) { return T(1); });
}

template <Real T>
Var<T> sigmoid(const Var<T>& a) {
  return unary_array<T>(
      a, [](const CArrayMap<T>& x) { return x.logistic(); },
      [](const CArrayMap<T>&, const CArrayMap<T>& y) { return y * (T(1) - y); });
}

template <Real T>
Var<T> tanh(const Var<T>& a) {
  return unary_array<T>(
      a, [](const CArrayMap<T>& x) { return x.tanh(); },
      [](const CArrayMap<T>&, const CArrayMap<T>& y) { return T(1) - y.square(); });
}

template <Real T>
Var<T> gelu(const Var<T>& a) {
  static constexpr T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  static constexpr T inv_sqrt2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
  return unary_array<T>(
      a, [](const CArrayMap<T>& x) { return T(0.5) * x * (T(1) + (x * inv_sqrt2).erf()); },
      [](const CArrayMap<T>& x, const CArrayMap<T>&) {
        return T(0.5) * (T(1) + (x * inv_sqrt2).erf()) + x * inv_sqrt2pi * (T(-0.5) * x.square()).exp();
      });
}

template <Real T>
Var<T> exp(const Var<T>& a) {
  return unary_array<T>(
      a, [](const CArrayMap<T>& x) { return x.exp(); }, [](const CArrayMap<T>&, const CArrayMap<T>& y) { return y; });
}

template <Real T>
Var<T> log(const Var<T>& a) {
  for (T v : a.value().data()) {
    if (!(v > 0)) throw ContractError("log of non-positive value");
  }
  return unary<T>(a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <Real T>
Var<T> square(const Var<T>& a) {
  return unary<T>(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <Real T>
Var<T> abs(const Var<T>& a) {
  return unary<T>(
      a, [](T x) { return std::abs(x); }, [](T x, T) { return x > 0 ? T(1) : (x < 0 ? T(-1) : T(0)); });
}

template <Real T>
Var<T> sum(const Var<T>& a) {
  T s = 0;
  for (T v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return a.tape()->record(Tensor<T>::scalar(s), {a}, [ia](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    t.accumulate(ia, Tensor<T>(t.value(ia).shape(), g[0]));
  });
}

template <Real T>
Var<T> mean(const Var<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.value().numel()));
}

template <Real T>
Var<T> reshape(const Var<T>& a, Shape s) {
  Tensor<T> y = a.value().reshaped(std::move(s));
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a},
                          [ia](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) { t.accumulate(ia, g); });
}

template <Real T>
Var<T> detach(const Var<T>& a) {
  return a.tape()->constant(a.value());
}

template <Real T>
Var<T> concat(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  Shape s = parts[0].shape();
  std::size_t total = 0;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    Shape ps = p.shape();
    if (ps.size() != s.size() || !std::equal(ps.begin() + 1, ps.end(), s.begin() + 1)) {
      throw ShapeError("concat: trailing dims differ " + shape_str(ps) + " vs " + shape_str(s));
    }
    total += ps[0];
    sizes.push_back(p.value().numel());
  }
  s[0] = total;
  Tensor<T> y(s);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), y.ptr() + off);
    off += p.value().numel();
  }
  std::vector<std::size_t> ids;
  for (const auto& p : parts) ids.push_back(p.id());
  return parts[0].tape()->record(std::move(y), parts,
                                 [ids, sizes](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
                                   std::size_t o = 0;
                                   for (std::size_t k = 0; k < ids.size(); ++k) {
                                     if (t.requires_grad(ids[k])) {
                                       Tensor<T> gk(t.value(ids[k]).shape());
                                       std::copy(g.ptr() + o, g.ptr() + o + sizes[k], gk.ptr());
                                       t.accumulate(ids[k], std::move(gk));
                                     }
                                     o += sizes[k];
                                   }
                                 });
}

template <Real T>
Var<T> slice(const Var<T>& a, std::size_t begin, std::size_t end) {
  const Shape& as = a.shape();
  if (as.empty() || begin >= end || end > as[0]) throw ShapeError("slice: bad range on " + shape_str(as));
  const std::size_t inner = a.value().numel() / as[0];
  Shape s = as;
  s[0] = end - begin;
  Tensor<T> y(s);
  std::copy(a.value().ptr() + begin * inner, a.value().ptr() + end * inner, y.ptr());
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia, begin, inner](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    Tensor<T>& buf = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) buf[begin * inner + i] += g[i];
  });
}

template <Real T>
Var<T> mul_channels(const Var<T>& x, const Var<T>& g) {
  const Shape& xs = x.shape();
  if (xs.size() != 3 || g.shape() != Shape{xs[1], xs[2]}) {
    throw ShapeError("mul_channels: need x [C,H,W] and g [H,W], got " + shape_str(xs) + ", " + shape_str(g.shape()));
  }
  const std::size_t c = xs[0], hw = xs[1] * xs[2];
  Tensor<T> y = x.value();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < hw; ++p) y[ch * hw + p] *= g.value()[p];
  }
  const std::size_t ix = x.id(), ig = g.id();
  return x.tape()->record(std::move(y), {x, g}, [ix, ig, c, hw](Tape<T>& t, const Tensor<T>& go, const Tensor<T>&) {
    const Tensor<T>& xv = t.value(ix);
    const Tensor<T>& gv = t.value(ig);
    if (t.requires_grad(ix)) {
      Tensor<T> gx(xv.shape());
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t p = 0; p < hw; ++p) gx[ch * hw + p] = go[ch * hw + p] * gv[p];
      }
      t.accumulate(ix, std::move(gx));
    }
    if (t.requires_grad(ig)) {
      Tensor<T> gg(gv.shape());
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t p = 0; p < hw; ++p) gg[p] += go[ch * hw + p] * xv[ch * hw + p];
      }
      t.accumulate(ig, std::move(gg));
    }
  });
}

template <Real T>
Var<T> conv2d(const Var<T>& x, const Var<T>& kernel, const Var<T>* bias) {
  Tensor<T> y = lgu::conv2d(x.value(), kernel.value(), bias ? &bias->value() : nullptr);
  const std::size_t ix = x.id(), ik = kernel.id();
  const bool has_bias = bias != nullptr;
  const std::size_t ib = has_bias ? bias->id() : 0;
  std::vector<Var<T>> inputs{x, kernel};
  if (has_bias) inputs.push_back(*bias);
  return x.tape()->record(std::move(y), inputs,
                          [ix, ik, ib, has_bias](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
                            auto grads = lgu::conv2d_backward(t.value(ix), t.value(ik), g, t.requires_grad(ix));
                            if (t.requires_grad(ix)) t.accumulate(ix, std::move(grads.src));
                            t.accumulate(ik, std::move(grads.kernel));
                            if (has_bias) t.accumulate(ib, std::move(grads.bias));
                          });
}

template <Real T>
Var<T> avg_pool2d(const Var<T>& x, int k) {
  Tensor<T> y = lgu::avg_pool2d(x.value(), k);
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(y), {x}, [ix, k](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    t.accumulate(ix, lgu::avg_pool2d_backward(g, t.value(ix).shape(), k));
  });
}

template <Real T>
Var<T> upsample2x(const Var<T>& x) {
  Tensor<T> y = lgu::upsample2x(x.value());
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(y), {x}, [ix](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    t.accumulate(ix, lgu::upsample2x_backward(g, t.value(ix).shape()));
  });
}

// ---- Adam ------------------------------------------------------------------------------

template <Real T>
double global_grad_norm(const ParamStore<T>& params) {
  double s = 0;
  for (const auto& name : params.names()) {
    for (T g : params.grad(name).data()) s += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(s);
}

template <Real T>
double Adam<T>::step(ParamStore<T>& params) {
  const double norm = global_grad_norm(params);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  const double clip = (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& name : params.names()) {
    Tensor<T>& p = params.value(name);
    const Tensor<T>& g = params.grad(name);
    auto it = moments_.find(name);
    if (it == moments_.end()) it = moments_.emplace(name, std::make_pair(Tensor<T>(p.shape()), Tensor<T>(p.shape()))).first;
    Tensor<T>& m = it->second.first;
    Tensor<T>& v = it->second.second;
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double gi = static_cast<double>(g[i]) * clip;
      const double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * gi;
      const double vi = cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = cfg_.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps);
      p[i] = static_cast<T>(static_cast<double>(p[i]) - update);
    }
  }
  params.set_step(params.step() + 1);
  return norm;
}

// ---- checkpoints -----------------------------------------------------------------------

template <Real T>
void save_checkpoint(const ParamStore<T>& params, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "lgu-checkpoint";
  manifest["version"] = 1;
  manifest["dtype"] = std::string(dtype_name(dtype_of<T>()));
  manifest["seed"] = params.seed();
  manifest["step"] = params.step();
  manifest["params"] = nlohmann::json::array();
  for (const auto& name : params.names()) {
    const std::string file = name + ".lgut";
    save_tensor(params.value(name), dir / file);
    manifest["params"].push_back({{"name", name}, {"file", file}});
  }
  std::ofstream f(dir / "manifest.json");
  if (!f) throw IoError("cannot write manifest in " + dir.string());
  f << manifest.dump(2) << '\n';
}

template <Real T>
void load_checkpoint(ParamStore<T>& params, const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw IoError("missing manifest.json in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest.json: ") + e.what(), 0);
  }
  for (const auto& entry : manifest.at("params")) {
    const auto name = entry.at("name").get<std::string>();
    if (!params.contains(name)) throw ContractError("checkpoint parameter '" + name + "' not in model");
    AnyTensor any = load_tensor(dir / entry.at("file").get<std::string>());
    Tensor<T> t = std::visit([](auto& v) { return v.template cast<T>(); }, any);
    if (t.shape() != params.value(name).shape()) {
      throw ShapeError("checkpoint parameter '" + name + "' has shape " + shape_str(t.shape()));
    }
    params.value(name) = std::move(t);
  }
  params.set_seed(manifest.at("seed").get<std::uint64_t>());
  params.set_step(manifest.at("step").get<std::uint64_t>());
}

// ---- finite differences ----------------------------------------------------------------

namespace {

std::vector<std::size_t> pick_coords(std::size_t n, std::size_t max_coords, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (max_coords == 0 || max_coords >= n) return idx;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(max_coords);
  std::sort(idx.begin(), idx.end());
  return idx;
}

template <Real T>
double eval_checked(const std::function<T()>& f) {
  const T v = f();
  if (!std::isfinite(v)) throw NumericError("finite-difference oracle: non-finite function value");
  return static_cast<double>(v);
}

template <Real T>
FdReport compare(const Tensor<T>& analytic, const std::vector<std::size_t>& coords,
                 const std::function<double(std::size_t)>& numeric) {
  FdReport r;
  for (std::size_t i : coords) {
    const double a = static_cast<double>(analytic[i]);
    const double n = numeric(i);
    const double err = std::abs(a - n) / std::max(1.0, std::abs(a));
    if (r.checked == 0 || err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst_index = i;
      r.analytic = a;
      r.numeric = n;
    }
    ++r.checked;
  }
  return r;
}

}  // namespace

template <Real T>
FdReport fd_check(const ScalarFn<T>& f, const Tensor<T>& x, T h, std::size_t max_coords, std::uint64_t seed) {
  Tensor<T> analytic(x.shape());
  {
    Tape<T> tape;
    Var<T> xv = tape.input(x);
    Var<T> loss = f(tape, xv);
    tape.backward(loss);
    if (const Tensor<T>* g = tape.grad_of(xv)) analytic = *g;
  }
  auto value_at = [&](const Tensor<T>& xp) {
    return eval_checked<T>([&] {
      Tape<T> tape;
      Var<T> xv = tape.constant(xp);
      return f(tape, xv).value().item();
    });
  };
  const auto coords = pick_coords(x.numel(), max_coords, seed);
  return compare<T>(analytic, coords, [&](std::size_t i) {
    Tensor<T> xp = x;
    xp[i] = x[i] + h;
    const double fp = value_at(xp);
    xp[i] = x[i] - h;
    const double fm = value_at(xp);
    return (fp - fm) / (2.0 * static_cast<double>(h));
  });
}

template <Real T>
FdReport fd_check_param(ParamStore<T>& params, const std::string& name, const std::function<Var<T>(Tape<T>&)>& loss,
                        T h, std::size_t max_coords, std::uint64_t seed) {
  params.zero_grad();
  {
    Tape<T> tape;
    Var<T> l = loss(tape);
    tape.backward(l);
  }
  const Tensor<T> analytic = params.grad(name);
  params.zero_grad();
  Tensor<T>& p = params.value(name);
  const Tensor<T> saved = p;
  auto value_now = [&] {
    return eval_checked<T>([&] {
      Tape<T> tape;
      return loss(tape).value().item();
    });
  };
  const auto coords = pick_coords(p.numel(), max_coords, seed);
  FdReport r = compare<T>(analytic, coords, [&](std::size_t i) {
    p[i] = saved[i] + h;
    const double fp = value_now();
    p[i] = saved[i] - h;
    const double fm = value_now();
    p[i] = saved[i];
    return (fp - fm) / (2.0 * static_cast<double>(h));
  });
  p = saved;
  return r;
}

#define LGU_INSTANTIATE_AD(T)                                                                                   \
  template class ParamStore<T>;                                                                                \
  template class Tape<T>;                                                                                      \
  template class Adam<T>;                                                                                      \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                           \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                                           \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                           \
  template Var<T> scale(const Var<T>&, T);                                                                     \
  template Var<T> add_scalar(const Var<T>&, T);                                                                \
  template Var<T> sigmoid(const Var<T>&);                                                                      \
  template Var<T> tanh(const Var<T>&);                                                                         \
  template Var<T> gelu(const Var<T>&);                                                                         \
  template Var<T> exp(const Var<T>&);                                                                          \
  template Var<T> log(const Var<T>&);                                                                          \
  template Var<T> square(const Var<T>&);                                                                       \
  template Var<T> abs(const Var<T>&);                                                                          \
  template Var<T> sum(const Var<T>&);                                                                          \
  template Var<T> mean(const Var<T>&);                                                                         \
  template Var<T> reshape(const Var<T>&, Shape);                                                               \
  template Var<T> detach(const Var<T>&);                                                                       \
  template Var<T> concat(const std::vector<Var<T>>&);                                                          \
  template Var<T> slice(const Var<T>&, std::size_t, std::size_t);                                              \
  template Var<T> mul_channels(const Var<T>&, const Var<T>&);                                                  \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>*);                                         \
  template Var<T> avg_pool2d(const Var<T>&, int);                                                              \
  template Var<T> upsample2x(const Var<T>&);                                                                   \
  template double global_grad_norm(const ParamStore<T>&);                                                      \
  template void save_checkpoint(const ParamStore<T>&, const std::filesystem::path&);                           \
  template void load_checkpoint(ParamStore<T>&, const std::filesystem::path&);                                 \
  template FdReport fd_check(const ScalarFn<T>&, const Tensor<T>&, T, std::size_t, std::uint64_t);             \
  template FdReport fd_check_param(ParamStore<T>&, const std::string&, const std::function<Var<T>(Tape<T>&)>&, \
                                   T, std::size_t, std::uint64_t);

LGU_INSTANTIATE_AD(float)
LGU_INSTANTIATE_AD(double)

}  // namespace lgu::ad
