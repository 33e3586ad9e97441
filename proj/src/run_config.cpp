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

#include "lgu/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lgu/gaussian.hpp"

namespace lgu {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename N>
N parse_number(const std::string& key, const std::string& v) {
  N out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("config: bad value '" + v + "' for " + key);
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d)) {
    throw ConfigError("config: bad value '" + v + "' for " + key);
  }
  return d;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad value '" + v + "' for " + key + " (expected true or false)");
}

// Shortest text that parses back to the same double.
std::string fmt_real(double d) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, res.ptr);
}

struct Key {
  std::string name;
  std::string doc;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define LGU_KEY(NAME, DOC, EXPR, KIND)                                                                    \
  Key {                                                                                                   \
    NAME, DOC, [](RunConfig& c, const std::string& v) { EXPR = parse_##KIND(NAME, v); },                 \
        [](const RunConfig& c) { return to_text(EXPR); }                                                  \
  }

std::size_t parse_size(const std::string& key, const std::string& v) { return parse_number<std::size_t>(key, v); }
int parse_int(const std::string& key, const std::string& v) { return parse_number<int>(key, v); }
std::uint64_t parse_u64(const std::string& key, const std::string& v) { return parse_number<std::uint64_t>(key, v); }

std::string to_text(std::size_t v) { return std::to_string(v); }
std::string to_text(int v) { return std::to_string(v); }
std::string to_text(double v) { return fmt_real(v); }
std::string to_text(bool v) { return v ? "true" : "false"; }

const std::vector<Key>& keys() {
  static const std::vector<Key> k = [] {
    std::vector<Key> v;
    v.push_back(LGU_KEY("height", "grid height H (multiple of 8)", c.train.scene.height, size));
    v.push_back(LGU_KEY("width", "grid width W (multiple of 8)", c.train.scene.width, size));
    v.push_back({"channels", "feature channels C",
                 [](RunConfig& c, const std::string& s) {
                   c.train.scene.channels = c.train.model.channels = parse_size("channels", s);
                 },
                 [](const RunConfig& c) { return to_text(c.train.model.channels); }});
    v.push_back(LGU_KEY("hidden", "GRU hidden channels D_h", c.train.model.hidden, size));
    v.push_back(LGU_KEY("context", "context channels", c.train.model.context, size));
    v.push_back(LGU_KEY("corr_mid", "correlation encoder width", c.train.model.corr_mid, size));
    v.push_back(LGU_KEY("corr_out", "correlation encoder output", c.train.model.corr_out, size));
    v.push_back(LGU_KEY("flow_mid", "flow encoder width", c.train.model.flow_mid, size));
    v.push_back(LGU_KEY("flow_out", "flow encoder output", c.train.model.flow_out, size));
    v.push_back(LGU_KEY("head_mid", "flow head width", c.train.model.head_mid, size));
    v.push_back(LGU_KEY("radius", "lookup radius r", c.train.model.radius, int));
    v.push_back(LGU_KEY("alpha", "covariance scale alpha", c.train.model.gaussian.alpha, real));
    v.push_back(LGU_KEY("beta", "covariance floor beta", c.train.model.gaussian.beta, real));
    v.push_back(LGU_KEY("mask_scale", "Gaussian mask scale s", c.train.model.gaussian.mask_scale, real));
    v.push_back(LGU_KEY("offset_bound", "pre-gate offset bound tau_s", c.train.model.offset_bound, real));
    v.push_back(LGU_KEY("iterations", "refinement iterations", c.train.model.iterations, int));
    v.push_back(LGU_KEY("gamma", "per-iteration flow loss decay", c.train.loss.gamma, real));
    v.push_back(LGU_KEY("lambda_flow", "flow loss weight", c.train.loss.flow, real));
    v.push_back(LGU_KEY("lambda_self", "self-supervised loss weight", c.train.loss.self, real));
    v.push_back(LGU_KEY("lr", "Adam learning rate", c.train.adam.lr, real));
    v.push_back(LGU_KEY("clip_norm", "global gradient-norm clip (<= 0 disables)", c.train.adam.clip_norm, real));
    v.push_back(LGU_KEY("batch", "scenes per step", c.train.batch, size));
    v.push_back(LGU_KEY("steps", "training steps", c.train.steps, size));
    v.push_back(LGU_KEY("corpus_size", "training scenes", c.train.corpus_size, size));
    v.push_back(LGU_KEY("eval_size", "held-out scenes", c.train.eval_size, size));
    v.push_back(LGU_KEY("checkpoint_every", "steps between checkpoints (0 disables)", c.train.checkpoint_every, size));
    v.push_back(LGU_KEY("motion_min", "scene translation lower bound", c.train.scene.motion_min, real));
    v.push_back(LGU_KEY("motion_max", "scene translation upper bound", c.train.scene.motion_max, real));
    v.push_back(LGU_KEY("rotation_per_unit", "rotation per unit translation (rad)", c.train.scene.rotation_per_unit, real));
    v.push_back(LGU_KEY("ambiguous_fraction", "target share of ambiguous texture", c.train.scene.ambiguous_fraction, real));
    v.push_back(LGU_KEY("flow_bound", "max |flow| component in pixels", c.train.scene.flow_bound, real));
    v.push_back(LGU_KEY("use_lgu", "Gaussian mask and self-supervised loss", c.train.model.use_lgu, bool));
    v.push_back(LGU_KEY("use_deform", "learned tap offsets", c.train.model.use_deform, bool));
    v.push_back(LGU_KEY("use_kan", "KAN biases in the GRU", c.train.model.use_kan, bool));
    v.push_back({"corr_mode", "materialized or onthefly",
                 [](RunConfig& c, const std::string& s) {
                   if (s == "materialized") {
                     c.train.model.corr_mode = CorrMode::materialized;
                   } else if (s == "onthefly") {
                     c.train.model.corr_mode = CorrMode::onthefly;
                   } else {
                     throw ConfigError("config: corr_mode must be materialized or onthefly, got '" + s + "'");
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.train.model.corr_mode == CorrMode::materialized ? "materialized" : "onthefly");
                 }});
    v.push_back({"seed", "master seed",
                 [](RunConfig& c, const std::string& s) { c.train.seed = parse_u64("seed", s); },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    v.push_back({"dtype", "f32 or f64 (LGU_DTYPE overrides)",
                 [](RunConfig& c, const std::string& s) { c.dtype = parse_dtype(s); },
                 [](const RunConfig& c) { return std::string(dtype_name(c.dtype)); }});
    v.push_back(LGU_KEY("threads", "kernel worker threads", c.threads, int));
    v.push_back(LGU_KEY("deterministic", "bit-reproducible kernels", c.deterministic, bool));
    v.push_back({"out_dir", "output directory (empty: none)",
                 [](RunConfig& c, const std::string& s) { c.train.out_dir = s; },
                 [](const RunConfig& c) { return c.train.out_dir.string(); }});
    v.push_back({"bench_sizes", "comma-separated square grid sides",
                 [](RunConfig& c, const std::string& s) {
                   std::vector<std::size_t> sizes;
                   std::stringstream ss(s);
                   for (std::string item; std::getline(ss, item, ',');) {
                     sizes.push_back(parse_size("bench_sizes", trim(item)));
                   }
                   c.bench_sizes = std::move(sizes);
                 },
                 [](const RunConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.bench_sizes.size(); ++i) {
                     out += (i ? "," : "") + std::to_string(c.bench_sizes[i]);
                   }
                   return out;
                 }});
    v.push_back(LGU_KEY("bench_channels", "feature channels for bench", c.bench_channels, size));
    v.push_back(LGU_KEY("bench_repeat", "timed repetitions per path and size", c.bench_repeat, size));
    v.push_back(LGU_KEY("gradcheck_seeds", "random instances per gradient check", c.gradcheck_seeds, size));
    return v;
  }();
  return k;
}

#undef LGU_KEY

const Key& find_key(const std::string& name) {
  if (name == "r1") throw ConfigError("config: r1 is derived as round((H + W) / 16) and cannot be set");
  for (const auto& k : keys()) {
    if (k.name == name) return k;
  }
  throw ConfigError("config: unknown key '" + name + "'");
}

}  // namespace

DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::f32;
  if (s == "f64") return DType::f64;
  throw ConfigError("dtype must be f32 or f64, got '" + s + "'");
}

void RunConfig::set(const std::string& key, const std::string& value) { find_key(key).set(*this, trim(value)); }

std::string RunConfig::get(const std::string& key) const {
  if (key == "r1") return std::to_string(r1());
  return find_key(key).get(*this);
}

void RunConfig::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::set<std::string> seen;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      set(key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path.string());
}

void RunConfig::apply_env() {
  if (const char* d = std::getenv("LGU_DTYPE"); d != nullptr && *d != '\0') {
    try {
      dtype = parse_dtype(d);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("LGU_DTYPE: ") + e.what());
    }
  }
}

void RunConfig::validate() const {
  train.validate();
  if (train.scene.height % 8 != 0 || train.scene.width % 8 != 0) {
    throw ConfigError("height and width must be multiples of 8");
  }
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (bench_sizes.empty()) throw ConfigError("bench_sizes must not be empty");
  for (std::size_t s : bench_sizes) {
    if (s == 0 || s % 8 != 0) throw ConfigError("bench sizes must be positive multiples of 8");
  }
  if (bench_channels == 0 || bench_repeat == 0) throw ConfigError("bench_channels and bench_repeat must be positive");
  if (gradcheck_seeds == 0) throw ConfigError("gradcheck_seeds must be positive");
}

int RunConfig::r1() const { return truncation_radius(train.scene.height, train.scene.width); }

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : keys()) out.emplace_back(k.name, k.get(*this));
  return out;
}

std::string RunConfig::to_json() const {
  nlohmann::ordered_json j;
  for (const auto& [k, v] : entries()) j[k] = v;
  j["r1"] = std::to_string(r1());
  return j.dump();
}

std::vector<std::pair<std::string, std::string>> RunConfig::documentation() {
  const RunConfig defaults;
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : keys()) out.emplace_back(k.name, k.doc + " [default " + k.get(defaults) + "]");
  return out;
}

}  // namespace lgu
