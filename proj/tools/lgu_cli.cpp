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

// Command-line front end. Talks to the library only through the C interface.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lgu/lgu.h"

namespace {

constexpr int kExitConfig = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool deterministic = false;
  std::string out;
  std::vector<std::string> overrides;
  bool no_lgu = false, no_deform = false, no_kan = false;
};

void add_common(CLI::App* cmd, Common& c, bool ablations) {
  cmd->add_option("--config", c.config, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--threads", c.threads, "kernel worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--deterministic", c.deterministic, "bit-reproducible kernels");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--set", c.overrides, "override one key (key=value); repeatable");
  if (ablations) {
    cmd->add_flag("--no-lgu", c.no_lgu, "disable the Gaussian mask and self-supervised loss");
    cmd->add_flag("--no-deform", c.no_deform, "disable learned tap offsets");
    cmd->add_flag("--no-kan", c.no_kan, "disable KAN biases in the GRU");
  }
}

void print_line(const char* json, void*) {
  std::fputs(json, stdout);
  std::fputc('\n', stdout);
  std::fflush(stdout);
}

int report_failure(lgu_status s) {
  std::cerr << "lgu: " << lgu_status_name(s) << " error";
  if (*lgu_last_error()) std::cerr << ": " << lgu_last_error();
  std::cerr << "\n";
  switch (s) {
    case LGU_OK:
      return 0;
    case LGU_ERR_VERIFICATION:
    case LGU_ERR_CONFIG:
    case LGU_ERR_NUMERIC:
      return static_cast<int>(s);
    case LGU_ERR_INVALID_ARGUMENT:
      return kExitConfig;
    default:
      return 1;
  }
}

struct ConfigDeleter {
  void operator()(lgu_config* c) const { lgu_config_destroy(c); }
};
using ConfigPtr = std::unique_ptr<lgu_config, ConfigDeleter>;

// Defaults, then the file, then --set, then flags, then LGU_DTYPE.
lgu_status build_config(const Common& c, ConfigPtr& out) {
  lgu_config* raw = nullptr;
  lgu_status s = lgu_config_create(&raw);
  if (s != LGU_OK) return s;
  out.reset(raw);
  if (!c.config.empty() && (s = lgu_config_load(raw, c.config.c_str())) != LGU_OK) return s;
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "lgu: --set expects key=value, got '" << kv << "'\n";
      return LGU_ERR_CONFIG;
    }
    if ((s = lgu_config_set(raw, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str())) != LGU_OK) return s;
  }
  auto set = [&](const char* key, const std::string& v) {
    if (s == LGU_OK) s = lgu_config_set(raw, key, v.c_str());
  };
  if (c.seed) set("seed", std::to_string(*c.seed));
  if (c.threads) set("threads", std::to_string(*c.threads));
  if (c.deterministic) set("deterministic", "true");
  if (!c.out.empty()) set("out_dir", c.out);
  if (c.no_lgu) set("use_lgu", "false");
  if (c.no_deform) set("use_deform", "false");
  if (c.no_kan) set("use_kan", "false");
  if (s != LGU_OK) return s;
  if ((s = lgu_config_apply_env(raw)) != LGU_OK) return s;
  return lgu_config_validate(raw);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-uncertainty correlation and deformable lookup toolkit. Reports are JSON lines."};
  app.set_version_flag("--version", std::string(lgu_version()));
  app.require_subcommand(1);

  Common gradcheck_opts, bench_opts, train_opts, demo_opts, eval_opts, config_opts;
  std::uint64_t scene_seed = 0;
  std::string demo_checkpoint, eval_checkpoint;
  bool describe = false;

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op and the full pipeline");
  add_common(gradcheck, gradcheck_opts, false);
  auto* bench = app.add_subcommand("bench", "time materialized vs on-the-fly correlation over a resolution ladder");
  add_common(bench, bench_opts, false);
  auto* train = app.add_subcommand("train", "train on the synthetic corpus, streaming one loss report per step");
  add_common(train, train_opts, true);
  auto* demo = app.add_subcommand("demo", "dump per-stage tensors for one synthetic scene");
  add_common(demo, demo_opts, true);
  demo->add_option("--scene-seed", scene_seed, "scene to generate");
  demo->add_option("--checkpoint", demo_checkpoint, "checkpoint directory (default: untrained parameters)");
  auto* eval = app.add_subcommand("eval", "held-out EPE of a checkpoint, with optional ablations");
  add_common(eval, eval_opts, true);
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint directory")->required();
  auto* config = app.add_subcommand("config", "print the resolved configuration");
  add_common(config, config_opts, true);
  config->add_flag("--describe", describe, "list every key with its default instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  const Common& opts = gradcheck->parsed() ? gradcheck_opts
                       : bench->parsed()   ? bench_opts
                       : train->parsed()   ? train_opts
                       : demo->parsed()    ? demo_opts
                       : eval->parsed()    ? eval_opts
                                           : config_opts;
  if (config->parsed() && describe) {
    const lgu_status s = lgu_config_describe(print_line, nullptr);
    return s == LGU_OK ? 0 : report_failure(s);
  }

  ConfigPtr cfg;
  lgu_status s = build_config(opts, cfg);
  if (s != LGU_OK) return report_failure(s);

  if (gradcheck->parsed()) {
    s = lgu_run_gradcheck(cfg.get(), print_line, nullptr);
  } else if (bench->parsed()) {
    s = lgu_run_bench(cfg.get(), print_line, nullptr);
  } else if (train->parsed()) {
    s = lgu_run_train(cfg.get(), print_line, nullptr);
  } else if (demo->parsed()) {
    s = lgu_run_demo(cfg.get(), scene_seed, demo_checkpoint.c_str(), print_line, nullptr);
  } else if (eval->parsed()) {
    s = lgu_run_eval(cfg.get(), eval_checkpoint.c_str(), print_line, nullptr);
  } else {
    s = lgu_config_dump(cfg.get(), print_line, nullptr);
  }
  return s == LGU_OK ? 0 : report_failure(s);
}
