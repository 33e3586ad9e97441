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

#include "lgu/lgu.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "json.hpp"
#include "lgu/commands.hpp"
#include "lgu/error.hpp"
#include "lgu/run_config.hpp"

struct lgu_config {
  lgu::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;

lgu_status fail(lgu_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
lgu_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const lgu::ConfigError& e) {
    return fail(LGU_ERR_CONFIG, e.what());
  } catch (const lgu::NumericError& e) {
    return fail(LGU_ERR_NUMERIC, e.what());
  } catch (const lgu::ShapeError& e) {
    return fail(LGU_ERR_SHAPE, e.what());
  } catch (const lgu::ContractError& e) {
    return fail(LGU_ERR_CONTRACT, e.what());
  } catch (const lgu::IoError& e) {
    return fail(LGU_ERR_IO, e.what());
  } catch (const lgu::Error& e) {
    return fail(LGU_ERR_INTERNAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(LGU_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(LGU_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(LGU_ERR_INTERNAL, "unknown error");
  }
}

lgu::LineSink sink(lgu_report_fn report, void* user) {
  return [report, user](const std::string& line) {
    if (report) report(line.c_str(), user);
  };
}

lgu_status from_exit(int code) {
  switch (code) {
    case lgu::kExitOk:
      return LGU_OK;
    case lgu::kExitVerification:
      return fail(LGU_ERR_VERIFICATION, "verification failed");
    case lgu::kExitNumeric:
      return fail(LGU_ERR_NUMERIC, "non-finite value during the run");
    default:
      return fail(LGU_ERR_INTERNAL, "unexpected exit code " + std::to_string(code));
  }
}

#define LGU_REQUIRE(cond, what) \
  if (!(cond)) return fail(LGU_ERR_INVALID_ARGUMENT, what)

}  // namespace

extern "C" {

const char* lgu_version(void) { return "1.0.0"; }

const char* lgu_status_name(lgu_status status) {
  switch (status) {
    case LGU_OK: return "ok";
    case LGU_ERR_INTERNAL: return "internal";
    case LGU_ERR_VERIFICATION: return "verification";
    case LGU_ERR_CONFIG: return "config";
    case LGU_ERR_NUMERIC: return "numeric";
    case LGU_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case LGU_ERR_IO: return "io";
    case LGU_ERR_SHAPE: return "shape";
    case LGU_ERR_CONTRACT: return "contract";
    case LGU_ERR_BUFFER_TOO_SMALL: return "buffer_too_small";
  }
  return "unknown";
}

const char* lgu_last_error(void) { return g_last_error.c_str(); }

lgu_status lgu_config_create(lgu_config** out) {
  LGU_REQUIRE(out, "lgu_config_create: out is null");
  return guarded([&] {
    *out = new lgu_config();
    return LGU_OK;
  });
}

void lgu_config_destroy(lgu_config* cfg) { delete cfg; }

lgu_status lgu_config_load(lgu_config* cfg, const char* path) {
  LGU_REQUIRE(cfg && path, "lgu_config_load: null argument");
  return guarded([&] {
    cfg->cfg.merge_file(path);
    return LGU_OK;
  });
}

lgu_status lgu_config_set(lgu_config* cfg, const char* key, const char* value) {
  LGU_REQUIRE(cfg && key && value, "lgu_config_set: null argument");
  return guarded([&] {
    cfg->cfg.set(key, value);
    return LGU_OK;
  });
}

lgu_status lgu_config_get(const lgu_config* cfg, const char* key, char* buf, size_t size, size_t* needed) {
  LGU_REQUIRE(cfg && key, "lgu_config_get: null argument");
  LGU_REQUIRE(buf || size == 0, "lgu_config_get: null buffer with non-zero size");
  return guarded([&] {
    const std::string v = cfg->cfg.get(key);
    if (needed) *needed = v.size() + 1;
    if (size < v.size() + 1) return fail(LGU_ERR_BUFFER_TOO_SMALL, "lgu_config_get: buffer too small");
    std::memcpy(buf, v.c_str(), v.size() + 1);
    return LGU_OK;
  });
}

lgu_status lgu_config_apply_env(lgu_config* cfg) {
  LGU_REQUIRE(cfg, "lgu_config_apply_env: null config");
  return guarded([&] {
    cfg->cfg.apply_env();
    return LGU_OK;
  });
}

lgu_status lgu_config_validate(const lgu_config* cfg) {
  LGU_REQUIRE(cfg, "lgu_config_validate: null config");
  return guarded([&] {
    cfg->cfg.validate();
    return LGU_OK;
  });
}

lgu_status lgu_config_dump(const lgu_config* cfg, lgu_report_fn report, void* user) {
  LGU_REQUIRE(cfg && report, "lgu_config_dump: null argument");
  return guarded([&] {
    report(cfg->cfg.to_json().c_str(), user);
    return LGU_OK;
  });
}

lgu_status lgu_config_describe(lgu_report_fn report, void* user) {
  LGU_REQUIRE(report, "lgu_config_describe: null callback");
  return guarded([&] {
    for (const auto& [key, doc] : lgu::RunConfig::documentation()) {
      nlohmann::ordered_json j;
      j["key"] = key;
      j["doc"] = doc;
      report(j.dump().c_str(), user);
    }
    return LGU_OK;
  });
}

lgu_status lgu_run_gradcheck(const lgu_config* cfg, lgu_report_fn report, void* user) {
  LGU_REQUIRE(cfg, "lgu_run_gradcheck: null config");
  return guarded([&] { return from_exit(lgu::cmd_gradcheck(cfg->cfg, sink(report, user))); });
}

lgu_status lgu_run_bench(const lgu_config* cfg, lgu_report_fn report, void* user) {
  LGU_REQUIRE(cfg, "lgu_run_bench: null config");
  return guarded([&] { return from_exit(lgu::cmd_bench(cfg->cfg, sink(report, user))); });
}

lgu_status lgu_run_train(const lgu_config* cfg, lgu_report_fn report, void* user) {
  LGU_REQUIRE(cfg, "lgu_run_train: null config");
  return guarded([&] { return from_exit(lgu::cmd_train(cfg->cfg, sink(report, user))); });
}

lgu_status lgu_run_demo(const lgu_config* cfg, uint64_t scene_seed, const char* checkpoint, lgu_report_fn report,
                        void* user) {
  LGU_REQUIRE(cfg, "lgu_run_demo: null config");
  return guarded([&] {
    return from_exit(lgu::cmd_demo(cfg->cfg, scene_seed, checkpoint ? checkpoint : "", sink(report, user)));
  });
}

lgu_status lgu_run_eval(const lgu_config* cfg, const char* checkpoint, lgu_report_fn report, void* user) {
  LGU_REQUIRE(cfg, "lgu_run_eval: null config");
  return guarded([&] {
    return from_exit(lgu::cmd_eval(cfg->cfg, checkpoint ? checkpoint : "", sink(report, user)));
  });
}

}  // extern "C"
