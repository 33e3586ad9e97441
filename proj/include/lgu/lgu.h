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

#ifndef LGU_LGU_H_
#define LGU_LGU_H_

/* C interface to the lgu library. Every function returns an lgu_status; on failure
 * lgu_last_error() describes the cause for the calling thread. Reports are delivered as
 * one JSON document per callback invocation. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(LGU_BUILDING_LIBRARY)
#define LGU_API __declspec(dllexport)
#else
#define LGU_API __declspec(dllimport)
#endif
#else
#define LGU_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values 0, 2, 3 and 4 double as process exit codes. */
typedef enum lgu_status {
  LGU_OK = 0,
  LGU_ERR_INTERNAL = 1,
  LGU_ERR_VERIFICATION = 2,
  LGU_ERR_CONFIG = 3,
  LGU_ERR_NUMERIC = 4,
  LGU_ERR_INVALID_ARGUMENT = 5,
  LGU_ERR_IO = 6,
  LGU_ERR_SHAPE = 7,
  LGU_ERR_CONTRACT = 8,
  LGU_ERR_BUFFER_TOO_SMALL = 9
} lgu_status;

typedef struct lgu_config lgu_config;

typedef void (*lgu_report_fn)(const char* json, void* user);

LGU_API const char* lgu_version(void);
LGU_API const char* lgu_status_name(lgu_status status);
/* Message of the last failed call on this thread; empty after a success. */
LGU_API const char* lgu_last_error(void);

/* A configuration starts at the documented defaults. */
LGU_API lgu_status lgu_config_create(lgu_config** out);
LGU_API void lgu_config_destroy(lgu_config* cfg);
/* Merges a key = value file; unknown keys are an error. */
LGU_API lgu_status lgu_config_load(lgu_config* cfg, const char* path);
LGU_API lgu_status lgu_config_set(lgu_config* cfg, const char* key, const char* value);
/* Copies the value of key, NUL-terminated, into buf. *needed (if not NULL) receives the
 * required size including the terminator. "r1" reports the derived truncation radius. */
LGU_API lgu_status lgu_config_get(const lgu_config* cfg, const char* key, char* buf, size_t size, size_t* needed);
/* Applies LGU_DTYPE from the environment when it is set. */
LGU_API lgu_status lgu_config_apply_env(lgu_config* cfg);
LGU_API lgu_status lgu_config_validate(const lgu_config* cfg);
/* Delivers the full configuration as one JSON object. */
LGU_API lgu_status lgu_config_dump(const lgu_config* cfg, lgu_report_fn report, void* user);
/* Delivers {"key": ..., "doc": ...} for each key, in documentation order. */
LGU_API lgu_status lgu_config_describe(lgu_report_fn report, void* user);

/* Subcommands. report may be NULL. */
LGU_API lgu_status lgu_run_gradcheck(const lgu_config* cfg, lgu_report_fn report, void* user);
LGU_API lgu_status lgu_run_bench(const lgu_config* cfg, lgu_report_fn report, void* user);
LGU_API lgu_status lgu_run_train(const lgu_config* cfg, lgu_report_fn report, void* user);
/* checkpoint may be NULL or empty for untrained parameters. */
LGU_API lgu_status lgu_run_demo(const lgu_config* cfg, uint64_t scene_seed, const char* checkpoint,
                                lgu_report_fn report, void* user);
LGU_API lgu_status lgu_run_eval(const lgu_config* cfg, const char* checkpoint, lgu_report_fn report, void* user);

#ifdef __cplusplus
}
#endif

#endif /* LGU_LGU_H_ */
