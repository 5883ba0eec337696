/* Copyright 2026 The collsight Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C API for the collsight core. All state lives behind opaque handles;
 * every call returns a status code and the per-thread message from
 * collsight_last_error() explains failures.
 */
#ifndef COLLSIGHT_COLLSIGHT_H_
#define COLLSIGHT_COLLSIGHT_H_

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum collsight_status {
  COLLSIGHT_OK = 0,
  COLLSIGHT_ERR_CONFIG = 2,      /* invalid configuration */
  COLLSIGHT_ERR_TRACE_PARSE = 3, /* malformed trace input */
  COLLSIGHT_ERR_RUNTIME = 4,     /* internal failure */
  COLLSIGHT_ERR_ARG = 5          /* null or invalid argument */
} collsight_status;

typedef struct collsight_scenario collsight_scenario;
typedef struct collsight_result collsight_result;

const char* collsight_version(void);

/* Message for the most recent failing call on this thread. */
const char* collsight_last_error(void);

/* Scenario configs. The returned handle must be freed. */
collsight_status collsight_scenario_load(const char* path,
                                         collsight_scenario** out);
collsight_status collsight_scenario_parse(const char* json_text,
                                          collsight_scenario** out);
collsight_status collsight_scenario_set_seed(collsight_scenario* scenario,
                                             uint64_t seed);
void collsight_scenario_free(collsight_scenario* scenario);

/* Runs. trace/report paths may be NULL to skip writing the file. The result
 * handle carries the text and JSON renderings and must be freed. */
collsight_status collsight_run_simulate(const collsight_scenario* scenario,
                                        const char* trace_out_path,
                                        collsight_result** out);
collsight_status collsight_run_e2e(const collsight_scenario* scenario,
                                   const char* report_out_path,
                                   collsight_result** out);
collsight_status collsight_run_analyze(const collsight_scenario* scenario,
                                       const char* trace_in_path,
                                       const char* report_out_path,
                                       collsight_result** out);

/* Accessors; the strings live as long as the result handle. */
const char* collsight_result_text(const collsight_result* result);
const char* collsight_result_summary_json(const collsight_result* result);
const char* collsight_result_reports_jsonl(const collsight_result* result);
uint64_t collsight_result_trigger_count(const collsight_result* result);
void collsight_result_free(collsight_result* result);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* COLLSIGHT_COLLSIGHT_H_ */
