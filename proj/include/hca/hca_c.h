#ifndef HCA_C_H
#define HCA_C_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define HCA_API __attribute__((visibility("default")))
#else
#define HCA_API
#endif

/* Status codes. Nonzero values match the core error taxonomy. */
typedef enum hca_status {
  HCA_OK = 0,
  HCA_INVALID_INPUT = 1,
  HCA_NOT_FOUND,
  HCA_MALFORMED_CONFIGURATION,
  HCA_NOT_REVERSIBLE,
  HCA_INNER_NOT_REVERSIBLE,
  HCA_SYMBOL_BUDGET_EXCEEDED,
  HCA_TRUNCATED_ORBIT,
  HCA_DIMENSION_GUARD,
  HCA_PROMISE_VIOLATED,
  HCA_NO_VALID_CODEWORD,
  HCA_PARAMS_VIOLATION,
  HCA_ORACLE_PROMISE_VIOLATED,
  HCA_INVALID_THRESHOLDS,
  HCA_PRECISION_VIOLATION,
  HCA_TOLERANCE_VIOLATION,
  HCA_GAP_VIOLATION,
  HCA_DEGENERATE_OBSERVABLE,
  HCA_OVERLAP_VIOLATION,
  HCA_INTERNAL
} hca_status;

typedef struct hca_machine hca_machine;
typedef struct hca_artifacts hca_artifacts;

HCA_API const char* hca_version(void);
HCA_API const char* hca_status_name(hca_status s);
/* 2 input or promise error, 3 resource guard, 4 internal; 0 for HCA_OK. */
HCA_API int hca_exit_class(hca_status s);

/* Last error on the calling thread. The message stays valid until the next call. */
HCA_API hca_status hca_last_status(void);
HCA_API const char* hca_last_message(void);

/* Fixture name or path to a machine JSON file; variant is "one-way" or "two-way". */
HCA_API hca_status hca_machine_load(const char* ref, const char* variant, hca_machine** out);
HCA_API void hca_machine_free(hca_machine* m);
/* Caller frees the returned string with hca_string_free. */
HCA_API hca_status hca_machine_json(const hca_machine* m, char** out);
HCA_API hca_status hca_machine_validate(const hca_machine* m, int* reversible, char** report);

/* Runs one verb described by a JSON config object. */
HCA_API hca_status hca_run(const char* config_json, hca_artifacts** out);
HCA_API size_t hca_artifacts_count(const hca_artifacts* a);
/* Borrowed pointers, valid until hca_artifacts_free. Index 0 is the main output. */
HCA_API const char* hca_artifacts_suffix(const hca_artifacts* a, size_t i);
HCA_API const char* hca_artifacts_text(const hca_artifacts* a, size_t i, size_t* len);
HCA_API void hca_artifacts_free(hca_artifacts* a);

/* Names of the verbs accepted by hca_run, newline separated. */
HCA_API const char* hca_verbs(void);

HCA_API void hca_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
