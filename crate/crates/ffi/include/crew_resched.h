#ifndef CREW_RESCHED_H
#define CREW_RESCHED_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every exported function.
typedef enum CrStatus {
  CR_STATUS_OK = 0,
  CR_STATUS_NULL_POINTER = 1,
  CR_STATUS_INVALID_UTF8 = 2,
  CR_STATUS_PARSE = 3,
  CR_STATUS_INVALID_INPUT = 4,
  // The solver's starting schedule violates the rules.
  CR_STATUS_INFEASIBLE = 5,
  CR_STATUS_RESOURCE_LIMIT = 6,
  CR_STATUS_BUFFER_TOO_SMALL = 7,
  CR_STATUS_PANIC = 8,
} CrStatus;

// Opaque instance handle.
typedef struct CrInstance CrInstance;

// Opaque schedule handle.
typedef struct CrSchedule CrSchedule;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *cr_last_error(void);

// Library version as a static string.
const char *cr_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void cr_string_free(char *s);

// Parses an instance from its JSON text.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum CrStatus cr_instance_from_json(const char *json, struct CrInstance **out);

// Generates a synthetic instance from a size preset (`small`, `medium`,
// `large`) and a seed.
//
// # Safety
// `preset` must be a NUL-terminated string; `out` must be writable.
enum CrStatus cr_instance_generate(const char *preset, uint64_t seed, struct CrInstance **out);

// Renders an instance as JSON.
//
// # Safety
// `inst` must be a live handle; `out` must be writable.
enum CrStatus cr_instance_to_json(const struct CrInstance *inst, char **out);

// Number of drivers and tasks.
//
// # Safety
// `inst` must be a live handle; outputs may be null.
enum CrStatus cr_instance_size(const struct CrInstance *inst, size_t *n_drivers, size_t *n_tasks);

// # Safety
// `inst` must be null or a handle from this library, freed at most once.
void cr_instance_free(struct CrInstance *inst);

// Draws `n` absent operating drivers. Writes up to `cap` ids to `ids` and
// the number drawn to `written`; fails with `BufferTooSmall` when `cap < n`.
//
// # Safety
// `inst` must be a live handle; `ids` must hold `cap` values.
enum CrStatus cr_sample_absent(const struct CrInstance *inst,
                               size_t n,
                               uint64_t seed,
                               uint32_t *ids,
                               size_t cap,
                               size_t *written);

// Runs tabu search. `config_json` may be null for the defaults.
//
// # Safety
// `inst` must be a live handle, `absent` must hold `n_absent` ids,
// `config_json` null or NUL-terminated, `out` writable.
enum CrStatus cr_solve_tabu(const struct CrInstance *inst,
                            const uint32_t *absent,
                            size_t n_absent,
                            const char *config_json,
                            struct CrSchedule **out);

// Runs column generation over the full duty pool. A non-positive
// `time_limit_s` runs to convergence. `lp_bound` may be null.
//
// # Safety
// As for [`cr_solve_tabu`]; `lp_bound` null or writable.
enum CrStatus cr_solve_colgen(const struct CrInstance *inst,
                              const uint32_t *absent,
                              size_t n_absent,
                              double time_limit_s,
                              struct CrSchedule **out,
                              double *lp_bound);

// Parses a schedule from its JSON text.
//
// # Safety
// `json` must be NUL-terminated; `out` writable.
enum CrStatus cr_schedule_from_json(const char *json, struct CrSchedule **out);

// Renders a schedule as JSON.
//
// # Safety
// `s` must be a live handle; `out` writable.
enum CrStatus cr_schedule_to_json(const struct CrSchedule *s, char **out);

// Objective value and number of unassigned tasks. Outputs may be null.
//
// # Safety
// Handles must be live.
enum CrStatus cr_schedule_evaluate(const struct CrInstance *inst,
                                   const struct CrSchedule *s,
                                   double *total,
                                   size_t *unassigned);

// Counts rule violations of a schedule; zero means feasible.
//
// # Safety
// Handles must be live; `n_violations` writable.
enum CrStatus cr_schedule_validate(const struct CrInstance *inst,
                                   const struct CrSchedule *s,
                                   size_t *n_violations);

// # Safety
// `s` must be null or a handle from this library, freed at most once.
void cr_schedule_free(struct CrSchedule *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CREW_RESCHED_H */
