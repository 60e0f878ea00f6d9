#ifndef POLYCALM_H
#define POLYCALM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of a call. Values 0 to 4 coincide with the command-line exit codes.
 */
typedef enum PcStatus {
  PC_STATUS_OK = 0,
  PC_STATUS_MISMATCH = 1,
  PC_STATUS_MISSING_CERTIFICATE = 2,
  PC_STATUS_PRECONDITION = 3,
  PC_STATUS_PARSE = 4,
  PC_STATUS_NULL_ARGUMENT = 5,
  PC_STATUS_INTERNAL = 6,
} PcStatus;

/*
 A closed convex polyhedral cone.
 */
typedef struct PcCone PcCone;

/*
 A polyhedral set-valued map given by its graph.
 */
typedef struct PcMap PcMap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Version of the library as a static string.
 */
const char *pc_version(void);

/*
 Message of the last failed call on this thread; empty after a successful call.
 The pointer stays valid until the next call on the same thread.
 */
const char *pc_last_error(void);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and must not be used afterwards.
 */
void pc_string_free(char *s);

/*
 Builds a cone from a JSON object `{"dim", "ineq", "eq"}` or `{"dim", "rays", "lineality"}`
 with rational entries written as `"p/q"` strings.

 # Safety
 `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum PcStatus pc_cone_from_json(const char *json, struct PcCone **out);

/*
 Ambient dimension of the cone, 0 for null.

 # Safety
 `cone` must be null or a live handle.
 */
uintptr_t pc_cone_dim(const struct PcCone *cone);

/*
 Polar cone as a new handle.

 # Safety
 `cone` must be a live handle and `out` a valid pointer.
 */
enum PcStatus pc_cone_polar(const struct PcCone *cone, struct PcCone **out);

/*
 Exact membership of a point given as comma-separated rationals, e.g. `"1/2,-3"`.

 # Safety
 `cone` must be a live handle, `point` a nul-terminated string and `out` a valid pointer.
 */
enum PcStatus pc_cone_contains(const struct PcCone *cone, const char *point_text, bool *out);

/*
 Both representations of the cone as a JSON string, released with [`pc_string_free`].

 # Safety
 `cone` must be a live handle and `out` a valid pointer.
 */
enum PcStatus pc_cone_to_json(const struct PcCone *cone, char **out);

/*
 Releases a cone. Null is ignored.

 # Safety
 `cone` must come from this library and must not be used afterwards.
 */
void pc_cone_free(struct PcCone *cone);

/*
 Builds a polyhedral map from a JSON object `{"in_dim", "out_dim", "components"}` whose
 components are polyhedra in the graph space.

 # Safety
 `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum PcStatus pc_map_from_json(const char *json, struct PcMap **out);

/*
 Certified calmness constant at a domain point, written as a rational string `"p/q"`.

 # Safety
 `map` must be a live handle, `point` a nul-terminated string and `out` a valid pointer.
 */
enum PcStatus pc_map_calmness_bound(const struct PcMap *map, const char *point_text, char **out);

/*
 Releases a map. Null is ignored.

 # Safety
 `map` must come from this library and must not be used afterwards.
 */
void pc_map_free(struct PcMap *map);

/*
 Runs a command-line invocation given as a JSON array of arguments (without the program
 name) and returns the JSON report. `--out` is ignored; the report always comes back in
 `report`. The returned status is the command's exit code; `report` is set whenever the
 arguments parse.

 # Safety
 `args_json` must be a nul-terminated string; `report` must be a valid pointer.
 */
enum PcStatus pc_run(const char *args_json, char **report);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* POLYCALM_H */
