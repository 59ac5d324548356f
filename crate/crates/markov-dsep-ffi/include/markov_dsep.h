/* C interface for the markov-dsep library. */

#ifndef MARKOV_DSEP_H
#define MARKOV_DSEP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Which d-separation decider to run.
 */
typedef enum MdDsepMethod {
  /**
   * The connectivity check on the conditioned diagram.
   */
  MD_DSEP_METHOD_CATEGORICAL = 0,
  /**
   * The rewrite-based check that cuts the conditioned wires.
   */
  MD_DSEP_METHOD_CUTTING = 1,
  /**
   * Classical Bayes-ball on the underlying DAG; refuses models that are
   * open, partially observed, or built from multi-output mechanisms.
   */
  MD_DSEP_METHOD_CLASSICAL = 2,
} MdDsepMethod;

/**
 * Status codes returned by every fallible function in this interface.
 */
typedef enum MdStatus {
  /**
   * The call succeeded.
   */
  MD_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  MD_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  MD_STATUS_INVALID_UTF8 = 2,
  /**
   * The input was not well-formed JSON for the model schema.
   */
  MD_STATUS_PARSE = 3,
  /**
   * The input parsed but does not describe a valid causal model.
   */
  MD_STATUS_INVALID_MODEL = 4,
  /**
   * A query referred to unknown wires or overlapping sets.
   */
  MD_STATUS_BAD_QUERY = 5,
  /**
   * The requested method does not apply to this model.
   */
  MD_STATUS_METHOD_INAPPLICABLE = 6,
  /**
   * An internal invariant failed; this is a bug worth reporting.
   */
  MD_STATUS_INTERNAL = 7,
} MdStatus;

/**
 * An opaque handle to a loaded causal model (plus its interpretation, when
 * the file carried one).
 */
typedef struct MdModel MdModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The library version as a static NUL-terminated string. Do not free it.
 */
const char *md_version(void);

/**
 * A copy of the message recorded by the most recent failure on this
 * thread, or NULL when there is none. Free the copy with
 * [`md_string_free`].
 */
char *md_last_error_message(void);

/**
 * Release a string previously returned through an out-parameter. NULL is
 * accepted and ignored.
 *
 * # Safety
 * `s` must be a pointer obtained from this library and not yet freed.
 */
void md_string_free(char *s);

/**
 * Parse a model file (the same JSON schema the CLI reads) and store a
 * handle to the resulting causal model in `*out`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid location to
 * write a pointer to.
 */
enum MdStatus md_model_from_json(const char *json, struct MdModel **out);

/**
 * Release a model handle. NULL is accepted and ignored.
 *
 * # Safety
 * `m` must be a handle obtained from this library and not yet freed.
 */
void md_model_free(struct MdModel *m);

/**
 * Number of wires in the model, or 0 for a NULL handle.
 *
 * # Safety
 * `m` must be NULL or a live handle from this library.
 */
size_t md_model_wire_count(const struct MdModel *m);

/**
 * Number of boxes in the model, or 0 for a NULL handle.
 *
 * # Safety
 * `m` must be NULL or a live handle from this library.
 */
size_t md_model_box_count(const struct MdModel *m);

/**
 * Number of global input wires, or 0 for a NULL handle.
 *
 * # Safety
 * `m` must be NULL or a live handle from this library.
 */
size_t md_model_input_count(const struct MdModel *m);

/**
 * Number of observed (output) wires, or 0 for a NULL handle.
 *
 * # Safety
 * `m` must be NULL or a live handle from this library.
 */
size_t md_model_output_count(const struct MdModel *m);

/**
 * Whether every wire of the model is observed. False for a NULL handle.
 *
 * # Safety
 * `m` must be NULL or a live handle from this library.
 */
bool md_model_is_pure_bloom(const struct MdModel *m);

/**
 * Decide whether the observed wires named in `x` and `y` are d-separated
 * given those in `z`, writing the verdict to `*out_separated`.
 *
 * Name arrays may be NULL when their length is 0. The classical method
 * reports [`MdStatus::MethodInapplicable`] on models outside its scope;
 * the other two apply to every model.
 *
 * # Safety
 * `m` must be a live handle; `x`, `y`, `z` must point to `nx`, `ny`, `nz`
 * NUL-terminated strings; `out_separated` must be a valid location to
 * write a bool to.
 */
enum MdStatus md_model_dsep(const struct MdModel *m,
                            enum MdDsepMethod method,
                            const char *const *x,
                            size_t nx,
                            const char *const *y,
                            size_t ny,
                            const char *const *z,
                            size_t nz,
                            bool *out_separated);

/**
 * Serialize the model (and its interpretation, when present) back to the
 * JSON schema accepted by [`md_model_from_json`].
 *
 * # Safety
 * `m` must be a live handle and `out` a valid location to write a pointer
 * to. Free the string with [`md_string_free`].
 */
enum MdStatus md_model_to_json(const struct MdModel *m, char **out);

/**
 * Render the model as Graphviz dot text.
 *
 * # Safety
 * `m` must be a live handle and `out` a valid location to write a pointer
 * to. Free the string with [`md_string_free`].
 */
enum MdStatus md_model_to_dot(const struct MdModel *m, char **out);

/**
 * Marginalize the model to the named observed wires and store the new
 * handle in `*out`. The input handle is left untouched.
 *
 * # Safety
 * `m` must be a live handle; `keep` must point to `n` NUL-terminated
 * strings; `out` must be a valid location to write a pointer to.
 */
enum MdStatus md_model_marginalize(const struct MdModel *m,
                                   const char *const *keep,
                                   size_t n,
                                   struct MdModel **out);

/**
 * Extend the output leg so every wire is observed, storing the new handle
 * in `*out`. The input handle is left untouched.
 *
 * # Safety
 * `m` must be a live handle and `out` a valid location to write a pointer
 * to.
 */
enum MdStatus md_model_pure_bloom(const struct MdModel *m, struct MdModel **out);

/**
 * Parse a diagram file, reduce it to normal form, and return the result as
 * JSON. Unlike [`md_model_from_json`] this accepts diagrams that are not
 * causal models yet; normalizing is how they become one.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid location to
 * write a pointer to. Free the string with [`md_string_free`].
 */
enum MdStatus md_normalize_json(const char *json, char **out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* MARKOV_DSEP_H */
