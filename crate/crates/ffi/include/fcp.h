#ifndef FCP_H
#define FCP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum FcpStatus {
  FCP_STATUS_OK = 0,
  FCP_STATUS_NULL_POINTER = 1,
  FCP_STATUS_INVALID_ARGUMENT = 2,
  FCP_STATUS_SHAPE = 3,
  FCP_STATUS_MODEL = 4,
  FCP_STATUS_NON_FINITE = 5,
  FCP_STATUS_DEGENERATE = 6,
  FCP_STATUS_IO = 7,
  FCP_STATUS_UTF8 = 8,
  FCP_STATUS_OUT_OF_RANGE = 9,
  FCP_STATUS_PANIC = 10,
} FcpStatus;

/**
 * Opaque handle to the compositions computed for one instance.
 */
typedef struct FcpExplanation FcpExplanation;

/**
 * Opaque handle to a loaded network.
 */
typedef struct FcpNetwork FcpNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL.
 *
 * The pointer stays valid until the next `fcp_*` call on the same thread.
 */
const char *fcp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fcp_version(void);

/**
 * Loads a network from a JSON model file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out_net` a writable pointer.
 */
enum FcpStatus fcp_network_load(const char *path, struct FcpNetwork **out_net);

/**
 * Parses a network from a JSON model document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out_net` a writable pointer.
 */
enum FcpStatus fcp_network_from_json(const char *json, struct FcpNetwork **out_net);

/**
 * Serializes a network to JSON. Release the result with [`fcp_string_free`].
 *
 * # Safety
 * `net` must come from this library; `out_json` must be writable.
 */
enum FcpStatus fcp_network_to_json(const struct FcpNetwork *net, char **out_json);

/**
 * Releases a network. NULL is ignored.
 *
 * # Safety
 * `net` must come from this library and not be used afterwards.
 */
void fcp_network_free(struct FcpNetwork *net);

/**
 * Input and output widths of a network.
 *
 * # Safety
 * `net` must come from this library; the out pointers must be writable.
 */
enum FcpStatus fcp_network_shape(const struct FcpNetwork *net,
                                 size_t *out_inputs,
                                 size_t *out_outputs);

/**
 * Writes the output-layer activations for instance `x` into `out_values`.
 *
 * # Safety
 * `x` must hold `len` values and `out_values` must hold `out_len` values.
 */
enum FcpStatus fcp_network_forward(const struct FcpNetwork *net,
                                   const double *x,
                                   size_t len,
                                   double *out_values,
                                   size_t out_len);

/**
 * Predicted class (argmax of the output) for instance `x`.
 *
 * # Safety
 * `x` must hold `len` values; `out_class` must be writable.
 */
enum FcpStatus fcp_network_predict(const struct FcpNetwork *net,
                                   const double *x,
                                   size_t len,
                                   size_t *out_class);

/**
 * LRP-epsilon relevance of each input feature for the predicted class.
 *
 * # Safety
 * `x` must hold `len` values and `out_scores` must hold `out_len` values.
 */
enum FcpStatus fcp_lrp_epsilon(const struct FcpNetwork *net,
                               const double *x,
                               size_t len,
                               double epsilon,
                               double *out_scores,
                               size_t out_len);

/**
 * Computes the feature compositions of every neuron for instance `x`.
 *
 * # Safety
 * `x` must hold `len` values; `out_explanation` must be writable.
 */
enum FcpStatus fcp_explain(const struct FcpNetwork *net,
                           const double *x,
                           size_t len,
                           struct FcpExplanation **out_explanation);

/**
 * Releases an explanation. NULL is ignored.
 *
 * # Safety
 * `explanation` must come from this library and not be used afterwards.
 */
void fcp_explanation_free(struct FcpExplanation *explanation);

/**
 * Number of composition matrices, including the input identity.
 *
 * # Safety
 * `explanation` must come from this library; `out_count` must be writable.
 */
enum FcpStatus fcp_explanation_layer_count(const struct FcpExplanation *explanation,
                                           size_t *out_count);

/**
 * Rows (neurons) and columns (features) of composition matrix `layer`.
 *
 * # Safety
 * `explanation` must come from this library; the out pointers must be writable.
 */
enum FcpStatus fcp_explanation_layer_shape(const struct FcpExplanation *explanation,
                                           size_t layer,
                                           size_t *out_rows,
                                           size_t *out_cols);

/**
 * Copies composition matrix `layer` row-major into `out_values`.
 *
 * # Safety
 * `out_values` must hold `out_len` values.
 */
enum FcpStatus fcp_explanation_copy_layer(const struct FcpExplanation *explanation,
                                          size_t layer,
                                          double *out_values,
                                          size_t out_len);

/**
 * Whether neuron `row` of `layer` had zero composition mass.
 *
 * # Safety
 * `explanation` must come from this library; `out_flag` must be writable.
 */
enum FcpStatus fcp_explanation_is_degenerate(const struct FcpExplanation *explanation,
                                             size_t layer,
                                             size_t row,
                                             bool *out_flag);

/**
 * Class predicted by the network for the explained instance.
 *
 * # Safety
 * `explanation` must come from this library; `out_class` must be writable.
 */
enum FcpStatus fcp_explanation_predicted_class(const struct FcpExplanation *explanation,
                                               size_t *out_class);

/**
 * Serializes an explanation to JSON. Release the result with [`fcp_string_free`].
 *
 * # Safety
 * `explanation` must come from this library; `out_json` must be writable.
 */
enum FcpStatus fcp_explanation_to_json(const struct FcpExplanation *explanation, char **out_json);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void fcp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FCP_H */
