/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef POOLDROP_H
#define POOLDROP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PdTrainPooling {
  PD_TRAIN_POOLING_MAX = 0,
  PD_TRAIN_POOLING_MAX_DROPOUT = 1,
  PD_TRAIN_POOLING_MAX_DROPOUT_MULTINOMIAL = 2,
  PD_TRAIN_POOLING_STOCHASTIC = 3,
} PdTrainPooling;

/*
 Result code of every fallible call.
 */
typedef enum PdStatus {
  PD_STATUS_OK = 0,
  PD_STATUS_NULL_POINTER = 1,
  PD_STATUS_INVALID_ARGUMENT = 2,
  PD_STATUS_SHAPE_MISMATCH = 3,
  PD_STATUS_NEGATIVE_ACTIVATION = 4,
  PD_STATUS_ARCH = 5,
  PD_STATUS_FORMAT = 6,
  PD_STATUS_IO = 7,
  PD_STATUS_DIVERGED = 8,
  PD_STATUS_BUFFER_TOO_SMALL = 9,
  PD_STATUS_PANIC = 10,
} PdStatus;

typedef enum PdTestPooling {
  PD_TEST_POOLING_MAX = 0,
  PD_TEST_POOLING_SCALED_MAX = 1,
  PD_TEST_POOLING_PROB_WEIGHTED = 2,
  PD_TEST_POOLING_STOCHASTIC_WEIGHTED = 3,
} PdTestPooling;

typedef enum PdCountFlavor {
  PD_COUNT_FLAVOR_MAX_POOL_DROPOUT = 0,
  PD_COUNT_FLAVOR_STOCHASTIC = 1,
  PD_COUNT_FLAVOR_CONV_DROPOUT = 2,
} PdCountFlavor;

/*
 Opaque network handle.
 */
typedef struct PdNetwork PdNetwork;

/*
 Network construction options. Retain probabilities set to NaN (or any
 value <= 0) disable that dropout site.
 */
typedef struct PdNetworkOptions {
  enum PdTrainPooling train_pooling;
  double conv_retain;
  /*
   Non-zero to also drop image pixels feeding the first convolution.
   */
  uint8_t conv_on_image;
  double pool_retain;
  double fc_first_retain;
  double fc_retain;
  double init_std;
  uint64_t seed;
} PdNetworkOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or "" after a success.
 The pointer stays valid until the next call into this library from the
 same thread.
 */
const char *pd_last_error(void);

/*
 Plain max pooling in training, no dropout, seed 1.
 */
struct PdNetworkOptions pd_network_options_default(void);

/*
 Builds a randomly initialised network from an architecture string such
 as "1x28x28-6C5-2P2-12C5-2P2-100N-10N".
 */
enum PdStatus pd_network_new(const char *arch,
                             const struct PdNetworkOptions *options,
                             struct PdNetwork **out);

/*
 Loads a checkpoint written by the `pooldrop train --checkpoint` command.
 `options` supplies the dropout placement used for test-time scaling; its
 seed is ignored.
 */
enum PdStatus pd_network_load(const char *path,
                              const struct PdNetworkOptions *options,
                              struct PdNetwork **out);

enum PdStatus pd_network_save(const struct PdNetwork *net, const char *path, uint64_t epoch);

/*
 Releases a handle. Null is ignored.
 */
void pd_network_free(struct PdNetwork *net);

/*
 Number of input values (channels x height x width); 0 for a null handle.
 */
size_t pd_network_input_len(const struct PdNetwork *net);

/*
 Number of output classes; 0 for a null handle.
 */
size_t pd_network_class_count(const struct PdNetwork *net);

/*
 Number of trainable parameters; 0 for a null handle.
 */
size_t pd_network_param_count(const struct PdNetwork *net);

/*
 Copies all parameters (per layer: weights, then biases) into `buf`.
 */
enum PdStatus pd_network_get_params(const struct PdNetwork *net, double *buf, size_t len);

enum PdStatus pd_network_set_params(struct PdNetwork *net, const double *buf, size_t len);

/*
 Test-time forward pass; writes one logit per class.
 */
enum PdStatus pd_network_forward(const struct PdNetwork *net,
                                 const double *input,
                                 size_t input_len,
                                 enum PdTestPooling rule,
                                 double *logits,
                                 size_t logits_len);

/*
 Train-mode forward pass with dropout and pooling noise drawn from
 (`seed`, `counter`).
 */
enum PdStatus pd_network_forward_train(const struct PdNetwork *net,
                                       const double *input,
                                       size_t input_len,
                                       uint64_t seed,
                                       uint64_t counter,
                                       double *logits,
                                       size_t logits_len);

enum PdStatus pd_network_predict(const struct PdNetwork *net,
                                 const double *input,
                                 size_t input_len,
                                 enum PdTestPooling rule,
                                 size_t *class_out);

/*
 Probabilistic weighted pooling of one region: the expected max over
 dropout masks with retain probability `retain_p`.
 */
enum PdStatus pd_prob_weighted_value(const double *acts, size_t len, double retain_p, double *out);

/*
 Selection probabilities of one region under max-pooling dropout.
 `probs` receives `len + 1` values: the all-dropped mass first, then the
 mass of each unit in region order.
 */
enum PdStatus pd_region_probs_maxdrop(const double *acts,
                                      size_t len,
                                      double retain_p,
                                      double *probs,
                                      size_t probs_len);

/*
 Stochastic pooling probabilities `a_i / sum(a)` in region order
 (`len` values) and the test-time value `sum(a^2) / sum(a)`.
 */
enum PdStatus pd_region_stochastic(const double *acts,
                                   size_t len,
                                   double *probs,
                                   size_t probs_len,
                                   double *expectation);

/*
 Per-unit base `b(t)` of the model count.
 */
enum PdStatus pd_base_b(uint64_t t, enum PdCountFlavor flavor, double *out);

/*
 Natural log of the number of distinct sub-models.
 */
enum PdStatus pd_log_model_count(uint64_t r,
                                 uint64_t s,
                                 uint64_t t,
                                 enum PdCountFlavor flavor,
                                 double *out);

/*
 Natural log of (max-pooling dropout count) / (stochastic pooling count).
 */
enum PdStatus pd_log_count_ratio(uint64_t r, uint64_t s, uint64_t t, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POOLDROP_H */
