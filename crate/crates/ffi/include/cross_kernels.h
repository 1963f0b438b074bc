#ifndef CROSS_KERNELS_H
#define CROSS_KERNELS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum CkStatus {
  CK_STATUS_OK = 0,
  CK_STATUS_NULL_POINTER = 1,
  CK_STATUS_INVALID_ARGUMENT = 2,
  CK_STATUS_OUT_OF_RANGE = 3,
  CK_STATUS_SHAPE_MISMATCH = 4,
  CK_STATUS_PRECISION = 5,
  CK_STATUS_NOT_PRIME = 6,
  CK_STATUS_EXHAUSTED = 7,
  CK_STATUS_MALFORMED = 8,
  CK_STATUS_IO = 9,
  CK_STATUS_INTERNAL = 10,
  CK_STATUS_PANIC = 11,
} CkStatus;

/**
 * Reduction strategy selector, passed as `uint32_t`.
 */
typedef enum CkStrategy {
  CK_STRATEGY_NATIVE = 0,
  CK_STRATEGY_BARRETT = 1,
  CK_STRATEGY_MONTGOMERY = 2,
  CK_STRATEGY_SHOUP = 3,
} CkStrategy;

/**
 * A compiled RNS basis converter.
 */
typedef struct CkBasisConverter CkBasisConverter;

/**
 * A compiled known left operand for repeated modular matrix products.
 */
typedef struct CkKnownMatrix CkKnownMatrix;

/**
 * A validated word-size modulus.
 */
typedef struct CkModulus CkModulus;

/**
 * A compiled negacyclic NTT plan for one modulus.
 */
typedef struct CkNttPlan CkNttPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the next call.
 */
const char *ck_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ck_version(void);

/**
 * Fill `out[0..count]` with distinct `bits`-bit primes `q ≡ 1 (mod 2n)`, descending.
 *
 * # Safety
 * `out` must point to `count` writable words.
 */
enum CkStatus ck_gen_ntt_primes(uint32_t bits, size_t n, size_t count, uint32_t *out);

/**
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum CkStatus ck_modulus_new(uint32_t q, struct CkModulus **out);

/**
 * # Safety
 * `m` must be NULL or a handle from [`ck_modulus_new`] not yet freed.
 */
void ck_modulus_free(struct CkModulus *m);

/**
 * The modulus value, or 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
uint32_t ck_modulus_value(const struct CkModulus *m);

/**
 * Element-wise `out[i] = a[i]·b[i] mod q` under `strategy`.
 *
 * # Safety
 * `a`, `b` and `out` must each hold `len` words.
 */
enum CkStatus ck_vec_mulmod(const struct CkModulus *m,
                            const uint32_t *a,
                            const uint32_t *b,
                            size_t len,
                            uint32_t strategy_id,
                            uint32_t *out);

/**
 * Compile an NTT plan for degree `n`. `r = c = 0` picks the default split.
 *
 * # Safety
 * `m` must be a live handle and `out` a valid handle slot.
 */
enum CkStatus ck_ntt_plan_new(const struct CkModulus *m,
                              size_t n,
                              size_t r,
                              size_t c,
                              uint32_t bp,
                              uint32_t strategy_id,
                              struct CkNttPlan **out);

/**
 * # Safety
 * `p` must be NULL or a live handle.
 */
void ck_ntt_plan_free(struct CkNttPlan *p);

/**
 * Transform length of the plan, or 0 for NULL.
 *
 * # Safety
 * `p` must be NULL or a live handle.
 */
size_t ck_ntt_plan_degree(const struct CkNttPlan *p);

/**
 * The 2n-th root of unity the plan was built with, or 0 for NULL.
 *
 * # Safety
 * `p` must be NULL or a live handle.
 */
uint32_t ck_ntt_plan_psi(const struct CkNttPlan *p);

/**
 * Forward transform; output is in bit-reversed order.
 *
 * # Safety
 * `input` and `out` must hold `len` words; `len` must equal the plan degree.
 */
enum CkStatus ck_ntt_forward(const struct CkNttPlan *p,
                             const uint32_t *input,
                             size_t len,
                             uint32_t *out);

/**
 * Inverse of [`ck_ntt_forward`].
 *
 * # Safety
 * As for [`ck_ntt_forward`].
 */
enum CkStatus ck_ntt_inverse(const struct CkNttPlan *p,
                             const uint32_t *input,
                             size_t len,
                             uint32_t *out);

/**
 * Product of `a` and `b` in `Z_q[X]/(X^n + 1)`.
 *
 * # Safety
 * `a`, `b` and `out` must hold `len` words.
 */
enum CkStatus ck_polymul(const struct CkNttPlan *p,
                         const uint32_t *a,
                         const uint32_t *b,
                         size_t len,
                         uint32_t *out);

/**
 * One-shot `out = a·b mod q` for `a` of shape h×v and `b` of shape v×w.
 *
 * # Safety
 * `a` holds h·v words, `b` holds v·w words, `out` holds h·w words.
 */
enum CkStatus ck_mat_mod_mul(const struct CkModulus *m,
                             const uint32_t *a,
                             const uint32_t *b,
                             size_t h,
                             size_t v,
                             size_t w,
                             uint32_t bp,
                             uint32_t strategy_id,
                             uint32_t *out);

/**
 * Compile the rows×cols matrix `a` as a known left operand.
 *
 * # Safety
 * `a` holds rows·cols words; `out` is a valid handle slot.
 */
enum CkStatus ck_known_matrix_new(const struct CkModulus *m,
                                  const uint32_t *a,
                                  size_t rows,
                                  size_t cols,
                                  uint32_t bp,
                                  uint32_t strategy_id,
                                  struct CkKnownMatrix **out);

/**
 * # Safety
 * `k` must be NULL or a live handle.
 */
void ck_known_matrix_free(struct CkKnownMatrix *k);

/**
 * `out = A·b` where `b` is cols(A)×w.
 *
 * # Safety
 * `b` holds cols(A)·w words and `out` rows(A)·w words.
 */
enum CkStatus ck_known_matrix_mul(const struct CkKnownMatrix *k,
                                  const uint32_t *b,
                                  size_t w,
                                  uint32_t *out);

/**
 * Compile a converter between two disjoint prime bases.
 *
 * # Safety
 * `src` holds `l` primes, `dst` holds `lp` primes; `out` is a valid handle slot.
 */
enum CkStatus ck_basis_converter_new(const uint32_t *src,
                                     size_t l,
                                     const uint32_t *dst,
                                     size_t lp,
                                     uint32_t bp,
                                     uint32_t strategy_id,
                                     struct CkBasisConverter **out);

/**
 * # Safety
 * `c` must be NULL or a live handle.
 */
void ck_basis_converter_free(struct CkBasisConverter *c);

/**
 * Convert an L×n limb matrix to the L′×n target representation. `use_bat = 0`
 * selects the 64-bit word path; results are identical.
 *
 * # Safety
 * `input` holds L·n words and `out` L′·n words.
 */
enum CkStatus ck_basis_convert(const struct CkBasisConverter *c,
                               const uint32_t *input,
                               size_t n,
                               int32_t use_bat,
                               uint32_t *out);

/**
 * Drop the last `times` limbs of an L×n polynomial over `primes`, dividing by each
 * dropped modulus with rounding toward zero. `out` receives (L − times)×n words.
 *
 * # Safety
 * `primes` holds `l` words, `input` l·n words and `out` (l − times)·n words.
 */
enum CkStatus ck_rescale(const uint32_t *primes,
                         size_t l,
                         const uint32_t *input,
                         size_t n,
                         size_t times,
                         uint32_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CROSS_KERNELS_H */
