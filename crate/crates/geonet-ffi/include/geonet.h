#ifndef GEONET_H
#define GEONET_H

/* This file is generated by cbindgen from geonet-ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Call succeeded.
#define GEONET_OK 0

// Invalid argument (bad base, dimension, spec string, digit file, ...).
#define GEONET_ERR_INVALID 1

// A property check failed (net verification found a bad box).
#define GEONET_ERR_VIOLATION 2

// A required pointer argument was NULL.
#define GEONET_ERR_NULL 3

// Output buffer too small.
#define GEONET_ERR_BUFFER 4

// Unexpected internal failure (caught panic).
#define GEONET_ERR_INTERNAL 5

// Opaque product-domain handle.
typedef struct GeonetDomain GeonetDomain;

// Opaque digital net handle.
typedef struct GeonetNet GeonetNet;

// Replicated estimate summary returned by value.
typedef struct GeonetEstimate {
  uint64_t n;
  uint64_t replications;
  double pooled_mean;
  double variance;
  double ci_lo;
  double ci_hi;
} GeonetEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the message of the most recent error on this thread into `buf`
// (NUL-terminated, truncated to `cap`), returning the full length.
//
// # Safety
// `buf` must point to `cap` writable bytes, or be NULL to query length.
size_t geonet_last_error(char *buf, size_t cap);

// Builds the generalized Faure (0,m,s)-net in prime-power base `b` with
// `depth` digits (`depth = 0` picks the default). On success stores a
// handle in `out`.
//
// # Safety
// `out` must be a valid pointer to a `GeonetNet*` slot.
int32_t geonet_net_new(uint8_t b, size_t s, uint32_t m, size_t depth, struct GeonetNet **out);

// Parses a net from the plain-text digit format.
//
// # Safety
// `text` is a NUL-terminated string; `out` a valid slot.
int32_t geonet_net_parse(const char *text, struct GeonetNet **out);

// Frees a net handle; NULL is a no-op.
//
// # Safety
// `net` must have come from this library and not be freed twice.
void geonet_net_free(struct GeonetNet *net);

// Number of points in the net.
//
// # Safety
// `net` must be a live handle.
uint64_t geonet_net_points(const struct GeonetNet *net);

// Applies a nested uniform scramble keyed by (seed, replication) and
// stores the scrambled net as a fresh handle.
//
// # Safety
// `net` live handle; `out` valid slot.
int32_t geonet_net_scramble(const struct GeonetNet *net,
                            uint64_t seed,
                            uint64_t replication,
                            struct GeonetNet **out);

// Checks the (t,m,s) equidistribution property by exhaustive box
// counting. Returns GEONET_OK when the property holds and
// GEONET_ERR_VIOLATION (with the box in the error message) when not.
//
// # Safety
// `net` must be a live handle.
int32_t geonet_net_verify(const struct GeonetNet *net, uint32_t t);

// Serializes the net in the plain-text digit format into `buf`
// (NUL-terminated, truncated); returns the full length via `written`.
//
// # Safety
// `net` live handle; `buf` points to `cap` writable bytes or NULL;
// `written` a valid slot.
int32_t geonet_net_format(const struct GeonetNet *net, char *buf, size_t cap, size_t *written);

// Parses a domain spec (shorthand like "T2^2" or the one-component-per-
// line file format) into an opaque handle.
//
// # Safety
// `spec` NUL-terminated string; `out` valid slot.
int32_t geonet_domain_parse(const char *spec, uint8_t default_base, struct GeonetDomain **out);

// Frees a domain handle; NULL is a no-op.
//
// # Safety
// `dom` must have come from this library and not be freed twice.
void geonet_domain_free(struct GeonetDomain *dom);

// Total coordinate dimension of the domain (sum over components).
//
// # Safety
// `dom` must be a live handle.
size_t geonet_domain_dim(const struct GeonetDomain *dom);

// Maps every net point into the domain, writing n * dim doubles
// row-major into `buf`.
//
// # Safety
// `net` and `dom` live handles; `buf` points to `cap` writable doubles.
int32_t geonet_map_points(const struct GeonetNet *net,
                          const struct GeonetDomain *dom,
                          double *buf,
                          size_t cap);

// Runs a replicated scrambled-net estimate of a built-in integrand
// ("tri-poly", "tri-exp", "x1", "x1x2", "const", "const:c") over a
// domain spec, filling the summary struct.
//
// # Safety
// Strings NUL-terminated; `out` a valid struct pointer.
int32_t geonet_estimate_builtin(const char *integrand,
                                const char *domain_spec,
                                uint8_t base,
                                uint32_t m,
                                uint64_t replications,
                                uint64_t seed,
                                double alpha,
                                struct GeonetEstimate *out);

// Closed-form gain coefficient of a (0,m,s)-net in base b for subset
// size u and level sum k; NaN for invalid arguments.
double geonet_gain_closed_form(uint8_t b, uint32_t m, size_t u, uint32_t k);

// Inverse standard normal CDF (Acklam's approximation).
double geonet_normal_quantile(double p);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* GEONET_H */
