#ifndef KGPROG_H
#define KGPROG_H

/* Generated by cbindgen from the kgprog-ffi crate. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum KgpStatus {
  KGP_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  KGP_STATUS_NULL_ARGUMENT = 1,
  /**
   * An input string was not valid UTF-8.
   */
  KGP_STATUS_INVALID_UTF8 = 2,
  /**
   * The graph text did not parse.
   */
  KGP_STATUS_BAD_KG = 3,
  /**
   * The program text did not parse.
   */
  KGP_STATUS_BAD_PROGRAM = 4,
  /**
   * The program parsed but is not well-typed.
   */
  KGP_STATUS_TYPE_ERROR = 5,
  /**
   * Execution failed (non-numeric threshold, empty aggregate, ...).
   */
  KGP_STATUS_RUNTIME_ERROR = 6,
  /**
   * A panic or other defect inside the library.
   */
  KGP_STATUS_INTERNAL = 7,
} KgpStatus;

/**
 * Opaque knowledge graph handle.
 */
typedef struct KgpKg KgpKg;

/**
 * Opaque program handle.
 */
typedef struct KgpProgram KgpProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or an empty string
 * after a success. The pointer stays valid until the next kgp call on the
 * same thread; copy the contents if you need them longer.
 */
const char *kgp_last_error(void);

/**
 * Static name for a status code, e.g. `"runtime error"`. Never null.
 */
const char *kgp_status_name(enum KgpStatus status);

/**
 * Parses a knowledge graph from TSV text
 * (`subject\trelation\tobject\tent|lit`, `#` comments allowed).
 *
 * # Safety
 * `text` must point to a NUL-terminated string. `out` must point to
 * writable storage for one pointer. On success `*out` owns the graph and
 * must be released with [`kgp_kg_free`]; on failure `*out` is untouched.
 */
enum KgpStatus kgp_kg_parse(const char *text, struct KgpKg **out);

/**
 * Generates the synthetic EHR-style graph used for demos and tests.
 * The same seed and sizes always produce the same graph.
 *
 * # Safety
 * `out` must point to writable storage for one pointer. On success `*out`
 * owns the graph and must be released with [`kgp_kg_free`].
 */
enum KgpStatus kgp_kg_generate(uint64_t seed,
                               size_t patients,
                               size_t admissions_per_patient,
                               struct KgpKg **out);

/**
 * Number of triples in the graph; 0 for a null handle.
 *
 * # Safety
 * `kg` must be null or a live handle from `kgp_kg_parse`/`kgp_kg_generate`.
 */
size_t kgp_kg_triple_count(const struct KgpKg *kg);

/**
 * Releases a graph handle. Null is a no-op.
 *
 * # Safety
 * `kg` must be null or a handle not yet freed; it is invalid afterwards.
 */
void kgp_kg_free(struct KgpKg *kg);

/**
 * Parses a program, one `rN = op(args)` step per line.
 *
 * # Safety
 * `text` must point to a NUL-terminated string. `out` must point to
 * writable storage for one pointer. On success `*out` owns the program
 * and must be released with [`kgp_program_free`].
 */
enum KgpStatus kgp_program_parse(const char *text, struct KgpProgram **out);

/**
 * Renders a program back to its newline-separated text form.
 * Returns a string to release with [`kgp_string_free`], or null for a
 * null handle.
 *
 * # Safety
 * `program` must be null or a live handle from `kgp_program_parse` or
 * `kgp_recover`.
 */
char *kgp_program_render(const struct KgpProgram *program);

/**
 * Releases a program handle. Null is a no-op.
 *
 * # Safety
 * `program` must be null or a handle not yet freed; it is invalid
 * afterwards.
 */
void kgp_program_free(struct KgpProgram *program);

/**
 * Executes a program against a graph. On success `*out_answer` holds the
 * canonical answer text (entities or literals one per line, numbers in
 * their shortest round-trip form); release it with [`kgp_string_free`].
 *
 * # Safety
 * `kg` and `program` must be live handles. `out_answer` must point to
 * writable storage for one pointer; it is untouched on failure.
 */
enum KgpStatus kgp_exec(const struct KgpKg *kg,
                        const struct KgpProgram *program,
                        char **out_answer);

/**
 * Rewrites equality-filter values that do not occur in the graph,
 * replacing each with the closest value found for its relation. Writes a
 * new program handle to `*out_program` (the input is untouched) and, when
 * `out_repairs` is non-null, the number of values that changed.
 *
 * # Safety
 * `kg` and `program` must be live handles. `out_program` must point to
 * writable storage for one pointer; on success `*out_program` must be
 * released with [`kgp_program_free`]. `out_repairs` may be null.
 */
enum KgpStatus kgp_recover(const struct KgpKg *kg,
                           const struct KgpProgram *program,
                           struct KgpProgram **out_program,
                           size_t *out_repairs);

/**
 * Releases a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must be null or a string returned by `kgp_program_render` or
 * `kgp_exec`, not yet freed.
 */
void kgp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KGPROG_H */
