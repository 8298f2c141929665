#ifndef RBMTKIT_H
#define RBMTKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum RbmtStatus {
  RBMT_STATUS_OK = 0,
  RBMT_STATUS_NULL_POINTER = 1,
  RBMT_STATUS_INVALID_UTF8 = 2,
  RBMT_STATUS_INVALID_ARGUMENT = 3,
  RBMT_STATUS_INVALID_INPUT = 4,
  RBMT_STATUS_PANIC = 5,
} RbmtStatus;

/**
 * Values accepted by `marker` parameters.
 */
typedef enum RbmtMarker {
  RBMT_MARKER_SUFFIX = 0,
  RBMT_MARKER_PREFIX = 1,
} RbmtMarker;

/**
 * Values accepted by `smoothing` parameters.
 */
typedef enum RbmtSmoothing {
  RBMT_SMOOTHING_NONE = 0,
  RBMT_SMOOTHING_ADD_ONE = 1,
} RbmtSmoothing;

/**
 * Learned or loaded BPE merge list.
 */
typedef struct RbmtBpeModel RbmtBpeModel;

/**
 * Lexicon ambiguity index.
 */
typedef struct RbmtLexicon RbmtLexicon;

/**
 * Word translation counts.
 */
typedef struct RbmtPhraseTable RbmtPhraseTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string.
 */
const char *rbmt_version(void);

/**
 * Message of the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *rbmt_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void rbmt_string_free(char *s);

/**
 * Parses an s-expression lexicon into an ambiguity index.
 *
 * # Safety
 * `text` must be a valid C string; `out` must be valid for writes.
 */
enum RbmtStatus rbmt_lexicon_parse(const char *text, struct RbmtLexicon **out);

/**
 * Number of distinct surfaces in the index; 0 for NULL.
 *
 * # Safety
 * `lexicon` must be NULL or a live handle.
 */
size_t rbmt_lexicon_len(const struct RbmtLexicon *lexicon);

/**
 * # Safety
 * `lexicon` must be NULL or a handle from [`rbmt_lexicon_parse`], not yet freed.
 */
void rbmt_lexicon_free(struct RbmtLexicon *lexicon);

/**
 * Appends CAT and CL ambiguity-class features to every token of a line.
 *
 * # Safety
 * Pointers must be valid; `out` must be valid for writes.
 */
enum RbmtStatus rbmt_annotate_catcl(const struct RbmtLexicon *lexicon,
                                    const char *line,
                                    uint32_t separator_code,
                                    char **out);

/**
 * Linearizes one bracketed parse tree with the default bracketed labels.
 *
 * # Safety
 * `tree` must be a valid C string; `out` must be valid for writes.
 */
enum RbmtStatus rbmt_linearize_tree(const char *tree, uint32_t separator_code, char **out);

/**
 * Learns BPE merges from newline-separated, space-tokenized text.
 *
 * # Safety
 * `text` must be a valid C string; `out` must be valid for writes.
 */
enum RbmtStatus rbmt_bpe_learn(const char *text,
                               size_t max_merges,
                               uint64_t min_frequency,
                               uint32_t marker_code,
                               struct RbmtBpeModel **out);

/**
 * Loads a BPE model from its text form.
 *
 * # Safety
 * `text` must be a valid C string; `out` must be valid for writes.
 */
enum RbmtStatus rbmt_bpe_model_parse(const char *text, struct RbmtBpeModel **out);

/**
 * Serializes a BPE model to its text form.
 *
 * # Safety
 * `model` must be a live handle; `out` must be valid for writes.
 */
enum RbmtStatus rbmt_bpe_model_to_text(const struct RbmtBpeModel *model, char **out);

/**
 * Number of merges; 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t rbmt_bpe_model_len(const struct RbmtBpeModel *model);

/**
 * # Safety
 * `model` must be NULL or a BPE handle from this library, not yet freed.
 */
void rbmt_bpe_model_free(struct RbmtBpeModel *model);

/**
 * Segments every surface of a token line; features are copied to each piece.
 *
 * # Safety
 * Pointers must be valid; `out` must be valid for writes.
 */
enum RbmtStatus rbmt_bpe_apply(const struct RbmtBpeModel *model,
                               const char *line,
                               uint32_t separator_code,
                               char **out);

/**
 * Rejoins BPE pieces of a token line.
 *
 * # Safety
 * `line` must be a valid C string; `out` must be valid for writes.
 */
enum RbmtStatus rbmt_bpe_undo(const char *line,
                              uint32_t separator_code,
                              uint32_t marker_code,
                              char **out);

/**
 * Loads a phrase table from `src<TAB>tgt<TAB>count` lines.
 *
 * # Safety
 * `tsv` must be a valid C string; `out` must be valid for writes.
 */
enum RbmtStatus rbmt_phrase_table_parse(const char *tsv, struct RbmtPhraseTable **out);

/**
 * Most frequent translation of `source`. Writes NULL to `out` when the
 * word is not in the table.
 *
 * # Safety
 * Pointers must be valid; `out` must be valid for writes.
 */
enum RbmtStatus rbmt_phrase_table_lookup(const struct RbmtPhraseTable *table,
                                         const char *source,
                                         char **out);

/**
 * # Safety
 * `table` must be NULL or a handle from [`rbmt_phrase_table_parse`], not yet freed.
 */
void rbmt_phrase_table_free(struct RbmtPhraseTable *table);

/**
 * Sentence BLEU on [0, 100] over space-tokenized text.
 *
 * # Safety
 * Strings must be valid; `out` must be valid for writes.
 */
enum RbmtStatus rbmt_sentence_bleu(const char *hyp,
                                   const char *reference,
                                   uint32_t smoothing_code,
                                   double *out);

/**
 * Sentence TER with greedy block shifts. Fails on an empty reference.
 *
 * # Safety
 * Strings must be valid; `out` must be valid for writes.
 */
enum RbmtStatus rbmt_sentence_ter(const char *hyp, const char *reference, double *out);

/**
 * Sentence chrF3 on [0, 100].
 *
 * # Safety
 * Strings must be valid; `out` must be valid for writes.
 */
enum RbmtStatus rbmt_sentence_chrf(const char *hyp, const char *reference, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RBMTKIT_H */
