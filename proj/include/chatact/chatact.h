/* chatact C API.
 *
 * Every fallible call returns a chatact_status. On failure the message is
 * available from chatact_last_error() on the same thread until the next
 * call. Strings returned through `char**` are owned by the caller and must
 * be released with chatact_free_string(). Handles are released with their
 * matching *_free function; passing NULL to any *_free is a no-op.
 *
 * Option arguments are JSON objects (or NULL for defaults); unknown keys are
 * rejected with CHATACT_E_INVALID_ARGUMENT.
 */
#ifndef CHATACT_CHATACT_H
#define CHATACT_CHATACT_H

#include <stddef.h>
#include <stdint.h>

#if defined(CHATACT_BUILDING_LIBRARY)
#define CHATACT_API __attribute__((visibility("default")))
#else
#define CHATACT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum chatact_status {
  CHATACT_OK = 0,
  CHATACT_E_INVALID_ARGUMENT = 1, /* NULL handle, bad option JSON */
  CHATACT_E_DATA = 2,             /* input violates a data contract */
  CHATACT_E_PARSE = 3,            /* malformed record in a text input */
  CHATACT_E_TAXONOMY = 4,         /* invalid taxonomy definition */
  CHATACT_E_DANGLING = 5,         /* annotation names a missing sentence */
  CHATACT_E_CONFLICT = 6,         /* taxonomy hash or content mismatch */
  CHATACT_E_NOT_FOUND = 7,
  CHATACT_E_IO = 8,
  CHATACT_E_INTERNAL = 9
} chatact_status;

typedef struct chatact_taxonomy chatact_taxonomy;
typedef struct chatact_corpus chatact_corpus;
typedef struct chatact_model chatact_model;
typedef struct chatact_baseline chatact_baseline;
typedef struct chatact_store chatact_store;
typedef struct chatact_server chatact_server;

CHATACT_API const char* chatact_version(void);
CHATACT_API const char* chatact_last_error(void);
CHATACT_API const char* chatact_status_name(chatact_status status);
CHATACT_API void chatact_free_string(char* s);

/* ---- taxonomy ---- */

CHATACT_API chatact_status chatact_taxonomy_builtin(chatact_taxonomy** out);
CHATACT_API chatact_status chatact_taxonomy_parse(const char* toml, chatact_taxonomy** out);
CHATACT_API chatact_status chatact_taxonomy_load(const char* path, chatact_taxonomy** out);
CHATACT_API void chatact_taxonomy_free(chatact_taxonomy* t);
CHATACT_API chatact_status chatact_taxonomy_hash(const chatact_taxonomy* t, char** out);
/* {"name", "hash", "labels": [{id, parent, reduced, collapses_to}], "reduced_set"} */
CHATACT_API chatact_status chatact_taxonomy_describe(const chatact_taxonomy* t, char** out_json);

/* ---- corpus: dialogues plus the annotation records attached to them ---- */

CHATACT_API chatact_status chatact_corpus_new(chatact_corpus** out);
CHATACT_API void chatact_corpus_free(chatact_corpus* c);
/* Appends the dialogues of a native JSON-lines transcript. A dialogue id
 * already in the corpus is a CHATACT_E_DATA error. */
CHATACT_API chatact_status chatact_corpus_add_transcript(chatact_corpus* c, const char* jsonl,
                                                         const char* default_dialogue_id);
/* Appends one dialogue built from Slack channel-day JSON arrays. `users_json`
 * may be NULL. `out_json` (optional) receives {"dropped", "rejected"}. */
CHATACT_API chatact_status chatact_corpus_add_slack(chatact_corpus* c, const char* const* day_files, size_t count,
                                                    const char* users_json, const char* dialogue_id,
                                                    char** out_json);
/* Validates annotation records (labels against `t`, ids, spans) and folds
 * them into the corpus. Nothing changes on failure. */
CHATACT_API chatact_status chatact_corpus_attach(chatact_corpus* c, const chatact_taxonomy* t,
                                                 const char* annotations_jsonl);
CHATACT_API chatact_status chatact_corpus_transcript(const chatact_corpus* c, char** out_jsonl);
/* Every record attached so far, in attach order. */
CHATACT_API chatact_status chatact_corpus_annotations(const chatact_corpus* c, char** out_jsonl);
/* One sentence per line with effective, gold and predicted labels. */
CHATACT_API chatact_status chatact_corpus_labeled(const chatact_corpus* c, char** out_jsonl);
/* {"dialogues", "messages", "sentences", "gold_labeled", "predicted", "reordered": [ids]} */
CHATACT_API chatact_status chatact_corpus_summary(const chatact_corpus* c, char** out_json);

/* Segment options: {"strategy": "message|static|time|speaker", "line_limit",
 * "gap_limit": "90s"|"1h"..., "speaker_limit"}. */
CHATACT_API chatact_status chatact_corpus_segment(const chatact_corpus* c, const char* options_json,
                                                  char** out_windows_jsonl);
/* Label proportions over the whole corpus and each partition of a split.
 * Options: segment options plus {"seed", "train", "dev", "test"}. Windows
 * come from `windows_jsonl` when non-NULL. */
CHATACT_API chatact_status chatact_corpus_stats(const chatact_corpus* c, const chatact_taxonomy* t,
                                                const char* windows_jsonl, const char* options_json,
                                                char** out_json);

/* Synthetic transition-structured corpus with gold annotations attached.
 * Options: {"seed", "sentences", "dialogue_sentences", "ambiguity", "same_message"}. */
CHATACT_API chatact_status chatact_synthesize(const chatact_taxonomy* t, const char* options_json,
                                              chatact_corpus** out);

/* ---- sequence model ---- */

/* Trains on the train partition of a seeded split and selects the epoch by
 * dev accuracy. Options: segment options, split {"split_seed", "train",
 * "dev", "test"}, and {"seed" (required), "step", "l2", "patience",
 * "max_epochs", "batch_size", "workers", "dimension_bits"}. `out_report`
 * (optional) receives history and per-partition accuracy. */
CHATACT_API chatact_status chatact_model_train(const chatact_corpus* c, const chatact_taxonomy* t,
                                               const char* windows_jsonl, const char* options_json,
                                               chatact_model** out, char** out_report);
CHATACT_API chatact_status chatact_model_load(const char* path, chatact_model** out);
CHATACT_API chatact_status chatact_model_save(const chatact_model* m, const char* path);
CHATACT_API void chatact_model_free(chatact_model* m);
/* {"labels", "taxonomy_hash", "dimension_bits", "l2", "segmentation"} */
CHATACT_API chatact_status chatact_model_describe(const chatact_model* m, char** out_json);
/* Sets predicted labels. Windows default to the model's own segmentation;
 * `emissions_jsonl` (optional) adds imported per-sentence scores. A model
 * bound to another taxonomy than `t` is CHATACT_E_CONFLICT. */
CHATACT_API chatact_status chatact_model_label(const chatact_model* m, chatact_corpus* c, const chatact_taxonomy* t,
                                               const char* windows_jsonl, const char* emissions_jsonl);
/* Accuracy, per-label precision/recall and confusion over gold-labeled
 * sentences. Options: {"partition": "all|train|dev|test", "split_seed",
 * "train", "dev", "test"}. */
CHATACT_API chatact_status chatact_model_evaluate(const chatact_model* m, const chatact_corpus* c,
                                                  const chatact_taxonomy* t, const char* windows_jsonl,
                                                  const char* emissions_jsonl, const char* options_json,
                                                  char** out_json);

/* ---- bag-of-n-grams baseline and taxonomy validation ---- */

/* Trains on every gold-labeled sentence over every taxonomy label.
 * Options: {"seed" (required), "epochs", "dim", "bucket_bits", "learning_rate"}. */
CHATACT_API chatact_status chatact_baseline_train(const chatact_corpus* c, const chatact_taxonomy* t,
                                                  const char* options_json, chatact_baseline** out);
CHATACT_API chatact_status chatact_baseline_load(const char* path, chatact_baseline** out);
CHATACT_API chatact_status chatact_baseline_save(const chatact_baseline* b, const char* path);
CHATACT_API void chatact_baseline_free(chatact_baseline* b);
/* Label centroids of the corpus's gold sentences and the within-class vs
 * overall distance table. `mode` is sentence-mean, token-mean or
 * output-row (NULL for sentence-mean). Either output may be NULL. */
CHATACT_API chatact_status chatact_validate_taxonomy(const chatact_baseline* b, const chatact_corpus* c,
                                                     const chatact_taxonomy* t, const char* mode,
                                                     char** out_json, char** out_text);

/* ---- metrics ---- */

/* Report over a labeled JSON-lines stream (see chatact_corpus_labeled).
 * `config_json` may be NULL. Either output may be NULL. */
CHATACT_API chatact_status chatact_metrics_report(const char* labeled_jsonl, const chatact_taxonomy* t,
                                                  const char* config_json, char** out_json, char** out_text);

/* ---- project store and HTTP service ---- */

/* Opens or creates a store; `t` (optional) seeds a new store's taxonomy. */
CHATACT_API chatact_status chatact_store_open(const char* root, const chatact_taxonomy* t, chatact_store** out);
CHATACT_API void chatact_store_free(chatact_store* s);
/* Adds the corpus's dialogues and appends its attached records to the
 * per-dialogue annotation logs. */
CHATACT_API chatact_status chatact_store_add_corpus(chatact_store* s, const chatact_corpus* c);
/* `model_taxonomy` is needed only when the model is bound to a taxonomy
 * other than the store's. `out_id` receives the model's content hash. */
CHATACT_API chatact_status chatact_store_add_model(chatact_store* s, const chatact_model* m,
                                                   const chatact_taxonomy* model_taxonomy, char** out_id);

/* "host:port", ":port" or "port"; port 0 picks a free one. */
CHATACT_API chatact_status chatact_server_start(chatact_store* s, const char* bind, chatact_server** out,
                                                int* out_port);
CHATACT_API void chatact_server_stop(chatact_server* server);
/* Blocks until the process is stopped. */
CHATACT_API chatact_status chatact_serve(chatact_store* s, const char* bind);

#ifdef __cplusplus
}
#endif

#endif /* CHATACT_CHATACT_H */
