#ifndef SEMSTEER_H
#define SEMSTEER_H

/* C interface to the semsteer engine. All strings are UTF-8. Strings returned
 * through `char**` out-parameters are owned by the caller and released with
 * ss_string_free. On failure a function returns a nonzero ss_status and the
 * calling thread's last error (message plus JSON detail) is set. */

#include <stddef.h>

#if defined(_WIN32)
#  define SS_API __declspec(dllexport)
#else
#  define SS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ss_status {
    SS_OK = 0,
    SS_ERR_USAGE = 1,      /* invalid argument or configuration */
    SS_ERR_DATA = 2,       /* malformed corpus, groups or session file */
    SS_ERR_PROVIDER = 3,   /* embedding / LLM provider failure */
    SS_ERR_IO = 4,
    SS_ERR_CONFLICT = 5,   /* stale revision, baseline config mismatch */
    SS_ERR_NOT_FOUND = 6,
    SS_ERR_INTERNAL = 7
} ss_status;

typedef struct ss_corpus ss_corpus;
typedef struct ss_session ss_session;

SS_API const char* ss_version(void);

/* Message / JSON detail of the last failure on this thread ("" and "null" when none). */
SS_API const char* ss_last_error(void);
SS_API const char* ss_last_error_detail(void);
SS_API const char* ss_status_name(ss_status status);

SS_API void ss_string_free(char* s);

/* format: "jsonl" or "csv". */
SS_API ss_status ss_corpus_load(const char* path, const char* format, ss_corpus** out);
/* {"corpus_id","documents","groups":{label:count}} */
SS_API ss_status ss_corpus_summary(const ss_corpus* corpus, char** out_json);
SS_API void ss_corpus_free(ss_corpus* corpus);

SS_API ss_status ss_session_create(const ss_corpus* corpus, const char* perspective_name, ss_session** out);
SS_API ss_status ss_session_load(const char* path, ss_session** out);
SS_API ss_status ss_session_save(const ss_session* session, const char* path);
SS_API ss_status ss_session_to_json(const ss_session* session, char** out_json);
/* groups_json: {"groups":[{"group_id":..., "member_ids":[...]}, ...]} */
SS_API ss_status ss_session_set_groups(ss_session* session, const ss_corpus* corpus, const char* groups_json);
SS_API void ss_session_free(ss_session* session);

/* Runs externalize -> extend -> incorporate -> project on the session.
 *
 * options_json (every field optional):
 *   {"incorporation": {...}, "projection": {...},
 *    "providers": {...} | "providers_path": "file.json",
 *    "llm": "provider" | "oracle", "oracle": {...}, "oracle_seed": 1,
 *    "k": 10, "max_parallel": 4, "few_shot_k": 3}
 *
 * "oracle" replaces the LLM with the label-aware synthetic oracle (needs
 * reference labels). The report is
 *   {"session_id","revision","k","before":{"sil","nc"},"after":{...},
 *    "delta":{"sil","nc"},"extension":{...}}
 * where the metric blocks are null when the corpus has no reference labels. */
SS_API ss_status ss_steer_run(ss_session* session, const ss_corpus* corpus, const char* options_json, char** out_report_json);

/* kind: "strategies" | "interaction" | "alpha". Writes <kind>.csv and
 * <kind>.txt (plus interaction_curve.csv) under out_dir; returns the table. */
SS_API ss_status ss_sweep_run(const char* kind, const char* config_path, const char* out_dir, char** out_table);

/* Tables for every sweep CSV found in dir. */
SS_API ss_status ss_report_render(const char* dir, char** out_text);

typedef void (*ss_ready_fn)(int port, void* user);

/* Serves the HTTP API until the process exits. options_json:
 *   {"host","port","data_dir","static_dir","workers",
 *    "providers": {...} | "providers_path": "file.json"}
 * on_ready (may be NULL) runs once the socket is bound. */
SS_API ss_status ss_service_run(const char* options_json, ss_ready_fn on_ready, void* user);

#ifdef __cplusplus
}
#endif

#endif
