/* C interface to the scnav shared-control navigation core.
 *
 * Every call returns an scnav_status. On failure, scnav_last_error() holds a
 * message for the calling thread until its next failing call. Handles are
 * opaque and owned by the caller; free them with the matching *_free. String
 * outputs are copied into caller buffers: pass len to learn the required
 * size (including the terminator) in *needed, as with snprintf.
 */
#ifndef SCNAV_H
#define SCNAV_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SCNAV_API __declspec(dllexport)
#else
#define SCNAV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum scnav_status {
  SCNAV_OK = 0,
  SCNAV_E_INVALID_ARG = 1,
  SCNAV_E_PARSE = 2,
  SCNAV_E_VALIDATION = 3,
  SCNAV_E_IO = 4,
  SCNAV_E_STATE = 5,
  SCNAV_E_INTERNAL = 6
} scnav_status;

typedef enum scnav_mode { SCNAV_MODE_TELEOP = 0, SCNAV_MODE_SHARED = 1 } scnav_mode;

typedef struct scnav_config scnav_config;
typedef struct scnav_batch scnav_batch;
typedef struct scnav_session scnav_session;
typedef struct scnav_server scnav_server;

typedef struct scnav_metrics {
  uint64_t seed;
  int mode; /* scnav_mode */
  double completion_time;
  int timed_out;
  int collisions;
  double path_length;
} scnav_metrics;

typedef struct scnav_test_result {
  double statistic; /* t, or W+ */
  double df;        /* t-test only */
  double z;         /* Wilcoxon only */
  double p;
  size_t n;
} scnav_test_result;

/* Run options. Fields left at their sentinel keep the config value. */
typedef struct scnav_run_options {
  int has_seed;
  uint64_t seed;
  int mode; /* -1 keeps the config */
  double alpha; /* < 0 keeps the config */
  const char* replay_trace_path; /* NULL runs the scripted operator */
  const char* trace_out_path;    /* NULL skips recording */
} scnav_run_options;

SCNAV_API const char* scnav_version(void);
SCNAV_API const char* scnav_last_error(void);
SCNAV_API const char* scnav_status_string(scnav_status status);
SCNAV_API void scnav_run_options_init(scnav_run_options* options);

/* Configuration */
SCNAV_API scnav_status scnav_config_load(const char* path, scnav_config** out);
SCNAV_API scnav_status scnav_config_parse(const char* text, const char* base_dir, scnav_config** out);
/* Overrides one scalar key and revalidates. */
SCNAV_API scnav_status scnav_config_set(scnav_config* config, const char* key, const char* value);
SCNAV_API scnav_status scnav_config_hash(const scnav_config* config, char* buf, size_t len, size_t* needed);
SCNAV_API void scnav_config_free(scnav_config* config);

/* Trials */
SCNAV_API scnav_status scnav_run_trial(const scnav_config* config, const scnav_run_options* options,
                                       scnav_metrics* out);
SCNAV_API scnav_status scnav_csv_header(char* buf, size_t len, size_t* needed);
SCNAV_API scnav_status scnav_metrics_csv_row(const scnav_config* config, const scnav_metrics* metrics, char* buf,
                                             size_t len, size_t* needed);

/* Paired batch over seeds base, base+1, ... (base defaults to trial.seed).
 * modes: bit 0 teleop, bit 1 shared. alpha < 0 keeps config. */
SCNAV_API scnav_status scnav_batch_run(const scnav_config* config, int repetitions, int has_base_seed,
                                       uint64_t base_seed, int modes, double alpha, scnav_batch** out);
SCNAV_API scnav_status scnav_batch_csv(const scnav_batch* batch, char* buf, size_t len, size_t* needed);
SCNAV_API scnav_status scnav_batch_summary(const scnav_batch* batch, char* buf, size_t len, size_t* needed);
SCNAV_API size_t scnav_batch_rows(const scnav_batch* batch);
SCNAV_API scnav_status scnav_batch_row(const scnav_batch* batch, size_t index, scnav_metrics* out);
SCNAV_API void scnav_batch_free(scnav_batch* batch);

/* Live session without networking. */
SCNAV_API scnav_status scnav_session_create(const scnav_config* config, int has_seed, uint64_t seed,
                                            scnav_session** out);
SCNAV_API scnav_status scnav_session_connect(scnav_session* session, int* client_id);
SCNAV_API scnav_status scnav_session_disconnect(scnav_session* session, int client_id);
/* Handles one protocol message; a non-empty reply is copied to buf. */
SCNAV_API scnav_status scnav_session_message(scnav_session* session, int client_id, const char* json, char* reply,
                                             size_t len, size_t* needed);
SCNAV_API scnav_status scnav_session_step(scnav_session* session, int ticks);
SCNAV_API scnav_status scnav_session_state_json(const scnav_session* session, int with_map, char* buf, size_t len,
                                                size_t* needed);
SCNAV_API scnav_status scnav_session_metrics(const scnav_session* session, scnav_metrics* out);
SCNAV_API scnav_status scnav_session_save_trace(const scnav_session* session, const char* path);
SCNAV_API void scnav_session_free(scnav_session* session);

/* WebSocket bridge. port 0 picks a free port. output_dir may be NULL. */
SCNAV_API scnav_status scnav_server_create(const scnav_config* config, const char* address, unsigned short port,
                                           double ui_rate, const char* output_dir, scnav_server** out);
SCNAV_API scnav_status scnav_server_start(scnav_server* server);
SCNAV_API scnav_status scnav_server_port(const scnav_server* server, unsigned short* port);
SCNAV_API scnav_status scnav_server_wait(scnav_server* server);
SCNAV_API scnav_status scnav_server_stop(scnav_server* server);
SCNAV_API void scnav_server_free(scnav_server* server);

/* Statistics on paired samples a[i], b[i]. */
SCNAV_API scnav_status scnav_paired_t_test(const double* a, const double* b, size_t n, scnav_test_result* out);
SCNAV_API scnav_status scnav_wilcoxon(const double* a, const double* b, size_t n, scnav_test_result* out);
SCNAV_API const char* scnav_p_band(double p);

SCNAV_API double scnav_active_window_range(int window_cells, double cell_size);

#ifdef __cplusplus
}
#endif

#endif /* SCNAV_H */
