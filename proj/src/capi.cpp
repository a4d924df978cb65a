#include "scnav/scnav.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "scnav/bridge.hpp"
#include "scnav/config.hpp"
#include "scnav/harness.hpp"
#include "scnav/server.hpp"
#include "scnav/stats.hpp"

struct scnav_config {
  scnav::ConfigDocument doc;
  scnav::TrialConfig trial;
};

struct scnav_batch {
  scnav::BatchReport report;
};

struct scnav_session {
  std::unique_ptr<scnav::BridgeSession> session;
};

struct scnav_server {
  std::unique_ptr<scnav::BridgeServer> server;
};

namespace {

thread_local std::string g_last_error;

scnav_status fail(scnav_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
scnav_status guarded(Fn&& fn) {
  try {
    fn();
    return SCNAV_OK;
  } catch (const scnav::ParseError& e) {
    return fail(SCNAV_E_PARSE, e.what());
  } catch (const scnav::ValidationError& e) {
    return fail(SCNAV_E_VALIDATION, e.what());
  } catch (const scnav::StateError& e) {
    return fail(SCNAV_E_STATE, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(SCNAV_E_IO, e.what());
  } catch (const std::ios_base::failure& e) {
    return fail(SCNAV_E_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SCNAV_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SCNAV_E_INTERNAL, e.what());
  } catch (...) {
    return fail(SCNAV_E_INTERNAL, "unknown error");
  }
}

scnav_status copy_out(const std::string& s, char* buf, size_t len, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buf && len > 0) return fail(SCNAV_E_INVALID_ARG, "buffer is null");
  if (len == 0) return needed ? SCNAV_OK : fail(SCNAV_E_INVALID_ARG, "zero-length buffer and no size query");
  if (len < s.size() + 1) {
    std::memcpy(buf, s.data(), len - 1);
    buf[len - 1] = '\0';
    return fail(SCNAV_E_INVALID_ARG, "buffer too small");
  }
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return SCNAV_OK;
}

void to_c(const scnav::TrialMetrics& m, scnav_metrics* out) {
  out->seed = m.seed;
  out->mode = m.mode == scnav::ControlMode::Shared ? SCNAV_MODE_SHARED : SCNAV_MODE_TELEOP;
  out->completion_time = m.completion_time;
  out->timed_out = m.timed_out ? 1 : 0;
  out->collisions = m.collisions;
  out->path_length = m.path_length;
}

scnav::TrialMetrics from_c(const scnav_metrics& m) {
  scnav::TrialMetrics out;
  out.seed = m.seed;
  out.mode = m.mode == SCNAV_MODE_SHARED ? scnav::ControlMode::Shared : scnav::ControlMode::PureTeleop;
  out.completion_time = m.completion_time;
  out.timed_out = m.timed_out != 0;
  out.collisions = m.collisions;
  out.path_length = m.path_length;
  return out;
}

void to_c(const scnav::StatsResult& r, scnav_test_result* out) {
  out->statistic = r.statistic;
  out->df = r.df;
  out->z = r.z;
  out->p = r.p;
  out->n = r.n;
}

scnav::ControlMode mode_from_c(int mode) {
  if (mode == SCNAV_MODE_TELEOP) return scnav::ControlMode::PureTeleop;
  if (mode == SCNAV_MODE_SHARED) return scnav::ControlMode::Shared;
  throw scnav::ValidationError("unknown mode " + std::to_string(mode));
}

#define SCNAV_REQUIRE(cond, what) \
  if (!(cond)) return fail(SCNAV_E_INVALID_ARG, what)

}  // namespace

extern "C" {

const char* scnav_version(void) { return "1.0.0"; }

const char* scnav_last_error(void) { return g_last_error.c_str(); }

const char* scnav_status_string(scnav_status status) {
  switch (status) {
    case SCNAV_OK: return "ok";
    case SCNAV_E_INVALID_ARG: return "invalid argument";
    case SCNAV_E_PARSE: return "parse error";
    case SCNAV_E_VALIDATION: return "validation error";
    case SCNAV_E_IO: return "i/o error";
    case SCNAV_E_STATE: return "state error";
    case SCNAV_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void scnav_run_options_init(scnav_run_options* options) {
  if (!options) return;
  options->has_seed = 0;
  options->seed = 0;
  options->mode = -1;
  options->alpha = -1.0;
  options->replay_trace_path = nullptr;
  options->trace_out_path = nullptr;
}

scnav_status scnav_config_load(const char* path, scnav_config** out) {
  SCNAV_REQUIRE(path && out, "null argument");
  *out = nullptr;
  return guarded([&] {
    if (!std::filesystem::exists(path))
      throw std::filesystem::filesystem_error("config not found", path, std::make_error_code(std::errc::no_such_file_or_directory));
    auto cfg = std::make_unique<scnav_config>();
    cfg->doc = scnav::ConfigDocument::load(path);
    cfg->trial = scnav::make_trial_config(cfg->doc);
    *out = cfg.release();
  });
}

scnav_status scnav_config_parse(const char* text, const char* base_dir, scnav_config** out) {
  SCNAV_REQUIRE(text && out, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto cfg = std::make_unique<scnav_config>();
    cfg->doc = scnav::ConfigDocument::parse(text, base_dir ? base_dir : "");
    cfg->trial = scnav::make_trial_config(cfg->doc);
    *out = cfg.release();
  });
}

scnav_status scnav_config_set(scnav_config* config, const char* key, const char* value) {
  SCNAV_REQUIRE(config && key && value, "null argument");
  return guarded([&] {
    scnav::ConfigDocument doc = config->doc;
    doc.set(key, value);
    scnav::TrialConfig trial = scnav::make_trial_config(doc);
    config->doc = std::move(doc);
    config->trial = std::move(trial);
  });
}

scnav_status scnav_config_hash(const scnav_config* config, char* buf, size_t len, size_t* needed) {
  SCNAV_REQUIRE(config, "null config");
  return copy_out(config->trial.hash(), buf, len, needed);
}

void scnav_config_free(scnav_config* config) { delete config; }

scnav_status scnav_run_trial(const scnav_config* config, const scnav_run_options* options, scnav_metrics* out) {
  SCNAV_REQUIRE(config && out, "null argument");
  scnav_run_options defaults;
  scnav_run_options_init(&defaults);
  const scnav_run_options& o = options ? *options : defaults;
  return guarded([&] {
    scnav::TrialOptions opts;
    if (o.has_seed) opts.seed = o.seed;
    if (o.mode >= 0) opts.mode = mode_from_c(o.mode);
    if (o.alpha >= 0.0) opts.alpha = o.alpha;
    scnav::CommandTrace replay, recorded;
    if (o.replay_trace_path) {
      replay = scnav::CommandTrace::load(o.replay_trace_path);
      opts.replay = &replay;
    }
    if (o.trace_out_path) opts.record_issued = &recorded;
    const scnav::TrialMetrics m = scnav::run_trial(config->trial, opts);
    if (o.trace_out_path) recorded.save(o.trace_out_path);
    to_c(m, out);
  });
}

scnav_status scnav_csv_header(char* buf, size_t len, size_t* needed) {
  return copy_out(scnav::csv_header(), buf, len, needed);
}

scnav_status scnav_metrics_csv_row(const scnav_config* config, const scnav_metrics* metrics, char* buf, size_t len,
                                   size_t* needed) {
  SCNAV_REQUIRE(config && metrics, "null argument");
  return copy_out(scnav::csv_row(config->trial.hash(), from_c(*metrics)), buf, len, needed);
}

scnav_status scnav_batch_run(const scnav_config* config, int repetitions, int has_base_seed, uint64_t base_seed,
                             int modes, double alpha, scnav_batch** out) {
  SCNAV_REQUIRE(config && out, "null argument");
  *out = nullptr;
  return guarded([&] {
    scnav::BatchOptions opts;
    opts.repetitions = repetitions;
    opts.base_seed = has_base_seed ? base_seed : config->trial.seed;
    opts.run_teleop = (modes & 1) != 0;
    opts.run_shared = (modes & 2) != 0;
    if (alpha >= 0.0) opts.alpha = alpha;
    auto b = std::make_unique<scnav_batch>();
    b->report = scnav::run_batch(config->trial, opts);
    *out = b.release();
  });
}

scnav_status scnav_batch_csv(const scnav_batch* batch, char* buf, size_t len, size_t* needed) {
  SCNAV_REQUIRE(batch, "null batch");
  return copy_out(batch->report.csv, buf, len, needed);
}

scnav_status scnav_batch_summary(const scnav_batch* batch, char* buf, size_t len, size_t* needed) {
  SCNAV_REQUIRE(batch, "null batch");
  return copy_out(batch->report.summary_text, buf, len, needed);
}

size_t scnav_batch_rows(const scnav_batch* batch) { return batch ? batch->report.rows.size() : 0; }

scnav_status scnav_batch_row(const scnav_batch* batch, size_t index, scnav_metrics* out) {
  SCNAV_REQUIRE(batch && out, "null argument");
  SCNAV_REQUIRE(index < batch->report.rows.size(), "row index out of range");
  to_c(batch->report.rows[index], out);
  return SCNAV_OK;
}

void scnav_batch_free(scnav_batch* batch) { delete batch; }

scnav_status scnav_session_create(const scnav_config* config, int has_seed, uint64_t seed, scnav_session** out) {
  SCNAV_REQUIRE(config && out, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto s = std::make_unique<scnav_session>();
    s->session = std::make_unique<scnav::BridgeSession>(config->trial,
                                                        has_seed ? std::optional<std::uint64_t>(seed) : std::nullopt);
    *out = s.release();
  });
}

scnav_status scnav_session_connect(scnav_session* session, int* client_id) {
  SCNAV_REQUIRE(session && client_id, "null argument");
  *client_id = session->session->connect();
  return SCNAV_OK;
}

scnav_status scnav_session_disconnect(scnav_session* session, int client_id) {
  SCNAV_REQUIRE(session, "null session");
  SCNAV_REQUIRE(session->session->is_connected(client_id), "unknown client");
  session->session->disconnect(client_id);
  return SCNAV_OK;
}

scnav_status scnav_session_message(scnav_session* session, int client_id, const char* json, char* reply, size_t len,
                                   size_t* needed) {
  SCNAV_REQUIRE(session && json, "null argument");
  std::optional<std::string> r;
  const scnav_status st = guarded([&] { r = session->session->handle_message(client_id, json); });
  if (st != SCNAV_OK) return st;
  if (!r) {
    if (needed) *needed = 0;
    if (reply && len > 0) reply[0] = '\0';
    return SCNAV_OK;
  }
  return copy_out(*r, reply, len, needed);
}

scnav_status scnav_session_step(scnav_session* session, int ticks) {
  SCNAV_REQUIRE(session, "null session");
  SCNAV_REQUIRE(ticks >= 0, "negative tick count");
  return guarded([&] {
    for (int i = 0; i < ticks; ++i) session->session->step();
  });
}

scnav_status scnav_session_state_json(const scnav_session* session, int with_map, char* buf, size_t len,
                                      size_t* needed) {
  SCNAV_REQUIRE(session, "null session");
  std::string text;
  const scnav_status st = guarded([&] {
    const auto& s = *session->session;
    text = scnav::encode_state(s.snapshot(), with_map ? &s.simulation().world().map() : nullptr);
  });
  if (st != SCNAV_OK) return st;
  return copy_out(text, buf, len, needed);
}

scnav_status scnav_session_metrics(const scnav_session* session, scnav_metrics* out) {
  SCNAV_REQUIRE(session && out, "null argument");
  const auto& m = session->session->metrics();
  if (!m) return fail(SCNAV_E_STATE, "trial has not ended");
  to_c(*m, out);
  return SCNAV_OK;
}

scnav_status scnav_session_save_trace(const scnav_session* session, const char* path) {
  SCNAV_REQUIRE(session && path, "null argument");
  return guarded([&] { session->session->trace().save(path); });
}

void scnav_session_free(scnav_session* session) { delete session; }

scnav_status scnav_server_create(const scnav_config* config, const char* address, unsigned short port, double ui_rate,
                                 const char* output_dir, scnav_server** out) {
  SCNAV_REQUIRE(config && out, "null argument");
  *out = nullptr;
  return guarded([&] {
    scnav::ServerOptions opts;
    if (address) opts.address = address;
    opts.port = port;
    opts.ui_rate = ui_rate > 0.0 ? ui_rate : config->trial.ui_rate;
    if (output_dir) opts.output_dir = output_dir;
    auto s = std::make_unique<scnav_server>();
    s->server = std::make_unique<scnav::BridgeServer>(config->trial, opts);
    *out = s.release();
  });
}

scnav_status scnav_server_start(scnav_server* server) {
  SCNAV_REQUIRE(server, "null server");
  return guarded([&] { server->server->start(); });
}

scnav_status scnav_server_port(const scnav_server* server, unsigned short* port) {
  SCNAV_REQUIRE(server && port, "null argument");
  if (!server->server->running()) return fail(SCNAV_E_STATE, "server is not running");
  *port = server->server->port();
  return SCNAV_OK;
}

scnav_status scnav_server_wait(scnav_server* server) {
  SCNAV_REQUIRE(server, "null server");
  return guarded([&] { server->server->wait(); });
}

scnav_status scnav_server_stop(scnav_server* server) {
  SCNAV_REQUIRE(server, "null server");
  return guarded([&] { server->server->stop(); });
}

void scnav_server_free(scnav_server* server) { delete server; }

scnav_status scnav_paired_t_test(const double* a, const double* b, size_t n, scnav_test_result* out) {
  SCNAV_REQUIRE(a && b && out, "null argument");
  return guarded([&] { to_c(scnav::paired_t_test(std::span(a, n), std::span(b, n)), out); });
}

scnav_status scnav_wilcoxon(const double* a, const double* b, size_t n, scnav_test_result* out) {
  SCNAV_REQUIRE(a && b && out, "null argument");
  return guarded([&] { to_c(scnav::wilcoxon_signed_rank(std::span(a, n), std::span(b, n)), out); });
}

const char* scnav_p_band(double p) {
  thread_local std::string band;
  band = scnav::p_band(p);
  return band.c_str();
}

double scnav_active_window_range(int window_cells, double cell_size) {
  try {
    return scnav::active_window_range(window_cells, cell_size);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return -1.0;
  }
}

}  // extern "C"
