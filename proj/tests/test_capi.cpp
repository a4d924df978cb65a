#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "scnav/scnav.h"

namespace {

const std::string kConfigs = std::string(SCNAV_SOURCE_DIR) + "/configs/";

const char* kSmall = R"(
arena.width = 16
arena.height = 8
arena.start = 1.5 4 0
arena.goal = 11 4 0.8
obstacles.count = 2
trial.timeout = 120
)";

std::string error_text() { return scnav_last_error(); }

scnav_config* small() {
  scnav_config* c = nullptr;
  REQUIRE(scnav_config_parse(kSmall, nullptr, &c) == SCNAV_OK);
  return c;
}

}  // namespace

TEST_CASE("version and status strings") {
  CHECK(std::string(scnav_version()) == "1.0.0");
  CHECK(std::string(scnav_status_string(SCNAV_OK)) == "ok");
  CHECK(std::string(scnav_status_string(SCNAV_E_PARSE)) == "parse error");
  CHECK(std::string(scnav_status_string(static_cast<scnav_status>(42))) == "unknown status");
}

TEST_CASE("config loading and errors") {
  scnav_config* c = nullptr;
  CHECK(scnav_config_load((kConfigs + "trial.conf").c_str(), &c) == SCNAV_OK);
  REQUIRE(c != nullptr);

  size_t needed = 0;
  CHECK(scnav_config_hash(c, nullptr, 0, &needed) == SCNAV_OK);
  CHECK(needed == 17);
  std::vector<char> buf(needed);
  CHECK(scnav_config_hash(c, buf.data(), buf.size(), nullptr) == SCNAV_OK);
  const std::string hash = buf.data();
  char tiny[4];
  CHECK(scnav_config_hash(c, tiny, sizeof tiny, &needed) == SCNAV_E_INVALID_ARG);
  CHECK(std::string(tiny) == hash.substr(0, 3));

  CHECK(scnav_config_set(c, "blend.alpha", "2") == SCNAV_E_PARSE);
  CHECK(scnav_config_set(c, "no.such.key", "1") == SCNAV_E_PARSE);
  CHECK(scnav_config_hash(c, buf.data(), buf.size(), nullptr) == SCNAV_OK);
  CHECK(std::string(buf.data()) == hash);
  CHECK(scnav_config_set(c, "trial.seed", "9") == SCNAV_OK);
  CHECK(scnav_config_hash(c, buf.data(), buf.size(), nullptr) == SCNAV_OK);
  CHECK(std::string(buf.data()) != hash);
  scnav_config_free(c);

  scnav_config* bad = reinterpret_cast<scnav_config*>(0x1);
  CHECK(scnav_config_load((kConfigs + "broken.conf").c_str(), &bad) == SCNAV_E_PARSE);
  CHECK(bad == nullptr);
  CHECK(error_text().find("blend.alpha") != std::string::npos);
  CHECK(scnav_config_load("/nonexistent/x.conf", &bad) == SCNAV_E_IO);
  CHECK(scnav_config_parse("arena.width = ten\n", nullptr, &bad) == SCNAV_E_PARSE);
  CHECK(scnav_config_load(nullptr, &bad) == SCNAV_E_INVALID_ARG);
  scnav_config_free(nullptr);
}

TEST_CASE("trials, traces and replay") {
  scnav_config* c = small();
  scnav_run_options o;
  scnav_run_options_init(&o);
  CHECK(o.mode == -1);
  o.has_seed = 1;
  o.seed = 3;
  o.mode = SCNAV_MODE_SHARED;
  const auto path = (std::filesystem::temp_directory_path() / "scnav_capi_trace.txt").string();
  o.trace_out_path = path.c_str();
  scnav_metrics first{};
  REQUIRE(scnav_run_trial(c, &o, &first) == SCNAV_OK);
  CHECK(first.seed == 3);
  CHECK(first.mode == SCNAV_MODE_SHARED);
  CHECK(first.completion_time > 0.0);

  o.trace_out_path = nullptr;
  o.replay_trace_path = path.c_str();
  scnav_metrics again{};
  REQUIRE(scnav_run_trial(c, &o, &again) == SCNAV_OK);
  CHECK(again.completion_time == first.completion_time);
  CHECK(again.collisions == first.collisions);
  CHECK(again.path_length == first.path_length);
  std::filesystem::remove(path);

  o.replay_trace_path = "/nonexistent/trace.txt";
  CHECK(scnav_run_trial(c, &o, &again) != SCNAV_OK);
  o.replay_trace_path = nullptr;
  o.mode = 7;
  CHECK(scnav_run_trial(c, &o, &again) == SCNAV_E_VALIDATION);
  o.mode = -1;
  o.alpha = 3.0;
  CHECK(scnav_run_trial(c, &o, &again) == SCNAV_E_VALIDATION);

  char row[256];
  CHECK(scnav_metrics_csv_row(c, &first, row, sizeof row, nullptr) == SCNAV_OK);
  CHECK(std::string(row).find(",3,shared,") != std::string::npos);
  char header[256];
  CHECK(scnav_csv_header(header, sizeof header, nullptr) == SCNAV_OK);
  CHECK(std::string(header).find("seed") != std::string::npos);
  scnav_config_free(c);
}

TEST_CASE("batch") {
  scnav_config* c = small();
  scnav_batch* b = nullptr;
  REQUIRE(scnav_batch_run(c, 3, 1, 20, 3, -1.0, &b) == SCNAV_OK);
  REQUIRE(scnav_batch_rows(b) == 6);
  scnav_metrics m{};
  CHECK(scnav_batch_row(b, 5, &m) == SCNAV_OK);
  CHECK(m.seed == 22);
  CHECK(m.mode == SCNAV_MODE_SHARED);
  CHECK(scnav_batch_row(b, 6, &m) == SCNAV_E_INVALID_ARG);

  size_t needed = 0;
  CHECK(scnav_batch_csv(b, nullptr, 0, &needed) == SCNAV_OK);
  std::string csv(needed, '\0');
  CHECK(scnav_batch_csv(b, csv.data(), csv.size(), nullptr) == SCNAV_OK);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  CHECK(scnav_batch_summary(b, nullptr, 0, &needed) == SCNAV_OK);
  std::string summary(needed, '\0');
  CHECK(scnav_batch_summary(b, summary.data(), summary.size(), nullptr) == SCNAV_OK);
  CHECK(summary.find("Wilcoxon") != std::string::npos);
  scnav_batch_free(b);

  CHECK(scnav_batch_run(c, 0, 0, 0, 3, -1.0, &b) == SCNAV_E_VALIDATION);
  CHECK(b == nullptr);
  CHECK(scnav_batch_rows(nullptr) == 0);
  scnav_config_free(c);
}

TEST_CASE("session through the protocol") {
  scnav_config* c = small();
  scnav_session* s = nullptr;
  REQUIRE(scnav_session_create(c, 1, 4, &s) == SCNAV_OK);
  int a = -1, b = -1;
  CHECK(scnav_session_connect(s, &a) == SCNAV_OK);
  CHECK(scnav_session_connect(s, &b) == SCNAV_OK);
  CHECK(a != b);

  char reply[512];
  size_t needed = 99;
  CHECK(scnav_session_message(s, a, R"({"v":1,"type":"control","action":"start"})", reply, sizeof reply, &needed) ==
        SCNAV_OK);
  CHECK(needed == 0);
  CHECK(scnav_session_message(s, b, R"({"v":1,"type":"twist","linear":1,"angular":0})", reply, sizeof reply,
                              &needed) == SCNAV_OK);
  CHECK(std::string(reply).find("read-only") != std::string::npos);
  CHECK(scnav_session_message(s, a, "garbage", reply, sizeof reply, &needed) == SCNAV_OK);
  CHECK(std::string(reply).find("\"error\"") != std::string::npos);

  scnav_metrics m{};
  CHECK(scnav_session_metrics(s, &m) == SCNAV_E_STATE);
  CHECK(scnav_session_message(s, a, R"({"v":1,"type":"twist","linear":1,"angular":0})", nullptr, 0, &needed) ==
        SCNAV_OK);
  CHECK(scnav_session_step(s, 60) == SCNAV_OK);
  CHECK(scnav_session_step(s, -1) == SCNAV_E_INVALID_ARG);

  CHECK(scnav_session_state_json(s, 1, nullptr, 0, &needed) == SCNAV_OK);
  std::string state(needed, '\0');
  CHECK(scnav_session_state_json(s, 1, state.data(), state.size(), nullptr) == SCNAV_OK);
  CHECK(state.find("\"map\"") != std::string::npos);
  CHECK(state.find("\"running\"") != std::string::npos);

  const auto path = (std::filesystem::temp_directory_path() / "scnav_capi_session.txt").string();
  CHECK(scnav_session_save_trace(s, path.c_str()) == SCNAV_OK);
  CHECK(std::filesystem::file_size(path) > 0);
  std::filesystem::remove(path);

  CHECK(scnav_session_disconnect(s, a) == SCNAV_OK);
  CHECK(scnav_session_disconnect(s, a) == SCNAV_E_INVALID_ARG);
  CHECK(scnav_session_message(s, b, R"({"v":1,"type":"twist","linear":0,"angular":0})", reply, sizeof reply,
                              &needed) == SCNAV_OK);
  CHECK(needed == 0);
  scnav_session_free(s);
  scnav_config_free(c);
}

TEST_CASE("server lifecycle") {
  scnav_config* c = small();
  scnav_server* srv = nullptr;
  REQUIRE(scnav_server_create(c, "127.0.0.1", 0, 0.0, nullptr, &srv) == SCNAV_OK);
  unsigned short port = 0;
  CHECK(scnav_server_port(srv, &port) == SCNAV_E_STATE);
  REQUIRE(scnav_server_start(srv) == SCNAV_OK);
  CHECK(scnav_server_port(srv, &port) == SCNAV_OK);
  CHECK(port != 0);
  CHECK(scnav_server_stop(srv) == SCNAV_OK);
  scnav_server_free(srv);
  scnav_config_free(c);
}

TEST_CASE("statistics") {
  const double a[] = {212.4, 198.7, 305.2, 250.0, 187.3, 222.9, 264.1, 241.6, 199.8, 230.5, 276.4, 218.0};
  const double b[] = {160.2, 171.5, 201.9, 188.4, 150.6, 170.3, 190.7, 181.2, 166.0, 175.9, 199.3, 162.4};
  scnav_test_result r{};
  CHECK(scnav_paired_t_test(a, b, 12, &r) == SCNAV_OK);
  CHECK(r.statistic == doctest::Approx(9.578454702671667).epsilon(1e-9));
  CHECK(r.df == 11.0);
  CHECK(std::abs(r.p - 1.1349571444416105e-06) < 1e-6);
  CHECK(scnav_wilcoxon(a, b, 12, &r) == SCNAV_OK);
  CHECK(r.statistic == 78.0);
  CHECK(std::abs(r.p - 0.002526174268502165) < 1e-6);
  CHECK(scnav_paired_t_test(a, b, 1, &r) == SCNAV_E_VALIDATION);
  CHECK(scnav_paired_t_test(nullptr, b, 12, &r) == SCNAV_E_INVALID_ARG);

  CHECK(std::string(scnav_p_band(0.0004)) == "p < .001");
  CHECK(std::string(scnav_p_band(0.004)) == "p < .01");
  CHECK(scnav_active_window_range(60, 0.1) == doctest::Approx(4.171930009000628).epsilon(1e-12));
  CHECK(scnav_active_window_range(0, 0.1) == -1.0);
}
