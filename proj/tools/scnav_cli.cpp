// scnav command line: single trials, paired batches and the teleop bridge.
// Talks to the core only through scnav.h.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scnav/scnav.h"

namespace fs = std::filesystem;

namespace {

struct CliError {
  int code;
};

void check(scnav_status st, const char* what) {
  if (st == SCNAV_OK) return;
  std::fprintf(stderr, "scnav: %s: %s (%s)\n", what, scnav_last_error(), scnav_status_string(st));
  throw CliError{st == SCNAV_E_PARSE || st == SCNAV_E_VALIDATION || st == SCNAV_E_INVALID_ARG ? 2 : 1};
}

template <typename Fn>
std::string fetch(Fn&& fn, const char* what) {
  size_t needed = 0;
  check(fn(nullptr, 0, &needed), what);
  std::string out(needed, '\0');
  check(fn(out.data(), out.size(), &needed), what);
  out.resize(needed ? needed - 1 : 0);
  return out;
}

struct ConfigHandle {
  scnav_config* ptr = nullptr;
  ~ConfigHandle() { scnav_config_free(ptr); }
};

void load_config(ConfigHandle& cfg, const std::string& path, const std::vector<std::string>& overrides) {
  check(scnav_config_load(path.c_str(), &cfg.ptr), "loading config");
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "scnav: --set expects key=value, got '%s'\n", kv.c_str());
      throw CliError{2};
    }
    check(scnav_config_set(cfg.ptr, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), "applying --set");
  }
}

int parse_mode(const std::string& m) {
  if (m == "shared") return SCNAV_MODE_SHARED;
  if (m == "teleop" || m == "pure-teleop" || m == "pure_teleop") return SCNAV_MODE_TELEOP;
  std::fprintf(stderr, "scnav: unknown mode '%s'\n", m.c_str());
  throw CliError{2};
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    std::fprintf(stderr, "scnav: cannot write %s\n", path.string().c_str());
    throw CliError{1};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shared-control navigation: VFH+ avoidance blended with delayed operator commands"};
  app.require_subcommand(1);
  app.set_version_flag("--version", scnav_version());

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;

  auto* run = app.add_subcommand("run", "run one trial");
  std::string mode;
  std::string replay_path, trace_out;
  run->add_option("-c,--config", config_path, "trial config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "trial seed");
  run->add_option("--mode", mode, "shared or teleop")->check(CLI::IsMember({"shared", "teleop", "pure-teleop", "pure_teleop"}));
  run->add_option("--alpha", alpha, "blending weight of the operator")->check(CLI::Range(0.0, 1.0));
  run->add_option("--replay", replay_path, "replay a recorded command trace instead of the scripted operator")
      ->check(CLI::ExistingFile);
  run->add_option("--trace-out", trace_out, "record issued operator commands");
  run->add_option("-o,--out", out_dir, "directory for trial.csv");
  run->add_option("--set", overrides, "override a config key (key=value)");

  auto* batch = app.add_subcommand("batch", "paired experiment over consecutive seeds");
  int repetitions = 20;
  std::string modes = "teleop,shared";
  batch->add_option("-c,--config", config_path, "trial config file")->required()->check(CLI::ExistingFile);
  batch->add_option("-n,--seeds", repetitions, "number of paired seeds")->check(CLI::PositiveNumber);
  batch->add_option("--seed", seed, "first seed (default: config trial.seed)");
  batch->add_option("--modes", modes, "comma separated: teleop,shared");
  batch->add_option("--alpha", alpha, "blending weight of the operator")->check(CLI::Range(0.0, 1.0));
  batch->add_option("-o,--out", out_dir, "directory for batch.csv and summary.txt");
  batch->add_option("--set", overrides, "override a config key (key=value)");

  auto* serve = app.add_subcommand("serve", "start the teleop bridge");
  unsigned short port = 8765;
  double ui_rate = 0.0;
  std::string address = "127.0.0.1";
  serve->add_option("-c,--config", config_path, "trial config file")->required()->check(CLI::ExistingFile);
  serve->add_option("-p,--port", port, "listen port (0 picks one)");
  serve->add_option("--address", address, "listen address");
  serve->add_option("--ui-rate", ui_rate, "state messages per second (default: config bridge.ui_rate)")
      ->check(CLI::PositiveNumber);
  serve->add_option("--seed", seed, "session seed");
  serve->add_option("-o,--out", out_dir, "directory for session traces and metrics");
  serve->add_option("--set", overrides, "override a config key (key=value)");

  CLI11_PARSE(app, argc, argv);

  try {
    ConfigHandle cfg;
    load_config(cfg, config_path, overrides);
    if (!out_dir.empty()) fs::create_directories(out_dir);

    if (*run) {
      scnav_run_options opts;
      scnav_run_options_init(&opts);
      if (seed) {
        opts.has_seed = 1;
        opts.seed = *seed;
      }
      if (!mode.empty()) opts.mode = parse_mode(mode);
      if (alpha) opts.alpha = *alpha;
      if (!replay_path.empty()) opts.replay_trace_path = replay_path.c_str();
      if (!trace_out.empty()) opts.trace_out_path = trace_out.c_str();
      scnav_metrics m{};
      check(scnav_run_trial(cfg.ptr, &opts, &m), "running trial");
      const std::string csv = fetch([](char* b, size_t l, size_t* n) { return scnav_csv_header(b, l, n); }, "csv") +
                              fetch([&](char* b, size_t l, size_t* n) { return scnav_metrics_csv_row(cfg.ptr, &m, b, l, n); },
                                    "csv");
      std::cout << csv;
      std::printf("%s seed %llu: %s in %.2f s, %d collision(s), path %.2f m\n",
                  m.mode == SCNAV_MODE_SHARED ? "shared" : "teleop", static_cast<unsigned long long>(m.seed),
                  m.timed_out ? "timed out" : "reached goal", m.completion_time, m.collisions, m.path_length);
      if (!out_dir.empty()) write_file(fs::path(out_dir) / "trial.csv", csv);
      return 0;
    }

    if (*batch) {
      int mask = 0;
      std::stringstream ss(modes);
      for (std::string m; std::getline(ss, m, ',');) mask |= parse_mode(m) == SCNAV_MODE_SHARED ? 2 : 1;
      scnav_batch* report = nullptr;
      check(scnav_batch_run(cfg.ptr, repetitions, seed ? 1 : 0, seed.value_or(0), mask, alpha.value_or(-1.0), &report),
            "running batch");
      const std::string csv = fetch([&](char* b, size_t l, size_t* n) { return scnav_batch_csv(report, b, l, n); }, "csv");
      const std::string summary =
          fetch([&](char* b, size_t l, size_t* n) { return scnav_batch_summary(report, b, l, n); }, "summary");
      scnav_batch_free(report);
      std::cout << summary;
      if (!out_dir.empty()) {
        write_file(fs::path(out_dir) / "batch.csv", csv);
        write_file(fs::path(out_dir) / "summary.txt", summary);
      } else {
        std::cout << '\n' << csv;
      }
      return 0;
    }

    if (*serve) {
      // Signals are collected on this thread; the server thread never sees them.
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);

      if (seed) check(scnav_config_set(cfg.ptr, "trial.seed", std::to_string(*seed).c_str()), "seed");
      scnav_server* server = nullptr;
      check(scnav_server_create(cfg.ptr, address.c_str(), port, ui_rate, out_dir.empty() ? nullptr : out_dir.c_str(),
                                &server),
            "creating server");
      const scnav_status st = scnav_server_start(server);
      if (st != SCNAV_OK) {
        scnav_server_free(server);
        check(st, "starting server");
      }
      unsigned short bound = 0;
      scnav_server_port(server, &bound);
      std::printf("listening on ws://%s:%u\n", address.c_str(), bound);
      std::fflush(stdout);
      int sig = 0;
      sigwait(&set, &sig);
      scnav_server_stop(server);
      scnav_server_free(server);
      return 0;
    }
  } catch (const CliError& e) {
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "scnav: %s\n", e.what());
    return 1;
  }
  return 0;
}
