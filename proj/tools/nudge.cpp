#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "nudge/http.hpp"
#include "nudge/study.hpp"

namespace {

int run_study_cmd(const std::string& config_path, const std::string& out, std::optional<std::uint64_t> seed) {
  nudge::StudyConfig cfg = nudge::load_study_config(config_path);
  if (seed) cfg.seed = *seed;
  cfg.output_dir = out;
  const auto result = nudge::run_study(cfg);
  nudge::write_report(result, cfg, out);
  std::cout << nudge::format_summary(nudge::summarize(nudge::weekly_rows(result)));
  return 0;
}

std::pair<std::string, int> split_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) return {bind, 8080};
  return {bind.substr(0, colon), std::stoi(bind.substr(colon + 1))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nudge: interruptibility-aware microtask scheduling"};
  app.require_subcommand(1);

  auto* study = app.add_subcommand("study", "simulated user studies");
  study->require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  auto* run = study->add_subcommand("run", "run a study and write its report");
  run->add_option("--config", config_path, "study config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--seed", seed, "overrides the config seed");

  std::string report_dir;
  auto* report = study->add_subcommand("report", "recompute and print the summary of a finished run");
  report->add_option("dir", report_dir, "study output directory")->required()->check(CLI::ExistingDirectory);

  std::string store;
  if (const char* env = std::getenv("NUDGE_STORE")) store = env;
  std::string bind = "127.0.0.1:8080";
  bool no_sync = false;
  auto* serve = app.add_subcommand("serve", "run the decision service over HTTP");
  serve->add_option("--store", store, "store directory (default $NUDGE_STORE)");
  serve->add_option("--bind", bind, "host:port")->capture_default_str();
  serve->add_flag("--no-sync", no_sync, "skip fsync (tests only)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_study_cmd(config_path, out_dir, seed);
    if (report->parsed()) {
      std::cout << nudge::format_summary(nudge::report_from_dir(report_dir));
      return 0;
    }
    if (serve->parsed()) {
      if (store.empty()) throw std::invalid_argument("--store or NUDGE_STORE is required");
      nudge::Service service({store, !no_sync});
      const auto [host, port] = split_bind(bind);
      nudge::serve_http(service, host, port);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
