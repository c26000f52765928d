#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "rpchain/cli.hpp"

int main(int argc, char** argv)
{
  namespace rc = rpchain::cli;
  CLI::App app{"Numerical checks for a spinless electron-phonon chain"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_path, csv_dir, mode;
  long long seed = -1;
  int threads = 0;
  bool verbose = false;
  app.add_option("--config", config_path, "config file (key = value lines)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_path, "write the JSON report here instead of stdout");
  app.add_option("--csv-dir", csv_dir, "directory for CSV side files");
  app.add_option("--seed", seed, "override run.seed")->check(CLI::NonNegativeNumber);
  app.add_option("--threads", threads, "worker threads (default: RPCHAIN_THREADS or 1)")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", verbose, "progress messages on stderr");

  for (const std::string& name : rc::commands()) {
    CLI::App* sub = app.add_subcommand(name);
    if (name == "positivity")
      sub->add_option("mode", mode, "background or reflection")->required()->check(CLI::IsMember({"background", "reflection"}));
    if (name == "inequalities")
      sub->add_option("mode", mode, "energy, susceptibility, infrared (default: all three)")
          ->check(CLI::IsMember({"energy", "susceptibility", "infrared", "all"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto log = spdlog::stderr_color_mt("rpchain");
  log->set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    rc::RunConfig cfg = rc::load_config(config_path);
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    rc::RunOptions opt;
    opt.threads = threads;
    if (opt.threads <= 0) {
      const char* env = std::getenv("RPCHAIN_THREADS");
      opt.threads = env ? std::max(1, std::atoi(env)) : 1;
    }
    opt.csv_dir = csv_dir;
    opt.log = [log](const std::string& m) { log->info("{}", m); };

    const rc::json report = rc::run(command, mode, cfg, opt);
    if (out_path.empty()) {
      std::cout << report.dump(2) << '\n';
    } else {
      std::ofstream f(out_path);
      if (!f) throw std::runtime_error("cannot write " + out_path);
      f << report.dump(2) << '\n';
    }
    if (!report["pass"].get<bool>()) log->warn("{}: check failed, see report", command);
    return report["pass"].get<bool>() ? 0 : 1;
  } catch (const rc::ConfigError& e) {
    log->error("config error: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    log->error("{}", e.what());
    return 3;
  }
}
