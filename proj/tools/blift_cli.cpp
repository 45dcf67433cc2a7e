// Command-line front end for the blift shared library. All the work happens
// behind the C API; this binary only assembles the resolved config (file +
// flag overrides) and forwards it to blift_run().

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "blift/blift.h"

namespace {

using nlohmann::json;

struct GlobalFlags {
  std::string config_path;
  std::string out_dir;
  int64_t seed = -1;
  int jobs = 0;
};

json load_config(const GlobalFlags& flags) {
  json config = json::object();
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) {
      std::cerr << "error: cannot open config file " << flags.config_path << "\n";
      std::exit(2);
    }
    try {
      config = json::parse(in);
    } catch (const json::parse_error& e) {
      std::cerr << "error: " << flags.config_path << ": " << e.what() << "\n";
      std::exit(2);
    }
  }
  // A manifest is accepted in place of a config; unwrap here so flag
  // overrides apply to the embedded config.
  if (config.contains("schema") && config["schema"] == "blift.manifest.v1")
    config = config["config"];
  if (flags.seed >= 0) config["seed"] = static_cast<uint64_t>(flags.seed);
  if (!flags.out_dir.empty()) config["out_dir"] = flags.out_dir;
  if (flags.jobs > 0) config["jobs"] = flags.jobs;
  return config;
}

int run(const std::string& command, const GlobalFlags& flags, bool quiet) {
  json config = load_config(flags);
  char* summary = nullptr;
  blift_status_t status = blift_run(command.c_str(), config.dump().c_str(), &summary);
  if (status != BLIFT_OK) {
    std::cerr << "error: " << blift_last_error() << "\n";
    return status == BLIFT_ERR_VALIDATION || status == BLIFT_ERR_PARSE ? 2 : 1;
  }
  if (summary) {
    if (!quiet) {
      // Rendered tables read better un-escaped; print them separately.
      try {
        json s = json::parse(summary);
        if (s.contains("rendered")) {
          std::cout << s["rendered"].get<std::string>() << "\n";
          s.erase("rendered");
          std::cout << s.dump(2) << "\n";
        } else {
          std::cout << summary;
        }
      } catch (...) {
        std::cout << summary;
      }
    }
    blift_string_free(summary);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blift: estimators and simulation for eligibility-constrained "
               "bipartite experiments"};
  app.set_version_flag("--version", std::string(blift_version()));
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalFlags flags;
  bool quiet = false;
  app.add_option("--config", flags.config_path, "JSON config (or manifest) file");
  app.add_option("--seed", flags.seed, "override the base seed");
  app.add_option("--out", flags.out_dir, "override the output directory");
  app.add_option("--jobs", flags.jobs,
                 "worker threads (default: $BLIFT_JOBS, then hardware)");
  app.add_flag("--quiet", quiet, "suppress the summary on stdout");

  std::string command;
  for (const char* name : {"simulate", "estimate", "project", "report"}) {
    auto* sub = app.add_subcommand(
        name, std::string("run the ") + name + " stage of the pipeline");
    sub->callback([&command, name] { command = name; });
  }

  CLI11_PARSE(app, argc, argv);
  return run(command, flags, quiet);
}
