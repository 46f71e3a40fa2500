// SPDX-License-Identifier: Apache-2.0
// Command-line experiment runner.
//
//   splitnn run <config> [--seed N] [--output-dir DIR] [--transport KIND]
//   splitnn validate <config>
//   splitnn compare <dir>
//
// The output directory resolves as: --output-dir flag, then the
// SPLITNN_OUTPUT_DIR environment variable, then the config file.

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "splitnn/run.hpp"

namespace {

void usage(std::FILE* to) {
  std::fprintf(to,
               "usage:\n"
               "  splitnn run <config> [--seed N] [--output-dir DIR] [--transport KIND]\n"
               "  splitnn validate <config>\n"
               "  splitnn compare <dir>\n"
               "\n"
               "transport kinds: inprocess | tcp\n"
               "environment: %s overrides the config output_dir (the --output-dir\n"
               "flag overrides both)\n",
               splitnn::kOutputDirEnvVar);
}

struct Flags {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::string> transport;
};

Flags parse_flags(const std::vector<std::string>& args, std::size_t from) {
  Flags f;
  for (std::size_t i = from; i < args.size(); ++i) {
    auto need_value = [&](const char* name) -> const std::string& {
      if (i + 1 >= args.size())
        throw splitnn::ConfigError(std::string(name) + " needs a value");
      return args[++i];
    };
    if (args[i] == "--seed") {
      f.seed = std::stoull(need_value("--seed"));
    } else if (args[i] == "--output-dir") {
      f.output_dir = need_value("--output-dir");
    } else if (args[i] == "--transport") {
      f.transport = need_value("--transport");
    } else {
      throw splitnn::ConfigError("unknown flag '" + args[i] + "'");
    }
  }
  return f;
}

int cmd_run(const std::string& config_path, const Flags& flags) {
  using namespace splitnn;
  ExperimentConfig cfg = parse_experiment_config(read_text_file(config_path));
  if (flags.seed) cfg.options.seed = *flags.seed;
  if (flags.transport) cfg.transport = parse_transport(*flags.transport);
  cfg.output_dir = effective_output_dir(cfg, flags.output_dir);

  RunOutcome out = run_experiment(cfg);
  std::fputs(out.summary.c_str(), stdout);
  std::printf("\nartifacts written to %s\n", out.dir.string().c_str());
  return 0;
}

int cmd_validate(const std::string& config_path) {
  using namespace splitnn;
  ExperimentConfig cfg = parse_experiment_config(read_text_file(config_path));
  auto bad = validate_experiment_config(cfg);
  if (bad.empty()) {
    std::printf("ok: %s is a valid configuration\n", config_path.c_str());
    return 0;
  }
  std::fprintf(stderr, "error: %zu problem(s) in %s:\n", bad.size(), config_path.c_str());
  for (const auto& b : bad) std::fprintf(stderr, "  - %s\n", b.c_str());
  return 1;
}

int cmd_compare(const std::string& dir) {
  std::string text = splitnn::write_comparison(dir);
  std::fputs(text.c_str(), stdout);
  std::printf("\nwrote %s/curves.csv and %s/summary.txt\n", dir.c_str(), dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty() || args[0] == "--help" || args[0] == "-h") {
    usage(args.empty() ? stderr : stdout);
    return args.empty() ? 2 : 0;
  }
  try {
    const std::string& cmd = args[0];
    if (cmd == "run") {
      if (args.size() < 2) throw splitnn::ConfigError("run needs a config file");
      return cmd_run(args[1], parse_flags(args, 2));
    }
    if (cmd == "validate") {
      if (args.size() != 2) throw splitnn::ConfigError("validate needs exactly a config file");
      return cmd_validate(args[1]);
    }
    if (cmd == "compare") {
      if (args.size() != 2) throw splitnn::ConfigError("compare needs exactly a directory");
      return cmd_compare(args[1]);
    }
    std::fprintf(stderr, "error: unknown command '%s'\n", cmd.c_str());
    usage(stderr);
    return 2;
  } catch (const splitnn::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
