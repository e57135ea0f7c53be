#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "beamgat/config.hpp"
#include "beamgat/errors.hpp"
#include "beamgat/pipeline.hpp"

namespace {

using namespace beamgat;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct Options {
  std::string config_path;
  std::string run_dir;
  std::vector<std::string> overrides;
  bool resume = false;
  std::string predictions_dir;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

config::RunConfig resolve(const Options& o) {
  std::string text = o.config_path.empty() ? "{}" : read_file(o.config_path);
  for (const auto& s : o.overrides) text = config::apply_override(text, s);
  auto c = config::from_json_text(text);
  if (!o.run_dir.empty()) c.run_dir = o.run_dir;
  return c;
}

int run(const std::string& command, const Options& o) {
  const auto c = resolve(o);
  pipeline::begin_command(c, command);
  auto& out = std::cout;
  if (command == "synth") {
    pipeline::cmd_synth(c, out);
  } else if (command == "dropout") {
    pipeline::cmd_dropout(c, out);
  } else if (command == "train") {
    pipeline::cmd_train(c, out, {o.resume});
  } else if (command == "eval") {
    pipeline::EvalOptions eo;
    eo.predictions_dir = o.predictions_dir;
    pipeline::cmd_eval(c, out, eo);
  } else if (command == "reconstruct") {
    pipeline::cmd_reconstruct(c, out);
  } else if (command == "sweep-k") {
    pipeline::cmd_sweep_k(c, out);
  } else {
    pipeline::cmd_info(c, out);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"beamgat: LiDAR beam-dropout reconstruction with graph attention"};
  app.require_subcommand(1);
  Options o;
  app.add_option("-c,--config", o.config_path, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("-r,--run-dir", o.run_dir, "Run directory (overrides output.run_dir)");
  app.add_option("-s,--set", o.overrides, "Config override, e.g. train.max_epochs=5 (repeatable)");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "Generate the synthetic benchmark frames"},
      {"dropout", "Filter, subsample and mask source frames"},
      {"train", "Train the reconstruction model"},
      {"eval", "Reconstruct and score the evaluation frames"},
      {"reconstruct", "Reconstruct the evaluation frames without scoring"},
      {"sweep-k", "Evaluate reconstruction quality and runtime over neighborhood sizes"},
      {"info", "Summarize the config and the run directory"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    if (name == "train") sub->add_flag("--resume", o.resume, "Continue from model.bin");
    if (name == "eval") {
      sub->add_option("--predictions", o.predictions_dir, "Score <dir>/<frame>.csv reconstructions instead")
          ->check(CLI::ExistingDirectory);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  const auto command = app.get_subcommands().front()->get_name();
  try {
    return run(command, o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}
