#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mpml/experiment.hpp"

namespace {

// --override key=value[,value...]
void apply_override(mpml::exp::KeyValueConfig& kv, const std::string& text) {
  auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0)
    throw mpml::InputError("--override expects key=value, got '" + text + "'");
  const std::string key = text.substr(0, eq);
  std::string value = text.substr(eq + 1);
  for (char& c : value) {
    if (c == ',') c = ' ';
  }
  std::vector<std::string> tokens;
  std::string token;
  for (char c : value + " ") {
    if (c == ' ') {
      if (!token.empty()) tokens.push_back(token);
      token.clear();
    } else {
      token += c;
    }
  }
  if (tokens.empty()) throw mpml::InputError("--override " + key + ": empty value");
  kv.set(key, tokens);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-party learning contamination testbed"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run the scenario sweep described by a config file");
  std::string config_path;
  run->add_option("config", config_path, "Experiment config file")->required();
  std::vector<std::string> overrides;
  run->add_option("--override", overrides, "Override a config entry (key=value)");
  std::string out_dir;
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  int jobs = 1;
  run->add_option("--jobs", jobs, "Scenarios to run in parallel");

  CLI11_PARSE(app, argc, argv);

  try {
    mpml::exp::KeyValueConfig kv = mpml::exp::KeyValueConfig::parse_file(config_path);
    for (const std::string& ov : overrides) apply_override(kv, ov);
    mpml::exp::ExperimentConfig cfg = mpml::exp::ExperimentConfig::from_kv(kv);
    mpml::exp::RunOptions opts;
    opts.jobs = jobs;
    opts.out_override = out_dir;
    mpml::exp::RunOutput output = mpml::exp::run_experiment(cfg, opts);
    std::printf("wrote %zu rows\n", output.rows.size());
    std::printf("  %s\n", output.paths.results_csv.c_str());
    std::printf("  %s\n", output.paths.summary_csv.c_str());
    std::printf("  %s\n", output.paths.results_txt.c_str());
    std::printf("  %s\n", output.paths.manifest_txt.c_str());
    std::printf("  %s\n", output.paths.timing_csv.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
