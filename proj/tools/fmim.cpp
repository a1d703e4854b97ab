#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "fmim/cli/config.hpp"
#include "fmim/cli/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Federated masked image modeling: pre-training, fine-tuning and experiment recipes"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::string seed;
  std::string precision;
  std::string threads;

  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", config_path, "Experiment configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Master seed (overrides run.seed)");
    sub->add_option("--precision", precision, "Floating-point width (overrides run.precision)")
        ->check(CLI::IsMember({"32", "64"}));
    sub->add_option("--threads", threads, "Worker threads for client updates (overrides run.threads)");
    if (needs_out) sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
  };

  for (const auto& name : fmim::cli::command_names()) add_common(app.add_subcommand(name), true);
  auto* validate = app.add_subcommand("validate", "Check a configuration and print it normalized");
  add_common(validate, false);
  auto* schema = app.add_subcommand("schema", "Print the configuration schema");

  CLI11_PARSE(app, argc, argv);

  if (schema->parsed()) {
    std::cout << fmim::cli::schema_text();
    return 0;
  }

  fmim::cli::Overrides overrides;
  if (!seed.empty()) overrides["run.seed"] = seed;
  if (!precision.empty()) overrides["run.precision"] = precision;
  if (!threads.empty()) overrides["run.threads"] = threads;

  const auto result = fmim::cli::validate_config(config_path, overrides);
  if (!result.ok()) {
    std::cerr << config_path << ": invalid configuration\n" << fmim::cli::format_issues(result.issues);
    return 2;
  }
  if (validate->parsed()) {
    std::cout << result.normalized;
    return 0;
  }
  const auto* sub = app.get_subcommands().front();
  return fmim::cli::run_command(sub->get_name(), *result.config, result.normalized, out_dir);
}
