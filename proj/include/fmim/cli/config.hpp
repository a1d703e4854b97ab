#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fmim/data.hpp"
#include "fmim/fed.hpp"
#include "fmim/model/geometry.hpp"

namespace fmim::cli {

/// Settings of one experiment. Produced only by validate_config, so every
/// instance has passed the cross-field checks.
struct ExperimentConfig {
  // [run]
  std::uint64_t seed = 0;
  unsigned precision = 32;
  std::size_t threads = 1;
  std::vector<std::string> stages;
  std::string name;

  // [data]
  std::string source;
  SynthOptions synth;
  std::filesystem::path train_images, train_labels, test_images, test_labels, public_images;

  // [model]
  ImageGeometry geometry;
  ModelDims dims;

  // [partition]
  PartitionSpec partition;
  bool iid = false;
  std::filesystem::path manifest;
  double label_fraction = 1.0;

  // [pretrain], [finetune]
  bool pretrain_enabled = true;
  FedConfig pretrain;
  std::size_t tokenizer_iterations = 50;
  FedConfig finetune;
  bool finetune_from_pretrained = true;

  // [ablation]
  std::vector<double> mask_ratios;
  std::vector<std::string> ablation_methods;
  std::vector<std::size_t> pretrain_rounds_grid;
  std::vector<std::size_t> scratch_rounds_grid;
  std::vector<std::string> compare_methods;
  std::vector<double> label_fractions;
};

struct ConfigIssue {
  std::size_t line = 0;  // 0: no specific line (e.g. a missing key)
  std::string key;       // section.key
  std::string message;
};

struct ConfigResult {
  std::optional<ExperimentConfig> config;
  std::vector<ConfigIssue> issues;
  /// Fully defaulted canonical text; empty when issues were found.
  std::string normalized;

  bool ok() const { return config.has_value(); }
};

/// "section.key" -> value pairs that replace file values, as command-line
/// flags do.
using Overrides = std::map<std::string, std::string>;

/// Parses "[section]" headers and "key = value" lines ('#' starts a comment
/// line). Reports unknown keys, duplicates, type errors, missing required
/// keys and constraint violations with line references.
ConfigResult validate_config_text(const std::string& text, const Overrides& overrides = {});
ConfigResult validate_config(const std::filesystem::path& path, const Overrides& overrides = {});

/// One line per issue: "line N: section.key: message".
std::string format_issues(const std::vector<ConfigIssue>& issues);

/// Documented schema (sections, keys, types, defaults) as text.
std::string schema_text();

}  // namespace fmim::cli
