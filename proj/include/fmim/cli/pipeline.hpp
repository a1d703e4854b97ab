#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fmim/cli/config.hpp"

namespace fmim::cli {

/// Subcommands accepted by run_command.
const std::vector<std::string>& command_names();

/// Executes one subcommand against a validated configuration, writing all
/// artifacts below out (created if needed). The normalized configuration and
/// a provenance record are written first. Returns a process exit status; on
/// failure an error record (error.txt) is left next to any partial outputs.
///
///   run            stages listed in run.stages
///   partition      manifest.csv, labels.csv, heterogeneity.csv/.svg
///   pretrain       pretrain_r<T>.ckpt, metrics_pretrain.csv, loss_pretrain.svg
///   finetune       finetune_r<T>.ckpt, metrics_finetune.csv, loss/accuracy SVGs
///   evaluate       evaluation.csv, confusion.csv
///   gradcheck      gradcheck.csv
///   ablate-mask    mask_ablation.csv
///   ablate-rounds  rounds_ablation.csv, rounds_ablation.svg
///   compare        compare.csv
int run_command(const std::string& command, const ExperimentConfig& config,
                const std::string& normalized, const std::filesystem::path& out);

}  // namespace fmim::cli
