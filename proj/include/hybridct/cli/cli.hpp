// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace hybridct::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// `$HYBRIDCT_RUN_ROOT`, or `runs` when unset. Relative training run directories live under it.
std::filesystem::path run_root();

/// Runs one subcommand (synth, preprocess, train3d, train25d, predict, ensemble, evaluate,
/// report). Never throws; failures are reported on `err` and mapped to the exit codes above.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hybridct::cli
