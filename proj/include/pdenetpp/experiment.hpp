#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pdenetpp/hybrid_model.hpp"
#include "pdenetpp/pde_solvers.hpp"

namespace pdenetpp::experiment {

/// Invalid configuration, missing input or incompatible artifacts (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int { kSuccess = 0, kFailure = 1, kConfigError = 2, kNumericalError = 3 };

struct Options {
  std::filesystem::path config;
  /// Overrides the config's "out" entry.
  std::optional<std::filesystem::path> out;
  /// Overrides the config's "seed" entry.
  std::optional<std::uint64_t> seed;
  /// Progress lines (e.g. per-epoch losses), if set.
  std::ostream* progress = nullptr;
};

// Each command reads a JSON config, writes its artifacts atomically into the
// output directory and returns that directory. Relative paths inside a config
// are resolved against the config file's directory; the output directory
// defaults to "out" next to the config.

/// train_clean.pdnx, train_noisy.pdnx, test.pdnx (optional), forcing.pdnx
/// (Navier-Stokes) and metadata.json.
std::filesystem::path cmd_generate(const Options& options);
/// checkpoint.json, parameters.pdnx and loss_history.csv.
std::filesystem::path cmd_train(const Options& options);
/// report.json and errors.csv.
std::filesystem::path cmd_evaluate(const Options& options);
/// trajectory.pdnx, frames/step_NNNNNN.pgm and frames.json.
std::filesystem::path cmd_rollout(const Options& options);
/// One CSV per scheme (step,tv,l2_error) and summary.json.
std::filesystem::path cmd_schemes(const Options& options);

/// Dispatches `command` and maps failures to exit codes: ConfigError,
/// std::invalid_argument, pdnx::FormatError and file-system errors give 2,
/// NumericalError gives 3, anything else 1. Messages go to `err`.
int run(std::string_view command, const Options& options, std::ostream& log, std::ostream& err);

/// Writes checkpoint.json and parameters.pdnx into `dir`.
void save_checkpoint(const HybridModel& model, const std::filesystem::path& dir);
/// Rebuilds a model from a checkpoint.json written by save_checkpoint.
HybridModel load_checkpoint(const std::filesystem::path& manifest);

/// JSON text of a model configuration and its inverse (strict keys).
std::string hybrid_config_to_json(const HybridConfig& config);
HybridConfig hybrid_config_from_json(std::string_view text);

/// 8-bit binary PGM of an [H,W] field, min-max normalized; a constant field
/// maps to mid-gray (128). Rows follow the first axis.
std::string encode_pgm(const Tensor& field);

}  // namespace pdenetpp::experiment
