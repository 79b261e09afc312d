#pragma once

// Orchestration of the evaluation protocol: for each (shots, seed) cell,
// sample an episode, train the chosen head, pick the blending weight, and
// score the full test split.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "svl/adapters.hpp"
#include "svl/embedding_store.hpp"
#include "svl/eval_report.hpp"
#include "svl/fusion.hpp"
#include "svl/protocol.hpp"
#include "svl/pseudolabel.hpp"

namespace svl {

enum class Method { kZeroShot, kLinearProbe, kClipAdapter, kSvlAdapter, kSvlAdapterAuto, kZeroShotSvl };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
/// Methods that use no labeled training data (and ignore shots).
bool is_zero_shot_method(Method m);

enum class LambdaMode { kAuto, kSweep, kFixed };

struct LambdaSetting {
  LambdaMode mode = LambdaMode::kSweep;
  double value = 0.0;  // used when mode == kFixed
};

/// "auto", "sweep", or a number in [0, 1].
LambdaSetting parse_lambda_setting(std::string_view text);
std::string to_string(const LambdaSetting& s);

struct RunSpec {
  std::filesystem::path manifest;
  Method method = Method::kSvlAdapterAuto;
  std::vector<std::size_t> shots{protocol::kShots.begin(), protocol::kShots.end()};
  std::vector<std::uint64_t> seeds{protocol::kSeeds.begin(), protocol::kSeeds.end()};
  double temperature = protocol::kTemperature;
  // Honored by svl-adapter; svl-adapter-auto and zero-shot-svl always use auto.
  LambdaSetting lambda;
  std::size_t k = protocol::kPseudoLabelsPerClass;
  TrainConfig train;
  ClipAdapterConfig clip;
  std::filesystem::path output_dir;

  void validate() const;
};

/// Loads the manifest. Zero-shot methods load only the test labels, and only
/// for scoring.
Dataset load_for_method(const std::filesystem::path& manifest, Method method);

struct CellOutput {
  RunResult result;
  ProbabilityMatrix test_probs;
  std::optional<AdapterParams> adapter;
  std::optional<SweepResult> sweep;
  std::optional<PseudoLabelSet> pseudo_labels;
  std::vector<std::string> warnings;
};

CellOutput run_cell(const Dataset& ds, const RunSpec& spec, std::size_t shots, std::uint64_t seed);

struct ExperimentOutput {
  std::vector<RunResult> runs;  // sorted by (method, shots, seed)
  std::vector<AggregateResult> aggregates;
  std::vector<std::string> warnings;
};

/// Runs the whole grid. When spec.output_dir is set, writes runs.csv,
/// report.csv, report.md and one sweep_<shots>_<seed>.csv per swept cell.
ExperimentOutput run_experiment(const RunSpec& spec);

}  // namespace svl
