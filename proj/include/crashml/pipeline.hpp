#ifndef CRASHML_PIPELINE_HPP
#define CRASHML_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crashml/counterfactual.hpp"
#include "crashml/data_model.hpp"
#include "crashml/ensemble.hpp"
#include "crashml/metrics.hpp"

namespace crashml {

struct GeneratorSpec {
  int sections = 200;
  int years = 10;
  double noise_sd = 4.0;
  // rate-unit group levels; default ordering is 10 > 9 > 12 > 11
  std::map<double, double> effect = {{9, 28.0}, {10, 31.0}, {11, 20.0}, {12, 23.0}};
};

struct RunConfig {
  std::optional<std::string> input;        // CSV path
  std::optional<GeneratorSpec> generator;  // exactly one of input/generator
  CsvSchema schema;

  ResponseMode mode = ResponseMode::Rate;
  bool counts_replication = false;
  bool rate_include_exposure = false;
  RateParameters rate;

  double train_fraction = 0.8;
  int k_trees = 200;
  double learning_rate = 1.0;
  GrowConfig forest_grow;
  GrowConfig boost_grow = boost_stage_defaults();
  int histogram_bins = 20;
  std::vector<double> widths = {9, 10, 11, 12};
  std::vector<int> sensitivity_trees = {1, 5, 10, 25, 50, 100, 150, 200};

  std::uint64_t seed = 42;
  int threads = 1;
  std::string out_dir = "out";
};

// Flat key=value document; '#' starts a comment. Unknown keys and malformed
// values are errors that name the key.
RunConfig parse_run_config(const std::filesystem::path& path);
RunConfig parse_run_config_text(const std::string& text);

// Full range validation; throws std::invalid_argument naming the field.
void validate_config(const RunConfig& config);

// Resolved-config echo used by the run manifest.
nlohmann::json config_to_json(const RunConfig& config);

struct GenerateOutputs {
  std::filesystem::path csv_path;
  std::filesystem::path truth_path;
};

// Writes synthetic.csv and generator_truth.json under out_dir.
GenerateOutputs cmd_generate(const RunConfig& config);

struct RunOutputs {
  IngestReport ingest;
  AdequacyTable adequacy;
  std::vector<SensitivityCurve> sensitivity;
  ImportanceReport importance;
  EffectReport effect;                  // primary-mode simulation
  std::optional<EffectReport> counts_effect;
  std::string winner;
  std::vector<std::string> artifacts;   // file names written under out_dir
};

// Runs ingest -> aggregate -> dataset -> split -> train both families ->
// adequacy -> importance -> lane-width simulation (-> counts replication),
// writing every artifact atomically under out_dir. Errors carry the stage
// name.
RunOutputs cmd_run(const RunConfig& config);

}  // namespace crashml

#endif  // CRASHML_PIPELINE_HPP
