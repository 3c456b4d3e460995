#ifndef CRASHML_DATA_MODEL_HPP
#define CRASHML_DATA_MODEL_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crashml/types.hpp"

namespace crashml {

// One road-section record for one calendar year.
struct RawObservation {
  std::int64_t section_number = 0;
  int year = 0;
  double crash_count = 0.0;       // non-negative yearly count
  double section_length = 0.0;    // miles, > 0
  int shoulder = 0;               // 0/1
  double speed_limit = 0.0;       // mph
  int on_street_parking = 0;      // 0/1
  int one_way = 0;                // 0/1
  int num_lanes = 1;
  std::string road_class;
  int median = 0;                 // 0/1
  double lane_width = 0.0;        // feet
  int cbd = 0;                    // 0/1
  double aadt_per_lane = 0.0;     // veh/day/lane, > 0
};

// Across-year aggregate of one section. Counts and volumes are means;
// static attributes come from the latest year, with a flag when years
// disagree on any of them.
struct AggregatedSection {
  std::int64_t section_number = 0;
  double crash_count = 0.0;     // mean over years
  double aadt_per_lane = 0.0;   // mean over years
  double section_length = 0.0;
  int shoulder = 0;
  double speed_limit = 0.0;
  int on_street_parking = 0;
  int one_way = 0;
  int num_lanes = 1;
  std::string road_class;
  int median = 0;
  double lane_width = 0.0;
  int cbd = 0;
  int years_observed = 0;
  bool attribute_conflict = false;
};

// Constants of the exposure-normalized crash rate:
//   rate = count / (length * (lanes * aadt)^p) * scale / days^p
struct RateParameters {
  double exposure_p = 0.8;
  double scale = 1e6;
  double days = 365.0;
};

// Input column names; defaults match the canonical field names.
struct CsvSchema {
  std::string section_number = "section_number";
  std::string year = "year";
  std::string crash_count = "crash_count";
  std::string section_length = "section_length";
  std::string shoulder = "shoulder";
  std::string speed_limit = "speed_limit";
  std::string on_street_parking = "on_street_parking";
  std::string one_way = "one_way";
  std::string num_lanes = "num_lanes";
  std::string road_class = "road_class";
  std::string median = "median";
  std::string lane_width = "lane_width";
  std::string cbd = "cbd";
  std::string aadt_per_lane = "aadt_per_lane";
};

struct IngestReport {
  std::int64_t rows_read = 0;
  std::int64_t accepted = 0;
  std::int64_t dropped_missing = 0;      // empty required cell
  std::int64_t dropped_unparsable = 0;   // malformed numeric cell
  std::int64_t dropped_invalid = 0;      // range/indicator constraint violated
  std::int64_t dropped_duplicate = 0;    // repeated (section, year), first kept
};

struct IngestResult {
  std::vector<RawObservation> records;
  IngestReport report;
};

// Reads a UTF-8 CSV with a header row. Bad rows are dropped and counted in
// the report; a missing required column is a fatal schema error.
IngestResult ingest_csv(std::istream& source, const CsvSchema& schema = {});

// Groups records by section and averages counts/volumes across years.
// Output is ordered by section number. Throws on empty input.
std::vector<AggregatedSection> aggregate_sections(const std::vector<RawObservation>& records);

// Crash rate per the formula above. Throws std::domain_error on non-positive
// length or AADT, lanes < 1, or a negative count.
double crash_rate(double crash_count, double section_length, int num_lanes, double aadt_per_lane,
                  const RateParameters& params = {});

// Builds the model-ready table. Rate mode predicts the crash rate from
// {shoulder, speed_limit, on_street_parking, one_way, road_class, median,
// lane_width, cbd}; counts mode predicts the mean count and additionally
// includes {section_length, num_lanes, aadt_per_lane}. Setting
// include_exposure forces the three exposure columns into rate mode too.
Dataset make_dataset(const std::vector<AggregatedSection>& sections, ResponseMode mode,
                     const RateParameters& params = {}, bool include_exposure = false);

// Uniform random partition without replacement; train size rounds to
// fraction*n and is clamped so both sides stay non-empty. Row order within
// each side follows the input dataset.
std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset, double train_fraction,
                                             std::uint64_t seed);

// Planted ground truth emitted next to synthetic data so tests and reports
// can check what the generator encoded.
struct SyntheticTruth {
  std::map<double, double> effect;     // lane width -> target mean yearly intensity
  double noise_sd = 0.0;
  int years = 0;
  std::vector<double> section_width;   // per section
  std::vector<double> latent;          // per section mean yearly crash intensity
};

struct SyntheticData {
  std::vector<RawObservation> records;
  SyntheticTruth truth;
};

// Draws n_sections sections with independent plausible attributes. Lane
// widths come from the effect map's keys. The effect map and noise_sd are in
// exposure-normalized rate units: the latent yearly count intensity is
// (effect[width] + attribute term) scaled by the section's traffic exposure,
// and yearly counts are noisy, rounded, and clamped at zero. Deterministic
// given seed.
SyntheticData generate_synthetic(int n_sections, const std::map<double, double>& effect,
                                 double noise_sd, std::uint64_t seed, int years = 10);

nlohmann::json ingest_report_to_json(const IngestReport& report);
nlohmann::json synthetic_truth_to_json(const SyntheticTruth& truth);

// CSV round trip for generated data (header uses the schema's column names).
std::string records_to_csv(const std::vector<RawObservation>& records,
                           const CsvSchema& schema = {});

}  // namespace crashml

#endif  // CRASHML_DATA_MODEL_HPP
