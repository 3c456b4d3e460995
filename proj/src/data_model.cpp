#include "crashml/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <istream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "crashml/rng.hpp"

namespace crashml {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc{} && res.ptr == end && std::isfinite(out);
}

bool parse_int(const std::string& cell, std::int64_t& out) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc{} && res.ptr == end;
}

// Shortest text that parses back to the same double (via the JSON dumper).
std::string format_double(double v) { return nlohmann::json(v).dump(); }

enum class Field {
  Section, Year, CrashCount, Length, Shoulder, SpeedLimit, Parking, OneWay,
  Lanes, RoadClass, Median, LaneWidth, Cbd, Aadt,
};

constexpr int kFieldCount = 14;

std::array<std::string, kFieldCount> schema_names(const CsvSchema& s) {
  return {s.section_number, s.year,   s.crash_count, s.section_length, s.shoulder,
          s.speed_limit,    s.on_street_parking, s.one_way, s.num_lanes, s.road_class,
          s.median,         s.lane_width, s.cbd, s.aadt_per_lane};
}

bool indicator_ok(double v) { return v == 0.0 || v == 1.0; }

}  // namespace

IngestResult ingest_csv(std::istream& source, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(source, line)) throw std::runtime_error("ingest_csv: empty input");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line = line.substr(3);  // UTF-8 BOM

  const auto header = split_line(line);
  const auto names = schema_names(schema);
  std::array<int, kFieldCount> col{};
  col.fill(-1);
  for (std::size_t c = 0; c < header.size(); ++c) {
    for (int f = 0; f < kFieldCount; ++f) {
      if (header[c] == names[static_cast<std::size_t>(f)]) col[static_cast<std::size_t>(f)] = static_cast<int>(c);
    }
  }
  for (int f = 0; f < kFieldCount; ++f) {
    if (col[static_cast<std::size_t>(f)] < 0) {
      throw std::runtime_error("ingest_csv: missing required column '" +
                               names[static_cast<std::size_t>(f)] + "'");
    }
  }

  IngestResult result;
  std::set<std::pair<std::int64_t, int>> seen;
  while (std::getline(source, line)) {
    if (trim(line).empty()) continue;
    ++result.report.rows_read;
    const auto cells = split_line(line);

    std::array<std::string, kFieldCount> raw;
    bool missing = false;
    for (int f = 0; f < kFieldCount; ++f) {
      const auto c = static_cast<std::size_t>(col[static_cast<std::size_t>(f)]);
      if (c >= cells.size() || cells[c].empty()) {
        missing = true;
        break;
      }
      raw[static_cast<std::size_t>(f)] = cells[c];
    }
    if (missing) {
      ++result.report.dropped_missing;
      continue;
    }

    RawObservation rec;
    std::int64_t year64 = 0;
    std::int64_t lanes64 = 0;
    double shoulder = 0, parking = 0, one_way = 0, median = 0, cbd = 0;
    const bool parsed =
        parse_int(raw[static_cast<std::size_t>(Field::Section)], rec.section_number) &&
        parse_int(raw[static_cast<std::size_t>(Field::Year)], year64) &&
        parse_double(raw[static_cast<std::size_t>(Field::CrashCount)], rec.crash_count) &&
        parse_double(raw[static_cast<std::size_t>(Field::Length)], rec.section_length) &&
        parse_double(raw[static_cast<std::size_t>(Field::Shoulder)], shoulder) &&
        parse_double(raw[static_cast<std::size_t>(Field::SpeedLimit)], rec.speed_limit) &&
        parse_double(raw[static_cast<std::size_t>(Field::Parking)], parking) &&
        parse_double(raw[static_cast<std::size_t>(Field::OneWay)], one_way) &&
        parse_int(raw[static_cast<std::size_t>(Field::Lanes)], lanes64) &&
        parse_double(raw[static_cast<std::size_t>(Field::Median)], median) &&
        parse_double(raw[static_cast<std::size_t>(Field::LaneWidth)], rec.lane_width) &&
        parse_double(raw[static_cast<std::size_t>(Field::Cbd)], cbd) &&
        parse_double(raw[static_cast<std::size_t>(Field::Aadt)], rec.aadt_per_lane);
    if (!parsed) {
      ++result.report.dropped_unparsable;
      continue;
    }
    rec.year = static_cast<int>(year64);
    rec.num_lanes = static_cast<int>(lanes64);
    rec.road_class = raw[static_cast<std::size_t>(Field::RoadClass)];

    const bool valid = rec.crash_count >= 0.0 && rec.section_length > 0.0 &&
                       rec.aadt_per_lane > 0.0 && rec.num_lanes >= 1 && indicator_ok(shoulder) &&
                       indicator_ok(parking) && indicator_ok(one_way) && indicator_ok(median) &&
                       indicator_ok(cbd);
    if (!valid) {
      ++result.report.dropped_invalid;
      continue;
    }
    rec.shoulder = static_cast<int>(shoulder);
    rec.on_street_parking = static_cast<int>(parking);
    rec.one_way = static_cast<int>(one_way);
    rec.median = static_cast<int>(median);
    rec.cbd = static_cast<int>(cbd);

    if (!seen.insert({rec.section_number, rec.year}).second) {
      ++result.report.dropped_duplicate;
      continue;
    }
    result.records.push_back(std::move(rec));
    ++result.report.accepted;
  }
  return result;
}

std::vector<AggregatedSection> aggregate_sections(const std::vector<RawObservation>& records) {
  if (records.empty()) throw std::invalid_argument("aggregate_sections: no records");

  std::map<std::int64_t, std::vector<const RawObservation*>> groups;
  for (const auto& rec : records) groups[rec.section_number].push_back(&rec);

  std::vector<AggregatedSection> out;
  out.reserve(groups.size());
  for (auto& [section, recs] : groups) {
    std::sort(recs.begin(), recs.end(),
              [](const RawObservation* a, const RawObservation* b) { return a->year < b->year; });
    AggregatedSection agg;
    agg.section_number = section;
    agg.years_observed = static_cast<int>(recs.size());
    double count_sum = 0.0, aadt_sum = 0.0;
    for (const auto* r : recs) {
      count_sum += r->crash_count;
      aadt_sum += r->aadt_per_lane;
    }
    agg.crash_count = count_sum / static_cast<double>(recs.size());
    agg.aadt_per_lane = aadt_sum / static_cast<double>(recs.size());

    const RawObservation& latest = *recs.back();
    agg.section_length = latest.section_length;
    agg.shoulder = latest.shoulder;
    agg.speed_limit = latest.speed_limit;
    agg.on_street_parking = latest.on_street_parking;
    agg.one_way = latest.one_way;
    agg.num_lanes = latest.num_lanes;
    agg.road_class = latest.road_class;
    agg.median = latest.median;
    agg.lane_width = latest.lane_width;
    agg.cbd = latest.cbd;
    for (const auto* r : recs) {
      if (r->section_length != latest.section_length || r->shoulder != latest.shoulder ||
          r->speed_limit != latest.speed_limit ||
          r->on_street_parking != latest.on_street_parking || r->one_way != latest.one_way ||
          r->num_lanes != latest.num_lanes || r->road_class != latest.road_class ||
          r->median != latest.median || r->lane_width != latest.lane_width ||
          r->cbd != latest.cbd) {
        agg.attribute_conflict = true;
        break;
      }
    }
    out.push_back(std::move(agg));
  }
  return out;
}

double crash_rate(double crash_count, double section_length, int num_lanes, double aadt_per_lane,
                  const RateParameters& params) {
  if (!(section_length > 0.0)) throw std::domain_error("crash_rate: section_length must be > 0");
  if (!(aadt_per_lane > 0.0)) throw std::domain_error("crash_rate: aadt_per_lane must be > 0");
  if (num_lanes < 1) throw std::domain_error("crash_rate: num_lanes must be >= 1");
  if (!(crash_count >= 0.0)) throw std::domain_error("crash_rate: crash_count must be >= 0");
  const double exposure = std::pow(static_cast<double>(num_lanes) * aadt_per_lane, params.exposure_p);
  return crash_count / (section_length * exposure) * params.scale /
         std::pow(params.days, params.exposure_p);
}

Dataset make_dataset(const std::vector<AggregatedSection>& sections, ResponseMode mode,
                     const RateParameters& params, bool include_exposure) {
  if (sections.empty()) throw std::invalid_argument("make_dataset: no sections");

  std::set<std::string> level_set;
  for (const auto& s : sections) level_set.insert(s.road_class);
  const std::vector<std::string> levels(level_set.begin(), level_set.end());
  auto level_index = [&](const std::string& name) {
    return static_cast<double>(
        std::distance(levels.begin(), std::find(levels.begin(), levels.end(), name)));
  };

  const bool exposure = mode == ResponseMode::Counts || include_exposure;
  Dataset ds;
  ds.mode = mode;
  if (exposure) ds.meta.push_back({"section_length", FeatureKind::Numeric, {}});
  ds.meta.push_back({"shoulder", FeatureKind::Numeric, {}});
  ds.meta.push_back({"speed_limit", FeatureKind::Numeric, {}});
  ds.meta.push_back({"on_street_parking", FeatureKind::Numeric, {}});
  ds.meta.push_back({"one_way", FeatureKind::Numeric, {}});
  if (exposure) ds.meta.push_back({"num_lanes", FeatureKind::Numeric, {}});
  ds.meta.push_back({"road_class", FeatureKind::Categorical, levels});
  ds.meta.push_back({"median", FeatureKind::Numeric, {}});
  ds.meta.push_back({"lane_width", FeatureKind::Numeric, {}});
  ds.meta.push_back({"cbd", FeatureKind::Numeric, {}});
  if (exposure) ds.meta.push_back({"aadt_per_lane", FeatureKind::Numeric, {}});

  const auto n = static_cast<Eigen::Index>(sections.size());
  const auto p = static_cast<Eigen::Index>(ds.meta.size());
  ds.features.resize(n, p);
  ds.response.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = sections[static_cast<std::size_t>(i)];
    Eigen::Index j = 0;
    if (exposure) ds.features(i, j++) = s.section_length;
    ds.features(i, j++) = s.shoulder;
    ds.features(i, j++) = s.speed_limit;
    ds.features(i, j++) = s.on_street_parking;
    ds.features(i, j++) = s.one_way;
    if (exposure) ds.features(i, j++) = s.num_lanes;
    ds.features(i, j++) = level_index(s.road_class);
    ds.features(i, j++) = s.median;
    ds.features(i, j++) = s.lane_width;
    ds.features(i, j++) = s.cbd;
    if (exposure) ds.features(i, j++) = s.aadt_per_lane;

    ds.response(i) = mode == ResponseMode::Rate
                         ? crash_rate(s.crash_count, s.section_length, s.num_lanes,
                                      s.aadt_per_lane, params)
                         : s.crash_count;
    if (!std::isfinite(ds.response(i)) || ds.response(i) < 0.0) {
      throw std::domain_error("make_dataset: non-finite or negative response");
    }
  }
  return ds;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset, double train_fraction,
                                             std::uint64_t seed) {
  const auto n = dataset.n_rows();
  if (n < 2) throw std::invalid_argument("train_test_split: need at least 2 rows");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_test_split: train_fraction must be in (0, 1)");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng = Rng::substream(seed, 0x73706c6974ULL);  // "split"
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }

  auto train_n = static_cast<Eigen::Index>(std::llround(train_fraction * static_cast<double>(n)));
  train_n = std::clamp<Eigen::Index>(train_n, 1, n - 1);

  std::vector<Eigen::Index> train_rows(order.begin(), order.begin() + train_n);
  std::vector<Eigen::Index> test_rows(order.begin() + train_n, order.end());
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());

  auto take = [&](const std::vector<Eigen::Index>& rows) {
    Dataset part;
    part.meta = dataset.meta;
    part.mode = dataset.mode;
    part.features.resize(static_cast<Eigen::Index>(rows.size()), dataset.n_features());
    part.response.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      part.features.row(static_cast<Eigen::Index>(i)) = dataset.features.row(rows[i]);
      part.response(static_cast<Eigen::Index>(i)) = dataset.response(rows[i]);
    }
    return part;
  };
  return {take(train_rows), take(test_rows)};
}

SyntheticData generate_synthetic(int n_sections, const std::map<double, double>& effect,
                                 double noise_sd, std::uint64_t seed, int years) {
  if (n_sections < 1) throw std::invalid_argument("generate_synthetic: n_sections must be >= 1");
  if (noise_sd < 0.0) throw std::invalid_argument("generate_synthetic: noise_sd must be >= 0");
  if (years < 1) throw std::invalid_argument("generate_synthetic: years must be >= 1");
  if (effect.empty()) throw std::invalid_argument("generate_synthetic: empty effect map");

  std::vector<double> widths;
  widths.reserve(effect.size());
  for (const auto& [w, _] : effect) widths.push_back(w);

  static const std::array<const char*, 3> kRoadClasses = {"arterial", "collector", "local"};
  constexpr int kBaseYear = 2006;

  SyntheticData out;
  out.truth.effect = effect;
  out.truth.noise_sd = noise_sd;
  out.truth.years = years;
  out.records.reserve(static_cast<std::size_t>(n_sections) * static_cast<std::size_t>(years));

  for (int s = 0; s < n_sections; ++s) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(s));
    RawObservation base;
    base.section_number = s + 1;
    base.section_length = 0.3 + 0.01 * static_cast<double>(rng.below(171));  // 0.30 .. 2.00 mi
    base.shoulder = static_cast<int>(rng.below(2));
    base.speed_limit = 25.0 + 5.0 * static_cast<double>(rng.below(5));
    base.on_street_parking = rng.bernoulli(0.3) ? 1 : 0;
    base.one_way = rng.bernoulli(0.2) ? 1 : 0;
    base.num_lanes = 1 + static_cast<int>(rng.below(4));
    base.road_class = kRoadClasses[rng.below(kRoadClasses.size())];
    base.median = rng.bernoulli(0.4) ? 1 : 0;
    base.lane_width = widths[rng.below(widths.size())];
    base.cbd = rng.bernoulli(0.25) ? 1 : 0;
    base.aadt_per_lane = static_cast<double>(3000 + rng.below(12001));  // 3000 .. 15000

    // The effect map and noise_sd are in exposure-normalized rate units; the
    // yearly count intensity scales them by the section's exposure (the
    // default rate normalization), so counts grow with traffic volume. The
    // attribute term is identically distributed across width groups, which
    // keeps the planted group means in their configured order.
    const double attribute_term = 0.35 * (base.speed_limit - 35.0) / 5.0 +
                                  0.5 * (base.aadt_per_lane - 9000.0) / 6000.0 +
                                  0.4 * (static_cast<double>(base.median) - 0.5) +
                                  0.3 * (static_cast<double>(base.cbd) - 0.5);
    const double rate_level = std::max(0.0, effect.at(base.lane_width) + attribute_term);
    const double exposure =
        base.section_length *
        std::pow(static_cast<double>(base.num_lanes) * base.aadt_per_lane, 0.8) *
        std::pow(365.0, 0.8) / 1e6;
    const double latent = rate_level * exposure;
    out.truth.section_width.push_back(base.lane_width);
    out.truth.latent.push_back(latent);

    for (int y = 0; y < years; ++y) {
      RawObservation rec = base;
      rec.year = kBaseYear + y;
      const double noisy = (rate_level + noise_sd * rng.normal()) * exposure;
      rec.crash_count = std::max(0.0, std::round(noisy));
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

nlohmann::json ingest_report_to_json(const IngestReport& report) {
  return nlohmann::json{{"schema_version", 1},
                        {"rows_read", report.rows_read},
                        {"accepted", report.accepted},
                        {"dropped_missing", report.dropped_missing},
                        {"dropped_unparsable", report.dropped_unparsable},
                        {"dropped_invalid", report.dropped_invalid},
                        {"dropped_duplicate", report.dropped_duplicate}};
}

nlohmann::json synthetic_truth_to_json(const SyntheticTruth& truth) {
  nlohmann::json effect = nlohmann::json::object();
  for (const auto& [w, v] : truth.effect) {
    char key[48];
    std::snprintf(key, sizeof(key), "%.10g", w);
    effect[key] = v;
  }
  return nlohmann::json{{"schema_version", 1},
                        {"effect", std::move(effect)},
                        {"noise_sd", truth.noise_sd},
                        {"years", truth.years},
                        {"section_width", truth.section_width},
                        {"latent", truth.latent}};
}

std::string records_to_csv(const std::vector<RawObservation>& records, const CsvSchema& schema) {
  std::string out;
  const auto names = schema_names(schema);
  for (int f = 0; f < kFieldCount; ++f) {
    if (f > 0) out += ',';
    out += names[static_cast<std::size_t>(f)];
  }
  out += '\n';
  for (const auto& r : records) {
    out += std::to_string(r.section_number);
    out += ',' + std::to_string(r.year);
    out += ',' + format_double(r.crash_count);
    out += ',' + format_double(r.section_length);
    out += ',' + std::to_string(r.shoulder);
    out += ',' + format_double(r.speed_limit);
    out += ',' + std::to_string(r.on_street_parking);
    out += ',' + std::to_string(r.one_way);
    out += ',' + std::to_string(r.num_lanes);
    out += ',' + r.road_class;
    out += ',' + std::to_string(r.median);
    out += ',' + format_double(r.lane_width);
    out += ',' + std::to_string(r.cbd);
    out += ',' + format_double(r.aadt_per_lane);
    out += '\n';
  }
  return out;
}

}  // namespace crashml
