#include "crashml/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "crashml/report_io.hpp"
#include "crashml/rng.hpp"
#include "crashml/stats.hpp"

namespace crashml {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    }
    if (!kv.emplace(key, value).second) {
      throw std::invalid_argument("config: duplicate key '" + key + "'");
    }
  }
  return kv;
}

double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size() || !std::isfinite(out)) {
    throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + value + "'");
  }
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& value) {
  std::int64_t out = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" + value +
                                "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config: key '" + key + "' expects true/false, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) items.push_back(trim(item));
  return items;
}


// Distinct sub-seeds per pipeline stage, all derived from the master seed.
std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t tag) {
  return Rng::substream(seed, 0x9e3779b9ULL, tag).next();
}

constexpr std::uint64_t kSplitTag = 1;
constexpr std::uint64_t kForestTag = 2;
constexpr std::uint64_t kBoostTag = 3;
constexpr std::uint64_t kImportanceTag = 4;
constexpr std::uint64_t kCountsTag = 5;

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
  const auto kv = parse_kv(text);
  RunConfig config;
  GeneratorSpec generator;
  bool saw_generator_key = false;
  std::map<double, double> effect;

  for (const auto& [key, value] : kv) {
    if (key == "input") {
      config.input = value;
    } else if (key == "synthetic_sections") {
      generator.sections = static_cast<int>(to_int(key, value));
      saw_generator_key = true;
    } else if (key == "synthetic_years") {
      generator.years = static_cast<int>(to_int(key, value));
      saw_generator_key = true;
    } else if (key == "synthetic_noise_sd") {
      generator.noise_sd = to_double(key, value);
      saw_generator_key = true;
    } else if (key.rfind("synthetic_effect_", 0) == 0) {
      const auto width_text = key.substr(std::string("synthetic_effect_").size());
      effect[to_double(key, width_text)] = to_double(key, value);
      saw_generator_key = true;
    } else if (key == "mode") {
      if (value == "rate") {
        config.mode = ResponseMode::Rate;
      } else if (value == "counts") {
        config.mode = ResponseMode::Counts;
      } else {
        throw std::invalid_argument("config: mode must be rate or counts");
      }
    } else if (key == "counts_replication") {
      config.counts_replication = to_bool(key, value);
    } else if (key == "rate_include_exposure") {
      config.rate_include_exposure = to_bool(key, value);
    } else if (key == "exposure_p") {
      config.rate.exposure_p = to_double(key, value);
    } else if (key == "rate_scale") {
      config.rate.scale = to_double(key, value);
    } else if (key == "rate_days") {
      config.rate.days = to_double(key, value);
    } else if (key == "train_fraction") {
      config.train_fraction = to_double(key, value);
    } else if (key == "trees") {
      config.k_trees = static_cast<int>(to_int(key, value));
    } else if (key == "learning_rate") {
      config.learning_rate = to_double(key, value);
    } else if (key == "min_leaf") {
      config.forest_grow.min_leaf = static_cast<int>(to_int(key, value));
    } else if (key == "max_depth") {
      config.forest_grow.max_depth = static_cast<int>(to_int(key, value));
    } else if (key == "mtry") {
      config.forest_grow.mtry = static_cast<int>(to_int(key, value));
    } else if (key == "min_gain") {
      config.forest_grow.min_gain = to_double(key, value);
    } else if (key == "boost_min_leaf") {
      config.boost_grow.min_leaf = static_cast<int>(to_int(key, value));
    } else if (key == "boost_max_depth") {
      config.boost_grow.max_depth = static_cast<int>(to_int(key, value));
    } else if (key == "boost_min_gain") {
      config.boost_grow.min_gain = to_double(key, value);
    } else if (key == "histogram_bins") {
      config.histogram_bins = static_cast<int>(to_int(key, value));
    } else if (key == "widths") {
      config.widths.clear();
      for (const auto& item : split_list(value)) config.widths.push_back(to_double(key, item));
    } else if (key == "sensitivity_trees") {
      config.sensitivity_trees.clear();
      for (const auto& item : split_list(value)) {
        config.sensitivity_trees.push_back(static_cast<int>(to_int(key, item)));
      }
    } else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(to_int(key, value));
    } else if (key == "threads") {
      config.threads = static_cast<int>(to_int(key, value));
    } else if (key == "out") {
      config.out_dir = value;
    } else if (key.rfind("col_", 0) == 0) {
      const auto field = key.substr(4);
      auto assign = [&](std::string CsvSchema::* member) { config.schema.*member = value; };
      if (field == "section_number") assign(&CsvSchema::section_number);
      else if (field == "year") assign(&CsvSchema::year);
      else if (field == "crash_count") assign(&CsvSchema::crash_count);
      else if (field == "section_length") assign(&CsvSchema::section_length);
      else if (field == "shoulder") assign(&CsvSchema::shoulder);
      else if (field == "speed_limit") assign(&CsvSchema::speed_limit);
      else if (field == "on_street_parking") assign(&CsvSchema::on_street_parking);
      else if (field == "one_way") assign(&CsvSchema::one_way);
      else if (field == "num_lanes") assign(&CsvSchema::num_lanes);
      else if (field == "road_class") assign(&CsvSchema::road_class);
      else if (field == "median") assign(&CsvSchema::median);
      else if (field == "lane_width") assign(&CsvSchema::lane_width);
      else if (field == "cbd") assign(&CsvSchema::cbd);
      else if (field == "aadt_per_lane") assign(&CsvSchema::aadt_per_lane);
      else throw std::invalid_argument("config: unknown column mapping '" + key + "'");
    } else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }

  if (saw_generator_key) {
    if (!effect.empty()) generator.effect = std::move(effect);
    config.generator = std::move(generator);
  }
  return config;
}

RunConfig parse_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config_text(buffer.str());
}

void validate_config(const RunConfig& config) {
  if (config.input.has_value() == config.generator.has_value()) {
    throw std::invalid_argument(
        "config: exactly one of 'input' or the synthetic_* generator block is required");
  }
  if (config.generator) {
    const auto& g = *config.generator;
    if (g.sections < 1) throw std::invalid_argument("config: synthetic_sections must be >= 1");
    if (g.years < 1) throw std::invalid_argument("config: synthetic_years must be >= 1");
    if (g.noise_sd < 0) throw std::invalid_argument("config: synthetic_noise_sd must be >= 0");
    if (g.effect.size() < 1) throw std::invalid_argument("config: empty synthetic effect map");
  }
  if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0)) {
    throw std::invalid_argument("config: train_fraction must be in (0, 1)");
  }
  if (config.k_trees < 1) throw std::invalid_argument("config: trees must be >= 1");
  if (!(config.learning_rate > 0.0 && config.learning_rate <= 1.0)) {
    throw std::invalid_argument("config: learning_rate must be in (0, 1]");
  }
  if (config.forest_grow.min_leaf < 1) throw std::invalid_argument("config: min_leaf must be >= 1");
  if (config.forest_grow.min_gain < 0) throw std::invalid_argument("config: min_gain must be >= 0");
  if (config.forest_grow.max_depth && *config.forest_grow.max_depth < 0) {
    throw std::invalid_argument("config: max_depth must be >= 0");
  }
  if (config.forest_grow.mtry && *config.forest_grow.mtry < 1) {
    throw std::invalid_argument("config: mtry must be >= 1");
  }
  if (config.boost_grow.min_leaf < 1) {
    throw std::invalid_argument("config: boost_min_leaf must be >= 1");
  }
  if (config.histogram_bins < 1) throw std::invalid_argument("config: histogram_bins must be >= 1");
  if (config.widths.empty()) throw std::invalid_argument("config: widths must be non-empty");
  if (config.sensitivity_trees.empty()) {
    throw std::invalid_argument("config: sensitivity_trees must be non-empty");
  }
  for (std::size_t i = 0; i + 1 < config.sensitivity_trees.size(); ++i) {
    if (config.sensitivity_trees[i] >= config.sensitivity_trees[i + 1]) {
      throw std::invalid_argument("config: sensitivity_trees must be strictly increasing");
    }
  }
  if (config.sensitivity_trees.front() < 1) {
    throw std::invalid_argument("config: sensitivity_trees must be >= 1");
  }
  if (!(config.rate.exposure_p > 0.0 && config.rate.exposure_p <= 1.0)) {
    throw std::invalid_argument("config: exposure_p must be in (0, 1]");
  }
  if (!(config.rate.scale > 0.0)) throw std::invalid_argument("config: rate_scale must be > 0");
  if (!(config.rate.days > 0.0)) throw std::invalid_argument("config: rate_days must be > 0");
  if (config.threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  if (config.out_dir.empty()) throw std::invalid_argument("config: out must be non-empty");
}

nlohmann::json config_to_json(const RunConfig& config) {
  nlohmann::json j;
  if (config.input) {
    j["input"] = *config.input;
  } else if (config.generator) {
    nlohmann::json effect = nlohmann::json::object();
    for (const auto& [w, v] : config.generator->effect) {
      char key[48];
      std::snprintf(key, sizeof(key), "%.10g", w);
      effect[key] = v;
    }
    j["synthetic"] = {{"sections", config.generator->sections},
                      {"years", config.generator->years},
                      {"noise_sd", config.generator->noise_sd},
                      {"effect", std::move(effect)}};
  }
  j["mode"] = config.mode == ResponseMode::Rate ? "rate" : "counts";
  j["counts_replication"] = config.counts_replication;
  j["rate_include_exposure"] = config.rate_include_exposure;
  j["rate"] = {{"exposure_p", config.rate.exposure_p},
               {"scale", config.rate.scale},
               {"days", config.rate.days}};
  j["train_fraction"] = config.train_fraction;
  j["trees"] = config.k_trees;
  j["learning_rate"] = config.learning_rate;
  j["forest_grow"] = grow_config_to_json(config.forest_grow);
  j["boost_grow"] = grow_config_to_json(config.boost_grow);
  j["histogram_bins"] = config.histogram_bins;
  j["widths"] = config.widths;
  j["sensitivity_trees"] = config.sensitivity_trees;
  j["seed"] = config.seed;
  j["threads"] = config.threads;
  j["out"] = config.out_dir;
  j["columns"] = {{"section_number", config.schema.section_number},
                  {"year", config.schema.year},
                  {"crash_count", config.schema.crash_count},
                  {"section_length", config.schema.section_length},
                  {"shoulder", config.schema.shoulder},
                  {"speed_limit", config.schema.speed_limit},
                  {"on_street_parking", config.schema.on_street_parking},
                  {"one_way", config.schema.one_way},
                  {"num_lanes", config.schema.num_lanes},
                  {"road_class", config.schema.road_class},
                  {"median", config.schema.median},
                  {"lane_width", config.schema.lane_width},
                  {"cbd", config.schema.cbd},
                  {"aadt_per_lane", config.schema.aadt_per_lane}};
  return j;
}

GenerateOutputs cmd_generate(const RunConfig& config) {
  validate_config(config);
  if (!config.generator) {
    throw std::invalid_argument("generate: config must contain a synthetic_* block");
  }
  const auto& g = *config.generator;
  const auto data = generate_synthetic(g.sections, g.effect, g.noise_sd, config.seed, g.years);

  GenerateOutputs out;
  out.csv_path = std::filesystem::path(config.out_dir) / "synthetic.csv";
  out.truth_path = std::filesystem::path(config.out_dir) / "generator_truth.json";
  atomic_write_file(out.csv_path, records_to_csv(data.records, config.schema));
  atomic_write_file(out.truth_path, synthetic_truth_to_json(data.truth).dump(2) + "\n");
  return out;
}

namespace {

// Runs one stage, rethrowing with the stage name attached.
template <typename Fn>
auto run_stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error("stage " + name + ": " + e.what());
  }
}

}  // namespace

RunOutputs cmd_run(const RunConfig& config) {
  validate_config(config);  // rejected before any work

  const std::filesystem::path out_dir(config.out_dir);
  RunOutputs outputs;
  auto emit = [&](const std::string& name, const std::string& content) {
    atomic_write_file(out_dir / name, content);
    outputs.artifacts.push_back(name);
  };

  // ingest
  std::vector<RawObservation> records = run_stage("ingest", [&] {
    if (config.input) {
      std::ifstream in(*config.input, std::ios::binary);
      if (!in) throw std::runtime_error("cannot open input '" + *config.input + "'");
      auto result = ingest_csv(in, config.schema);
      outputs.ingest = result.report;
      return std::move(result.records);
    }
    const auto& g = *config.generator;
    auto data = generate_synthetic(g.sections, g.effect, g.noise_sd, config.seed, g.years);
    outputs.ingest.rows_read = static_cast<std::int64_t>(data.records.size());
    outputs.ingest.accepted = outputs.ingest.rows_read;
    return std::move(data.records);
  });
  emit("ingestion_report.json", ingest_report_to_json(outputs.ingest).dump(2) + "\n");

  const auto sections =
      run_stage("aggregate", [&] { return aggregate_sections(records); });

  const Dataset dataset = run_stage("dataset", [&] {
    return make_dataset(sections, config.mode, config.rate,
                        config.mode == ResponseMode::Rate && config.rate_include_exposure);
  });

  const auto [train, test] = run_stage("split", [&] {
    return train_test_split(dataset, config.train_fraction, stage_seed(config.seed, kSplitTag));
  });

  // train both families once at full size
  const ForestModel forest = run_stage("train_forest", [&] {
    return train_forest(train, config.k_trees, config.forest_grow,
                        stage_seed(config.seed, kForestTag), config.threads);
  });
  const BoostModel boost = run_stage("train_boost", [&] {
    return train_lsboost(train, config.k_trees, config.learning_rate, config.boost_grow,
                         stage_seed(config.seed, kBoostTag));
  });

  run_stage("sensitivity", [&] {
    // evaluated by truncating the already-trained ensembles
    std::vector<int> counts = config.sensitivity_trees;
    while (!counts.empty() && counts.back() > config.k_trees) counts.pop_back();
    if (counts.empty() || counts.back() != config.k_trees) counts.push_back(config.k_trees);
    outputs.sensitivity.push_back(sensitivity_curve(boost, test, counts));
    outputs.sensitivity.push_back(sensitivity_curve(forest, test, counts));
    return 0;
  });
  emit("sensitivity.csv", sensitivity_to_csv(outputs.sensitivity));
  emit("sensitivity_mae.svg",
       render_sensitivity_svg(outputs.sensitivity, false, "test MAE by ensemble size"));
  emit("sensitivity_mse.svg",
       render_sensitivity_svg(outputs.sensitivity, true, "test MSE by ensemble size"));

  run_stage("adequacy", [&] {
    const Vector forest_pred = predict_matrix(forest, test.features, config.threads);
    const Vector boost_pred = predict_matrix(boost, test.features, config.threads);
    HistogramSpec spec;
    spec.bins = config.histogram_bins;
    outputs.adequacy = adequacy_check(test.response, forest_pred, boost_pred, spec);
    outputs.winner = outputs.adequacy.winner;
    return 0;
  });
  emit("adequacy.json", adequacy_to_json(outputs.adequacy).dump(2) + "\n");
  emit("adequacy.csv", adequacy_to_csv(outputs.adequacy));

  run_stage("importance", [&] {
    outputs.importance =
        variable_importance(forest, train, stage_seed(config.seed, kImportanceTag),
                            config.threads);
    return 0;
  });
  emit("importance.json", importance_to_json(outputs.importance).dump(2) + "\n");

  run_stage("counterfactual", [&] {
    const auto expanded = expand_lane_widths(dataset, config.widths);
    const Model model = outputs.winner == "boost" ? Model(boost) : Model(forest);
    outputs.effect = simulate_effect(model, expanded, config.mode, config.threads);
    return 0;
  });
  const std::string mode_name = config.mode == ResponseMode::Rate ? "rate" : "counts";
  emit("effect_report.json", effect_report_to_json(outputs.effect).dump(2) + "\n");
  if (outputs.effect.kruskal) emit("kruskal_wallis.csv", kruskal_to_csv(*outputs.effect.kruskal));
  if (outputs.effect.percent) {
    emit("percent_changes.csv", percent_changes_to_csv(*outputs.effect.percent));
  }
  if (outputs.effect.pairwise) emit("pairwise_pvalues.csv", pairwise_to_csv(*outputs.effect.pairwise));
  emit("boxplot_data.csv", boxplot_data_to_csv(outputs.effect));
  emit("boxplot_" + mode_name + ".svg",
       render_boxplot_svg(outputs.effect, "simulated effect of lane width",
                          mode_name == "rate" ? "crash rate" : "crash count"));

  if (config.counts_replication && config.mode == ResponseMode::Rate) {
    run_stage("counts_replication", [&] {
      ReplicationConfig rep;
      rep.family = outputs.winner == "boost" ? Family::Boost : Family::Forest;
      rep.k_trees = config.k_trees;
      rep.forest_grow = config.forest_grow;
      rep.boost_grow = config.boost_grow;
      rep.learning_rate = config.learning_rate;
      rep.train_fraction = config.train_fraction;
      rep.rate = config.rate;
      rep.widths = config.widths;
      rep.threads = config.threads;
      outputs.counts_effect =
          counts_mode_replication(sections, rep, stage_seed(config.seed, kCountsTag));
      return 0;
    });
    const auto& counts = *outputs.counts_effect;
    emit("effect_report_counts.json", effect_report_to_json(counts).dump(2) + "\n");
    if (counts.kruskal) emit("kruskal_wallis_counts.csv", kruskal_to_csv(*counts.kruskal));
    if (counts.percent) {
      emit("percent_changes_counts.csv", percent_changes_to_csv(*counts.percent));
    }
    if (counts.pairwise) emit("pairwise_pvalues_counts.csv", pairwise_to_csv(*counts.pairwise));
    emit("boxplot_data_counts.csv", boxplot_data_to_csv(counts));
    emit("boxplot_counts.svg",
         render_boxplot_svg(counts, "simulated effect of lane width", "crash count"));
  }

  run_stage("manifest", [&] {
    nlohmann::json manifest{{"schema_version", 1},
                            {"command", "run"},
                            {"config", config_to_json(config)},
                            {"winner", outputs.winner},
                            {"artifacts", outputs.artifacts}};
    atomic_write_file(out_dir / "run_manifest.json", manifest.dump(2) + "\n");
    outputs.artifacts.push_back("run_manifest.json");
    return 0;
  });
  return outputs;
}

}  // namespace crashml
