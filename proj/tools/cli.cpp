#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

#include "advrec/comparison.hpp"
#include "advrec/errors.hpp"
#include "advrec/rng.hpp"
#include "advrec/trajectory.hpp"
#include "advrec/version.hpp"

namespace advrec::cli {

namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

std::string format_fixed(double v, int decimals = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw StateError("cannot read '" + path.string() + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw StateError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw StateError("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------- config ---

void expect_object(const json& node, const std::string& where) {
  if (!node.is_object()) throw ConfigError("config: " + where + " must be an object");
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
  }
}

double get_num(const json& obj, const std::string& where, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) {
    throw ConfigError("config: " + where + "." + key + " must be a number");
  }
  return obj[key].get<double>();
}

std::size_t get_size(const json& obj, const std::string& where, const char* key,
                     std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_unsigned()) {
    throw ConfigError("config: " + where + "." + key + " must be a non-negative integer");
  }
  return obj[key].get<std::size_t>();
}

bool get_bool(const json& obj, const std::string& where, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) throw ConfigError("config: " + where + "." + key + " must be a bool");
  return obj[key].get<bool>();
}

std::string get_str(const json& obj, const std::string& where, const char* key,
                    const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) {
    throw ConfigError("config: " + where + "." + key + " must be a string");
  }
  return obj[key].get<std::string>();
}

void parse_world(const json& node, ExperimentConfig& config) {
  expect_object(node, "world");
  check_keys(node, "world",
             {"n_users", "n_items", "dim", "latent_clusters", "relevant_per_user", "noise",
              "embeddings"});
  WorldConfig& w = config.world;
  w.n_users = get_size(node, "world", "n_users", w.n_users);
  w.n_items = get_size(node, "world", "n_items", w.n_items);
  w.dim = get_size(node, "world", "dim", w.dim);
  w.latent_clusters = get_size(node, "world", "latent_clusters", w.latent_clusters);
  w.relevant_per_user = get_size(node, "world", "relevant_per_user", w.relevant_per_user);
  w.noise = get_num(node, "world", "noise", w.noise);
  const std::string embeddings = get_str(node, "world", "embeddings", "");
  if (!embeddings.empty()) {
    config.embeddings = embeddings;
    if (!std::filesystem::exists(config.embeddings)) {
      throw ConfigError("config: embeddings file '" + embeddings + "' does not exist");
    }
  }
}

void parse_agent(const json& node, ExperimentConfig& config) {
  expect_object(node, "agent");
  check_keys(node, "agent",
             {"algo", "hidden", "epochs", "episodes_per_epoch", "gamma", "lr", "weight_decay",
              "path_length"});
  TrainConfig& a = config.agent;
  a.algo = get_str(node, "agent", "algo", a.algo);
  a.hidden = get_size(node, "agent", "hidden", a.hidden);
  a.epochs = get_size(node, "agent", "epochs", a.epochs);
  a.episodes_per_epoch = get_size(node, "agent", "episodes_per_epoch", a.episodes_per_epoch);
  a.gamma = get_num(node, "agent", "gamma", a.gamma);
  a.lr = get_num(node, "agent", "lr", a.lr);
  a.weight_decay = get_num(node, "agent", "weight_decay", a.weight_decay);
  a.path_length = get_size(node, "agent", "path_length", a.path_length);
}

std::pair<AttackSpec, std::string> parse_attack_entry(const json& node, std::size_t index) {
  const std::string where = "attacks[" + std::to_string(index) + "]";
  expect_object(node, where);
  check_keys(node, where,
             {"family", "label", "epsilon", "scheduler", "p_freq", "threshold", "jsma_theta",
              "jsma_max_dims", "jsma_max_iters", "jsma_sign_filter", "deepfool_sample_k",
              "deepfool_overshoot", "deepfool_max_iters"});
  if (!node.contains("family")) throw ConfigError("config: " + where + " is missing 'family'");

  AttackSpec spec;
  spec.family = parse_attack_family(get_str(node, where, "family", ""));
  spec.scheduler = parse_scheduler(get_str(node, where, "scheduler", "always"));
  spec.epsilon = get_num(node, where, "epsilon", spec.epsilon);
  spec.p_freq = get_num(node, where, "p_freq", spec.p_freq);
  spec.threshold = get_num(node, where, "threshold", spec.threshold);
  spec.jsma_theta = get_num(node, where, "jsma_theta", spec.jsma_theta);
  spec.jsma_max_dims = get_size(node, where, "jsma_max_dims", spec.jsma_max_dims);
  spec.jsma_max_iters = get_size(node, where, "jsma_max_iters", spec.jsma_max_iters);
  spec.jsma_sign_filter = get_bool(node, where, "jsma_sign_filter", spec.jsma_sign_filter);
  spec.deepfool_sample_k = get_size(node, where, "deepfool_sample_k", spec.deepfool_sample_k);
  spec.deepfool_overshoot = get_num(node, where, "deepfool_overshoot", spec.deepfool_overshoot);
  spec.deepfool_max_iters = get_size(node, where, "deepfool_max_iters", spec.deepfool_max_iters);
  validate_attack_spec(spec);

  std::string label = get_str(node, where, "label", "");
  if (label.empty()) {
    label = attack_family_name(spec.family);
    if (spec.scheduler != SchedulerKind::kAlways) {
      label += '+';
      label += scheduler_name(spec.scheduler);
    }
  }
  if (label.find('/') != std::string::npos || label.find("..") != std::string::npos) {
    throw ConfigError("config: " + where + " label '" + label + "' is not a plain file stem");
  }
  return {spec, label};
}

/// Table 1 grid: clean baseline, the three FGSM norms, JSMA and Deepfool.
std::vector<std::pair<AttackSpec, std::string>> default_attack_grid() {
  std::vector<std::pair<AttackSpec, std::string>> grid;
  AttackSpec none;
  grid.emplace_back(none, "none");

  AttackSpec l1;
  l1.family = AttackFamily::kFgsmL1;
  l1.epsilon = 8.0;
  grid.emplace_back(l1, "fgsm_l1");

  AttackSpec l2;
  l2.family = AttackFamily::kFgsmL2;
  l2.epsilon = 0.5;
  grid.emplace_back(l2, "fgsm_l2");

  AttackSpec linf;
  linf.family = AttackFamily::kFgsmLinf;
  linf.epsilon = 0.5;
  grid.emplace_back(linf, "fgsm_linf");

  AttackSpec jsma;
  jsma.family = AttackFamily::kJsma;
  jsma.epsilon = 8.0;
  jsma.jsma_theta = 6.0;
  grid.emplace_back(jsma, "jsma");

  AttackSpec deepfool;
  deepfool.family = AttackFamily::kDeepfool;
  deepfool.epsilon = 4.0;
  deepfool.deepfool_overshoot = 2.0;
  grid.emplace_back(deepfool, "deepfool");
  return grid;
}

void parse_attacks(const json& node, ExperimentConfig& config) {
  if (!node.is_array()) throw ConfigError("config: attacks must be an array");
  if (node.empty()) throw ConfigError("config: attacks must not be empty");
  for (std::size_t i = 0; i < node.size(); ++i) {
    auto [spec, label] = parse_attack_entry(node[i], i);
    config.attacks.push_back(spec);
    config.attack_labels.push_back(std::move(label));
  }
  std::set<std::string> seen;
  for (const std::string& label : config.attack_labels) {
    if (!seen.insert(label).second) {
      throw ConfigError("config: duplicate attack label '" + label +
                        "'; set explicit labels to disambiguate");
    }
  }
}

void parse_sweep(const json& node, ExperimentConfig& config) {
  expect_object(node, "sweep");
  check_keys(node, "sweep", {"families", "epsilon", "p_freqs", "thresholds"});
  SweepConfig sweep;
  if (!node.contains("families") || !node["families"].is_array() || node["families"].empty()) {
    throw ConfigError("config: sweep.families must be a non-empty array");
  }
  for (const json& f : node["families"]) {
    if (!f.is_string()) throw ConfigError("config: sweep.families entries must be strings");
    const AttackFamily family = parse_attack_family(f.get<std::string>());
    if (family == AttackFamily::kNone) {
      throw ConfigError("config: sweep.families cannot include 'none'");
    }
    sweep.families.push_back(family);
  }
  sweep.epsilon = get_num(node, "sweep", "epsilon", 0.0);
  if (!(sweep.epsilon > 0.0)) throw ConfigError("config: sweep.epsilon must be positive");
  auto load_grid = [&](const char* key, std::vector<double>& out_grid) {
    if (!node.contains(key)) return;
    if (!node[key].is_array()) {
      throw ConfigError("config: sweep." + std::string(key) + " must be an array");
    }
    for (const json& v : node[key]) {
      if (!v.is_number()) {
        throw ConfigError("config: sweep." + std::string(key) + " entries must be numbers");
      }
      out_grid.push_back(v.get<double>());
    }
  };
  load_grid("p_freqs", sweep.p_freqs);
  load_grid("thresholds", sweep.thresholds);
  if (sweep.p_freqs.empty() && sweep.thresholds.empty()) {
    throw ConfigError("config: sweep needs p_freqs and/or thresholds");
  }
  for (double p : sweep.p_freqs) {
    if (!(p > 0.0) || p > 1.0) throw ConfigError("config: sweep.p_freqs must lie in (0, 1]");
  }
  for (double t : sweep.thresholds) {
    if (t < 0.0 || t >= 1.0) throw ConfigError("config: sweep.thresholds must lie in [0, 1)");
  }
  config.sweep = std::move(sweep);
}

void parse_detector(const json& node, ExperimentConfig& config) {
  expect_object(node, "detector");
  check_keys(node, "detector",
             {"train_attack", "epochs", "batch", "lr", "weight_decay", "hidden", "combiner_dim",
              "dropout", "attn_context", "gru_variant", "split", "threshold"});
  DetectorTrainConfig& d = config.detector;
  config.train_attack = get_str(node, "detector", "train_attack", config.train_attack);
  d.epochs = get_size(node, "detector", "epochs", d.epochs);
  d.batch = get_size(node, "detector", "batch", d.batch);
  d.lr = get_num(node, "detector", "lr", d.lr);
  d.weight_decay = get_num(node, "detector", "weight_decay", d.weight_decay);
  d.hidden = get_size(node, "detector", "hidden", d.hidden);
  d.combiner_dim = get_size(node, "detector", "combiner_dim", d.combiner_dim);
  d.dropout = get_num(node, "detector", "dropout", d.dropout);
  d.attn_context = get_str(node, "detector", "attn_context", d.attn_context);
  d.gru_variant = get_str(node, "detector", "gru_variant", d.gru_variant);
  d.split = get_num(node, "detector", "split", d.split);
  config.detect_threshold = get_num(node, "detector", "threshold", config.detect_threshold);
  if (config.detect_threshold < 0.0 || config.detect_threshold > 1.0) {
    throw ConfigError("config: detector.threshold must lie in [0, 1]");
  }
}

void parse_analysis(const json& node, ExperimentConfig& config) {
  expect_object(node, "analysis");
  check_keys(node, "analysis", {"k", "gamma", "reference"});
  config.k = get_size(node, "analysis", "k", config.k);
  if (config.k < 1) throw ConfigError("config: analysis.k must be >= 1");
  config.analysis_gamma = get_num(node, "analysis", "gamma", config.analysis_gamma);
  if (config.analysis_gamma < 0.0) throw ConfigError("config: analysis.gamma must be >= 0");
  const std::string reference =
      get_str(node, "analysis", "reference", std::string(attack_family_name(config.reference)));
  config.reference = parse_attack_family(reference);
  if (config.reference == AttackFamily::kNone) {
    throw ConfigError("config: analysis.reference cannot be 'none'");
  }
}

ordered attack_entry_json(const AttackSpec& spec, const std::string& label) {
  return ordered{{"family", attack_family_name(spec.family)},
                 {"label", label},
                 {"epsilon", spec.epsilon},
                 {"scheduler", scheduler_name(spec.scheduler)},
                 {"p_freq", spec.p_freq},
                 {"threshold", spec.threshold},
                 {"jsma_theta", spec.jsma_theta},
                 {"jsma_max_dims", spec.jsma_max_dims},
                 {"jsma_max_iters", spec.jsma_max_iters},
                 {"jsma_sign_filter", spec.jsma_sign_filter},
                 {"deepfool_sample_k", spec.deepfool_sample_k},
                 {"deepfool_overshoot", spec.deepfool_overshoot},
                 {"deepfool_max_iters", spec.deepfool_max_iters}};
}

// -------------------------------------------------------------- manifest ---

std::filesystem::path manifest_path(const ExperimentConfig& config) {
  return config.out / "manifest.json";
}

void update_manifest(const ExperimentConfig& config, const std::string& stage,
                     double wall_time_s, const std::vector<std::string>& artifacts) {
  for (const std::string& name : artifacts) {
    const std::filesystem::path path = config.out / name;
    if (!std::filesystem::exists(path) || std::filesystem::file_size(path) == 0) {
      throw StateError("manifest: artifact '" + name + "' is missing or empty");
    }
  }
  ordered doc;
  if (std::filesystem::exists(manifest_path(config))) {
    try {
      doc = ordered::parse(read_text(manifest_path(config)));
    } catch (const json::exception& e) {
      throw ParseError("'" + manifest_path(config).string() + "': " + e.what());
    }
  }
  doc["tool_version"] = kVersion;
  doc["build_id"] = kBuildId;
  doc["config_hash"] = config_hash(config);
  if (!doc.contains("stages")) doc["stages"] = ordered::object();
  doc["stages"][stage] =
      ordered{{"wall_time_s", wall_time_s}, {"artifacts", artifacts}};
  write_text(manifest_path(config), doc.dump(2) + "\n");
}

/// Creates the output directory and pins the resolved config, then times the
/// stage body and records its artifacts in the manifest.
template <typename Body>
void run_stage(const ExperimentConfig& config, const std::string& stage, Body body) {
  std::filesystem::create_directories(config.out);
  write_text(config.out / "config.resolved.json", resolved_config_json(config));
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> artifacts = body();
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  artifacts.insert(artifacts.begin(), "config.resolved.json");
  update_manifest(config, stage, wall, artifacts);
}

// ---------------------------------------------------------------- stages ---

std::filesystem::path agent_path(const ExperimentConfig& config) {
  return config.out / "agent.json";
}

Agent load_stage_agent(const ExperimentConfig& config) {
  if (!std::filesystem::exists(agent_path(config))) {
    throw StateError("missing agent checkpoint '" + agent_path(config).string() +
                     "'; run train-agent first");
  }
  return load_agent(agent_path(config));
}

std::vector<std::size_t> all_users(const World& world) {
  std::vector<std::size_t> users(world.table.users.size());
  std::iota(users.begin(), users.end(), 0);
  return users;
}

ordered prf_json(const PRFReport& prf) {
  return ordered{{"precision", prf.precision}, {"recall", prf.recall}, {"f1", prf.f1},
                 {"tp", prf.tp},               {"fp", prf.fp},         {"tn", prf.tn},
                 {"fn", prf.fn},               {"threshold", prf.threshold}};
}

std::string trajectories_name(const std::string& label) { return "attack_" + label + ".jsonl"; }
std::string attack_report_name(const std::string& label) {
  return "attack_" + label + ".report.json";
}

std::string sweep_csv(const ExperimentConfig& config, const Agent& agent, const World& world,
                      AttackFamily family, const std::vector<std::size_t>& users,
                      std::size_t workers) {
  const SweepConfig& sweep = *config.sweep;
  std::string csv = "family,scheduler,param,achieved_frequency,ndcg\n";
  auto add_row = [&](SchedulerKind scheduler, double param) {
    AttackSpec spec;
    spec.family = family;
    spec.epsilon = sweep.epsilon;
    spec.scheduler = scheduler;
    if (scheduler == SchedulerKind::kRandom) spec.p_freq = param;
    if (scheduler == SchedulerKind::kTimed) spec.threshold = param;
    const CraftResult crafted = craft_dataset(agent, world, spec, users, config.seed,
                                              config.agent.path_length, workers);
    const MetricsReport metrics =
        crafted_metrics(agent, world, crafted.trajectories, users, config.k);
    csv += std::string(attack_family_name(family)) + ',' +
           std::string(scheduler_name(scheduler)) + ',' + format_fixed(param) + ',' +
           format_fixed(crafted.report.achieved_frequency) + ',' + format_fixed(metrics.ndcg) +
           '\n';
  };
  for (double p : sweep.p_freqs) add_row(SchedulerKind::kRandom, p);
  for (double t : sweep.thresholds) add_row(SchedulerKind::kTimed, t);
  return csv;
}

std::vector<DetectionSample> load_samples(const ExperimentConfig& config, const World& world,
                                          const std::string& label, int sample_label) {
  const std::filesystem::path path = config.out / trajectories_name(label);
  if (!std::filesystem::exists(path)) {
    throw StateError("missing dataset '" + path.string() + "'; run attack first");
  }
  const TrajectoryFile file = load_trajectories(path);
  return detection_samples(file.trajectories, world.table, sample_label);
}

// ----------------------------------------------------------------- report ---

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

/// Hand-rolled polyline chart; everything is data-derived so output is
/// deterministic.
std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series) {
  constexpr double kWidth = 640, kHeight = 400;
  constexpr double kLeft = 64, kRight = 600, kTop = 48, kBottom = 352;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};

  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  bool first = true;
  for (const Series& s : series) {
    for (const auto& [x, y] : s.points) {
      if (first) {
        x_min = x_max = x;
        y_min = y_max = y;
        first = false;
      }
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  if (x_min == x_max) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  if (y_min == y_max) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  auto sx = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * (kRight - kLeft); };
  auto sy = [&](double y) { return kBottom - (y - y_min) / (y_max - y_min) * (kBottom - kTop); };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " +
                    format_fixed(kWidth, 0) + " " + format_fixed(kHeight, 0) + "\">\n";
  svg += "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "  <text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" + title +
         "</text>\n";
  svg += "  <line x1=\"" + format_fixed(kLeft, 0) + "\" y1=\"" + format_fixed(kBottom, 0) +
         "\" x2=\"" + format_fixed(kRight, 0) + "\" y2=\"" + format_fixed(kBottom, 0) +
         "\" stroke=\"black\"/>\n";
  svg += "  <line x1=\"" + format_fixed(kLeft, 0) + "\" y1=\"" + format_fixed(kTop, 0) +
         "\" x2=\"" + format_fixed(kLeft, 0) + "\" y2=\"" + format_fixed(kBottom, 0) +
         "\" stroke=\"black\"/>\n";
  svg += "  <text x=\"320\" y=\"388\" text-anchor=\"middle\" font-size=\"12\">" + x_label +
         "</text>\n";
  svg += "  <text x=\"16\" y=\"200\" font-size=\"12\" transform=\"rotate(-90 16 200)\" "
         "text-anchor=\"middle\">" +
         y_label + "</text>\n";
  svg += "  <text x=\"" + format_fixed(kLeft, 0) + "\" y=\"368\" font-size=\"10\">" +
         format_fixed(x_min, 2) + "</text>\n";
  svg += "  <text x=\"" + format_fixed(kRight, 0) +
         "\" y=\"368\" text-anchor=\"end\" font-size=\"10\">" + format_fixed(x_max, 2) +
         "</text>\n";
  svg += "  <text x=\"" + format_fixed(kLeft - 6, 0) + "\" y=\"" + format_fixed(kBottom, 0) +
         "\" text-anchor=\"end\" font-size=\"10\">" + format_fixed(y_min, 2) + "</text>\n";
  svg += "  <text x=\"" + format_fixed(kLeft - 6, 0) + "\" y=\"" + format_fixed(kTop + 4, 0) +
         "\" text-anchor=\"end\" font-size=\"10\">" + format_fixed(y_max, 2) + "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % (sizeof kColors / sizeof kColors[0])];
    std::string points;
    for (const auto& [x, y] : series[i].points) {
      if (!points.empty()) points += ' ';
      points += format_fixed(sx(x), 2) + "," + format_fixed(sy(y), 2);
    }
    svg += "  <polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    svg += "  <text x=\"" + format_fixed(kRight - 4, 0) + "\" y=\"" +
           format_fixed(kTop + 16 + 16 * static_cast<double>(i), 0) +
           "\" text-anchor=\"end\" font-size=\"12\" fill=\"" + color + "\">" + series[i].name +
           "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::vector<std::string> sorted_directory(const std::filesystem::path& dir) {
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

/// sweep CSV rows parsed back for the report and its charts.
std::vector<ordered> parse_sweep_rows(const std::string& csv, const std::string& name) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "family,scheduler,param,achieved_frequency,ndcg") {
    throw ParseError("'" + name + "': unexpected sweep header");
  }
  std::vector<ordered> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string family, scheduler, param, freq, ndcg;
    if (!std::getline(fields, family, ',') || !std::getline(fields, scheduler, ',') ||
        !std::getline(fields, param, ',') || !std::getline(fields, freq, ',') ||
        !std::getline(fields, ndcg)) {
      throw ParseError("'" + name + "': malformed sweep row '" + line + "'");
    }
    rows.push_back(ordered{{"family", family},
                           {"scheduler", scheduler},
                           {"param", std::stod(param)},
                           {"achieved_frequency", std::stod(freq)},
                           {"ndcg", std::stod(ndcg)}});
  }
  return rows;
}

// ------------------------------------------------------------------- main ---

struct CliOptions {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
};

ExperimentConfig load_for_run(const CliOptions& options, bool seed_given) {
  if (!std::filesystem::exists(options.config_path)) {
    throw ConfigError("config file '" + options.config_path + "' does not exist");
  }
  ExperimentConfig config = load_experiment_config(options.config_path);
  if (!options.out_override.empty()) config.out = options.out_override;
  if (seed_given) {
    config.seed = options.seed_override;
    config.world.seed = config.seed;
  }
  if (config.out.empty()) {
    throw ConfigError("no output directory: set 'out' in the config or pass --out");
  }
  return config;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  expect_object(doc, "top level");
  check_keys(doc, "the top level",
             {"seed", "out", "world", "agent", "attacks", "sweep", "detector", "analysis"});
  if (!doc.contains("seed")) throw ConfigError("config: missing required 'seed'");
  if (!doc["seed"].is_number_unsigned()) {
    throw ConfigError("config: seed must be a non-negative integer");
  }

  ExperimentConfig config;
  config.seed = doc["seed"].get<std::uint64_t>();
  config.out = get_str(doc, "top level", "out", "");
  if (doc.contains("world")) parse_world(doc["world"], config);
  if (doc.contains("agent")) parse_agent(doc["agent"], config);
  if (doc.contains("attacks")) {
    parse_attacks(doc["attacks"], config);
  } else {
    for (auto& [spec, label] : default_attack_grid()) {
      config.attacks.push_back(spec);
      config.attack_labels.push_back(label);
    }
  }
  if (doc.contains("sweep")) parse_sweep(doc["sweep"], config);
  if (doc.contains("detector")) parse_detector(doc["detector"], config);
  if (doc.contains("analysis")) parse_analysis(doc["analysis"], config);

  config.world.seed = config.seed;
  return config;
}

std::string resolved_config_json(const ExperimentConfig& config) {
  ordered doc;
  doc["seed"] = config.seed;
  doc["world"] = ordered{{"n_users", config.world.n_users},
                         {"n_items", config.world.n_items},
                         {"dim", config.world.dim},
                         {"latent_clusters", config.world.latent_clusters},
                         {"relevant_per_user", config.world.relevant_per_user},
                         {"noise", config.world.noise}};
  if (!config.embeddings.empty()) doc["world"]["embeddings"] = config.embeddings.string();
  doc["agent"] = ordered{{"algo", config.agent.algo},
                         {"hidden", config.agent.hidden},
                         {"epochs", config.agent.epochs},
                         {"episodes_per_epoch", config.agent.episodes_per_epoch},
                         {"gamma", config.agent.gamma},
                         {"lr", config.agent.lr},
                         {"weight_decay", config.agent.weight_decay},
                         {"path_length", config.agent.path_length}};
  doc["attacks"] = ordered::array();
  for (std::size_t i = 0; i < config.attacks.size(); ++i) {
    doc["attacks"].push_back(attack_entry_json(config.attacks[i], config.attack_labels[i]));
  }
  if (config.sweep) {
    ordered families = ordered::array();
    for (AttackFamily f : config.sweep->families) families.push_back(attack_family_name(f));
    doc["sweep"] = ordered{{"families", families},
                           {"epsilon", config.sweep->epsilon},
                           {"p_freqs", config.sweep->p_freqs},
                           {"thresholds", config.sweep->thresholds}};
  }
  doc["detector"] = ordered{{"train_attack", config.train_attack},
                            {"epochs", config.detector.epochs},
                            {"batch", config.detector.batch},
                            {"lr", config.detector.lr},
                            {"weight_decay", config.detector.weight_decay},
                            {"hidden", config.detector.hidden},
                            {"combiner_dim", config.detector.combiner_dim},
                            {"dropout", config.detector.dropout},
                            {"attn_context", config.detector.attn_context},
                            {"gru_variant", config.detector.gru_variant},
                            {"split", config.detector.split},
                            {"threshold", config.detect_threshold}};
  doc["analysis"] = ordered{{"k", config.k},
                            {"gamma", config.analysis_gamma},
                            {"reference", attack_family_name(config.reference)}};
  return doc.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = resolved_config_json(config);
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::size_t workers_from_env() {
  const char* raw = std::getenv("ADVREC_WORKERS");
  if (raw == nullptr || *raw == '\0') return 0;
  std::size_t value = 0;
  const char* end = raw + std::string_view(raw).size();
  auto [ptr, ec] = std::from_chars(raw, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("ADVREC_WORKERS must be a non-negative integer, got '" + std::string(raw) +
                      "'");
  }
  return value;
}

World build_world(const ExperimentConfig& config) {
  if (!config.embeddings.empty()) {
    return world_from_table(load_embeddings(config.embeddings), config.world.relevant_per_user);
  }
  return generate_world(config.world);
}

void cmd_train_agent(const ExperimentConfig& config) {
  run_stage(config, "train-agent", [&] {
    const World world = build_world(config);
    TrainConfig tc = config.agent;
    tc.seed = derive_seed(config.seed, "agent");
    auto [agent, report] = train_agent(world, tc);
    save_agent(agent_path(config), agent);
    ordered doc{{"episodes", report.episodes},
                {"mean_reward_curve", report.mean_reward_curve},
                {"final_ndcg10", report.final_ndcg10}};
    write_text(config.out / "train_report.json", doc.dump(2) + "\n");
    return std::vector<std::string>{"agent.json", "train_report.json"};
  });
}

void cmd_attack(const ExperimentConfig& config) {
  run_stage(config, "attack", [&] {
    const World world = build_world(config);
    const Agent agent = load_stage_agent(config);
    const std::vector<std::size_t> users = all_users(world);
    const std::size_t workers = workers_from_env();
    std::vector<std::string> artifacts;

    for (std::size_t i = 0; i < config.attacks.size(); ++i) {
      const CraftResult crafted = craft_dataset(agent, world, config.attacks[i], users,
                                                config.seed, config.agent.path_length, workers);
      save_trajectories(config.out / trajectories_name(config.attack_labels[i]),
                        crafted.trajectories, crafted.label);
      save_attack_report(config.out / attack_report_name(config.attack_labels[i]),
                         crafted.report);
      artifacts.push_back(trajectories_name(config.attack_labels[i]));
      artifacts.push_back(attack_report_name(config.attack_labels[i]));
    }

    ComparisonConfig cc;
    cc.k = config.k;
    cc.gamma = config.analysis_gamma;
    cc.path_length = config.agent.path_length;
    cc.workers = workers;
    cc.reference = config.reference;
    cc.labels = config.attack_labels;
    const ComparisonTable table = attack_comparison(agent, world, config.attacks, config.seed, cc);
    save_comparison_csv(config.out / "comparison.csv", table);
    save_comparison_json(config.out / "comparison.json", table);
    artifacts.push_back("comparison.csv");
    artifacts.push_back("comparison.json");

    if (config.sweep) {
      for (AttackFamily family : config.sweep->families) {
        const std::string name = "sweep_" + std::string(attack_family_name(family)) + ".csv";
        write_text(config.out / name, sweep_csv(config, agent, world, family, users, workers));
        artifacts.push_back(name);
      }
    }
    return artifacts;
  });
}

void cmd_detect(const ExperimentConfig& config) {
  run_stage(config, "detect", [&] {
    std::string benign_label;
    for (std::size_t i = 0; i < config.attacks.size(); ++i) {
      if (config.attacks[i].family == AttackFamily::kNone) {
        benign_label = config.attack_labels[i];
        break;
      }
    }
    if (benign_label.empty()) {
      throw ConfigError("detect needs a 'none' entry in the attack grid for benign data");
    }
    std::vector<std::string> eval_labels;
    bool train_label_ok = false;
    for (std::size_t i = 0; i < config.attacks.size(); ++i) {
      if (config.attacks[i].family == AttackFamily::kNone) continue;
      eval_labels.push_back(config.attack_labels[i]);
      train_label_ok = train_label_ok || config.attack_labels[i] == config.train_attack;
    }
    if (eval_labels.empty()) {
      throw ConfigError("detect needs at least one adversarial entry in the attack grid");
    }
    if (!train_label_ok) {
      throw ConfigError("detector.train_attack '" + config.train_attack +
                        "' is not an adversarial attack grid label");
    }

    const World world = build_world(config);
    const std::vector<DetectionSample> benign = load_samples(config, world, benign_label, 0);
    std::vector<DetectionSample> dataset = benign;
    for (const DetectionSample& s : load_samples(config, world, config.train_attack, 1)) {
      dataset.push_back(s);
    }

    DetectorTrainConfig dtc = config.detector;
    dtc.seed = derive_seed(config.seed, "detector");
    auto [detector, report] = train_detector(dataset, dtc);
    save_detector(config.out / "detector.json", detector);

    std::string csv = "attack,precision,recall,f1,tp,fp,tn,fn\n";
    ordered rows = ordered::array();
    for (const std::string& label : eval_labels) {
      std::vector<DetectionSample> eval_set = benign;
      for (const DetectionSample& s : load_samples(config, world, label, 1)) {
        eval_set.push_back(s);
      }
      const PRFReport prf = evaluate_detector(detector, eval_set, config.detect_threshold);
      csv += label + ',' + format_fixed(prf.precision) + ',' + format_fixed(prf.recall) + ',' +
             format_fixed(prf.f1) + ',' + std::to_string(prf.tp) + ',' + std::to_string(prf.fp) +
             ',' + std::to_string(prf.tn) + ',' + std::to_string(prf.fn) + '\n';
      rows.push_back(ordered{{"attack", label},
                             {"precision", prf.precision},
                             {"recall", prf.recall},
                             {"f1", prf.f1},
                             {"tp", prf.tp},
                             {"fp", prf.fp},
                             {"tn", prf.tn},
                             {"fn", prf.fn}});
    }
    write_text(config.out / "detection.csv", csv);

    ordered doc{{"train_attack", config.train_attack},
                {"threshold", config.detect_threshold},
                {"best_epoch", report.best_epoch},
                {"validation", prf_json(report.validation)},
                {"train_loss_curve", report.train_loss_curve},
                {"val_f1_curve", report.val_f1_curve},
                {"rows", rows}};
    write_text(config.out / "detection.json", doc.dump(2) + "\n");
    return std::vector<std::string>{"detector.json", "detection.csv", "detection.json"};
  });
}

void cmd_report(const ExperimentConfig& config) {
  run_stage(config, "report", [&] {
    std::vector<std::string> warnings;
    std::vector<std::string> artifacts;
    ordered doc;
    doc["tool_version"] = kVersion;
    doc["build_id"] = kBuildId;
    doc["config_hash"] = config_hash(config);

    ordered manifest;
    if (std::filesystem::exists(manifest_path(config))) {
      manifest = ordered::parse(read_text(manifest_path(config)));
      if (manifest.contains("stages")) {
        for (const auto& [stage, record] : manifest["stages"].items()) {
          if (stage == "report") continue;
          for (const ordered& artifact : record["artifacts"]) {
            const std::string name = artifact.get<std::string>();
            if (!std::filesystem::exists(config.out / name)) {
              warnings.push_back("missing artifact '" + name + "' from stage '" + stage + "'");
            }
          }
        }
      }
    } else {
      warnings.push_back("missing manifest.json");
    }

    auto load_json_section = [&](const std::string& name) -> std::optional<ordered> {
      const std::filesystem::path path = config.out / name;
      if (!std::filesystem::exists(path)) return std::nullopt;
      try {
        return ordered::parse(read_text(path));
      } catch (const json::exception& e) {
        warnings.push_back("unreadable '" + name + "': " + e.what());
        return std::nullopt;
      }
    };

    std::vector<std::string> charts;
    auto emit_chart = [&](const std::string& name, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series) {
      bool any = false;
      for (const Series& s : series) any = any || !s.points.empty();
      if (!any) return;
      write_text(config.out / name, svg_line_chart(title, x_label, y_label, series));
      charts.push_back(name);
    };

    if (auto train = load_json_section("train_report.json")) {
      doc["agent"] = *train;
      Series rewards{"mean_reward", {}};
      std::size_t epoch = 1;
      for (const ordered& v : (*train)["mean_reward_curve"]) {
        rewards.points.emplace_back(static_cast<double>(epoch++), v.get<double>());
      }
      emit_chart("chart_training.svg", "Agent training", "epoch", "mean reward", {rewards});
    }

    ordered attacks = ordered::object();
    for (const std::string& name : sorted_directory(config.out)) {
      if (!name.starts_with("attack_") || !name.ends_with(".report.json")) continue;
      const std::string label =
          name.substr(7, name.size() - 7 - std::string(".report.json").size());
      if (auto report = load_json_section(name)) attacks[label] = *report;
    }
    if (!attacks.empty()) doc["attacks"] = attacks;

    if (auto comparison = load_json_section("comparison.json")) doc["comparison"] = *comparison;

    if (auto detection = load_json_section("detection.json")) {
      doc["detection"] = *detection;
      Series f1{"val_f1", {}};
      std::size_t epoch = 1;
      for (const ordered& v : (*detection)["val_f1_curve"]) {
        f1.points.emplace_back(static_cast<double>(epoch++), v.get<double>());
      }
      emit_chart("chart_detector.svg", "Detector validation", "epoch", "F1", {f1});
    }

    ordered sweeps = ordered::object();
    for (const std::string& name : sorted_directory(config.out)) {
      if (!name.starts_with("sweep_") || !name.ends_with(".csv")) continue;
      const std::string family = name.substr(6, name.size() - 6 - 4);
      std::vector<ordered> rows;
      try {
        rows = parse_sweep_rows(read_text(config.out / name), name);
      } catch (const std::exception& e) {
        warnings.push_back(std::string("unreadable '") + name + "': " + e.what());
        continue;
      }
      sweeps[family] = rows;
      Series random{"random", {}};
      Series timed{"timed", {}};
      for (const ordered& row : rows) {
        const auto point = std::make_pair(row["achieved_frequency"].get<double>(),
                                          row["ndcg"].get<double>());
        (row["scheduler"].get<std::string>() == "timed" ? timed : random)
            .points.push_back(point);
      }
      auto by_x = [](const auto& a, const auto& b) { return a.first < b.first; };
      std::sort(random.points.begin(), random.points.end(), by_x);
      std::sort(timed.points.begin(), timed.points.end(), by_x);
      std::vector<Series> series;
      if (!random.points.empty()) series.push_back(std::move(random));
      if (!timed.points.empty()) series.push_back(std::move(timed));
      emit_chart("chart_sweep_" + family + ".svg", "Attack frequency sweep: " + family,
                 "achieved frequency", "ndcg@" + std::to_string(config.k), series);
    }
    if (!sweeps.empty()) doc["sweeps"] = sweeps;

    doc["warnings"] = warnings;
    if (!charts.empty()) doc["charts"] = charts;
    write_text(config.out / "report.json", doc.dump(2) + "\n");
    for (const std::string& warning : warnings) {
      std::cerr << "warning: " << warning << "\n";
    }

    artifacts.push_back("report.json");
    for (const std::string& chart : charts) artifacts.push_back(chart);
    return artifacts;
  });
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Adversarial attacks and detection for an interactive recommender agent"};
  app.require_subcommand(1);
  CliOptions options;

  std::vector<CLI::App*> subs;
  for (const auto& [name, description] :
       std::initializer_list<std::pair<const char*, const char*>>{
           {"train-agent", "Train the recommendation agent and save its checkpoint"},
           {"attack", "Craft adversarial datasets, comparison table and frequency sweeps"},
           {"detect", "Train the sequence detector and evaluate every attack dataset"},
           {"report", "Consolidate artifacts into report.json and SVG charts"}}) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("--config", options.config_path, "Experiment config JSON")->required();
    sub->add_option("--out", options.out_override, "Output directory (overrides config)");
    sub->add_option("--seed", options.seed_override, "Seed override");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const CLI::App* chosen = app.get_subcommands().front();
    const ExperimentConfig config =
        load_for_run(options, chosen->count("--seed") > 0);
    if (chosen == subs[0]) {
      cmd_train_agent(config);
    } else if (chosen == subs[1]) {
      cmd_attack(config);
    } else if (chosen == subs[2]) {
      cmd_detect(config);
    } else {
      cmd_report(config);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace advrec::cli
