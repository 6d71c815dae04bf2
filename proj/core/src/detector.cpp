#include "advrec/detector.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <utility>

#include "advrec/adam.hpp"
#include "advrec/checkpoint.hpp"
#include "advrec/errors.hpp"
#include "advrec/graph.hpp"
#include "advrec/rng.hpp"

namespace advrec {

namespace {

constexpr double kProbFloor = 1e-7;

void validate_config(const DetectorConfig& config) {
  if (config.item_dim < 1) throw ConfigError("detector: item_dim must be >= 1");
  if (config.hidden < 1) throw ConfigError("detector: hidden must be >= 1");
  if (config.combiner_dim < 1) throw ConfigError("detector: combiner_dim must be >= 1");
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw ConfigError("detector: dropout must lie in [0, 1)");
  }
  if (config.attn_context != "final" && config.attn_context != "per_step") {
    throw ConfigError("detector: attn_context must be 'final' or 'per_step', got '" +
                      config.attn_context + "'");
  }
  parse_gru_variant(config.gru_variant);
}

void validate_actions(const DetectorConfig& config, const std::vector<Tensor>& actions) {
  if (actions.empty()) throw ShapeError("detector: empty action sequence");
  for (const Tensor& a : actions) {
    if (a.rank() != 1 || a.size() != config.item_dim) {
      throw ShapeError("detector: action shape " + shape_str(a.shape()) +
                       " does not match item dim " + std::to_string(config.item_dim));
    }
    if (!a.all_finite()) throw NumericError("detector: non-finite action embedding");
  }
}

std::size_t validate_samples(const std::vector<DetectionSample>& dataset,
                             const DetectorConfig& config) {
  if (dataset.empty()) throw ConfigError("detector: empty dataset");
  const std::size_t path_length = dataset.front().actions.size();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const DetectionSample& s = dataset[i];
    if (s.label != 0 && s.label != 1) {
      throw ConfigError("detector: sample " + std::to_string(i) + " label must be 0 or 1");
    }
    if (s.actions.size() != path_length) {
      throw ShapeError("detector: sample " + std::to_string(i) + " has " +
                       std::to_string(s.actions.size()) + " steps, expected " +
                       std::to_string(path_length));
    }
    validate_actions(config, s.actions);
  }
  return path_length;
}

struct ForwardNodes {
  std::vector<NodeId> step_probs;  // size-1 nodes
  NodeId alpha = kNoNode;
};

/// The joint softmax over all T attention scores needs every combiner output
/// before any attended decoder step can run, so the decoder makes two passes:
/// a context pass over the raw actions that supplies the hidden state seen by
/// the combiner, then the attended pass over alpha_t * a_t.
ForwardNodes build_forward(Graph& g, const BoundParams& bp, const DetectorConfig& config,
                           const std::vector<NodeId>& actions, bool training, Rng* rng) {
  const GruVariant variant = parse_gru_variant(config.gru_variant);
  const GruNodeIds encoder = bind_gru(bp, "encoder");
  const GruNodeIds decoder = bind_gru(bp, "decoder");
  const std::size_t path_length = actions.size();
  const bool per_step = config.attn_context == "per_step";

  std::vector<NodeId> encoded;
  encoded.reserve(path_length);
  NodeId h = g.constant(Tensor(Shape{config.hidden}));
  for (NodeId action : actions) {
    h = gru_cell(g, encoder, action, h, variant);
    encoded.push_back(h);
  }

  NodeId context_hidden = g.constant(Tensor(Shape{config.hidden}));
  NodeId scores = kNoNode;
  for (std::size_t t = 0; t < path_length; ++t) {
    NodeId summary = per_step ? encoded[t] : encoded.back();
    NodeId combined = g.concat(g.concat(actions[t], context_hidden), summary);
    NodeId e = g.relu(dense(g, bp, "combiner", combined));
    if (training && config.dropout > 0.0) e = g.dropout(e, config.dropout, *rng);
    NodeId score = dense(g, bp, "attention", e);
    scores = t == 0 ? score : g.concat(scores, score);
    context_hidden = gru_cell(g, decoder, actions[t], context_hidden, variant);
  }

  ForwardNodes out;
  out.alpha = g.softmax(scores);
  NodeId hidden = g.constant(Tensor(Shape{config.hidden}));
  out.step_probs.reserve(path_length);
  for (std::size_t t = 0; t < path_length; ++t) {
    NodeId scaled = g.scale_by(actions[t], g.pick(out.alpha, t));
    hidden = gru_cell(g, decoder, scaled, hidden, variant);
    out.step_probs.push_back(g.sigmoid(dense(g, bp, "head", hidden)));
  }
  return out;
}

/// Mean over steps of -[y log p + (1-y) log(1-p)], clamped before the log.
NodeId loss_node(Graph& g, const std::vector<NodeId>& step_probs, int label) {
  NodeId acc = kNoNode;
  for (NodeId p : step_probs) {
    NodeId q = label == 1 ? p : g.affine(p, -1.0, 1.0);
    NodeId term = g.affine(g.log(g.clamp(q, kProbFloor, 1.0 - kProbFloor)), -1.0, 0.0);
    acc = acc == kNoNode ? term : g.add(acc, term);
  }
  return g.affine(acc, 1.0 / static_cast<double>(step_probs.size()), 0.0);
}

std::vector<NodeId> bind_actions(Graph& g, const std::vector<Tensor>& actions) {
  std::vector<NodeId> ids;
  ids.reserve(actions.size());
  for (const Tensor& a : actions) ids.push_back(g.constant(a));
  return ids;
}

PRFReport prf_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn,
                          double threshold) {
  PRFReport r;
  r.tp = tp;
  r.fp = fp;
  r.tn = tn;
  r.fn = fn;
  r.threshold = threshold;
  if (tp + fp > 0) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (r.precision + r.recall > 0.0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

}  // namespace

Detector make_detector(const DetectorConfig& config, std::uint64_t seed) {
  validate_config(config);
  Detector d;
  d.config = config;
  Rng rng(seed);
  add_gru_params(d.params, "encoder", config.item_dim, config.hidden, rng);
  add_gru_params(d.params, "decoder", config.item_dim, config.hidden, rng);
  add_dense_params(d.params, "combiner", config.combiner_dim,
                   config.item_dim + 2 * config.hidden, rng);
  add_dense_params(d.params, "attention", 1, config.combiner_dim, rng);
  add_dense_params(d.params, "head", 1, config.hidden, rng);
  return d;
}

std::vector<DetectionSample> detection_samples(std::span<const Trajectory> trajectories,
                                               const EmbeddingTable& table, int label) {
  if (label != 0 && label != 1) throw ConfigError("detection_samples: label must be 0 or 1");
  std::vector<DetectionSample> out;
  out.reserve(trajectories.size());
  for (const Trajectory& t : trajectories) {
    DetectionSample s;
    s.label = label;
    s.actions.reserve(t.steps.size());
    for (const TrajectoryStep& step : t.steps) {
      if (step.action >= table.items.size()) {
        throw StateError("detection_samples: action " + std::to_string(step.action) +
                         " outside the embedding table");
      }
      s.actions.push_back(table.items[step.action]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Tensor> detector_encode(const Detector& detector, const std::vector<Tensor>& actions) {
  validate_config(detector.config);
  validate_actions(detector.config, actions);
  Graph g;
  BoundParams bp(g, detector.params, false);
  const GruNodeIds encoder = bind_gru(bp, "encoder");
  const GruVariant variant = parse_gru_variant(detector.config.gru_variant);
  std::vector<Tensor> states;
  states.reserve(actions.size());
  NodeId h = g.constant(Tensor(Shape{detector.config.hidden}));
  for (const Tensor& a : actions) {
    h = gru_cell(g, encoder, g.constant(a), h, variant);
    states.push_back(g.value(h));
  }
  return states;
}

DetectorEval detector_forward(const Detector& detector, const std::vector<Tensor>& actions) {
  validate_config(detector.config);
  validate_actions(detector.config, actions);
  Graph g;
  BoundParams bp(g, detector.params, false);
  ForwardNodes nodes = build_forward(g, bp, detector.config, bind_actions(g, actions), false,
                                     nullptr);
  DetectorEval eval;
  eval.attention = g.value(nodes.alpha);
  eval.step_probs = Tensor(Shape{actions.size()});
  for (std::size_t t = 0; t < nodes.step_probs.size(); ++t) {
    eval.step_probs[t] = g.scalar(nodes.step_probs[t]);
  }
  return eval;
}

std::pair<double, GradMap> detector_grads(const Detector& detector, const DetectionSample& sample) {
  validate_config(detector.config);
  validate_actions(detector.config, sample.actions);
  if (sample.label != 0 && sample.label != 1) {
    throw ConfigError("detector_grads: label must be 0 or 1");
  }
  Graph g;
  BoundParams bp(g, detector.params, true);
  ForwardNodes nodes =
      build_forward(g, bp, detector.config, bind_actions(g, sample.actions), false, nullptr);
  NodeId loss = loss_node(g, nodes.step_probs, sample.label);
  g.backward(loss);
  return {g.scalar(loss), bp.grads()};
}

double detector_loss(const Tensor& step_probs, int label) {
  if (step_probs.size() == 0) throw ShapeError("detector_loss: empty probability sequence");
  if (label != 0 && label != 1) throw ConfigError("detector_loss: label must be 0 or 1");
  double sum = 0.0;
  for (const double p : step_probs.data()) {
    const double q = label == 1 ? p : 1.0 - p;
    sum -= std::log(std::clamp(q, kProbFloor, 1.0 - kProbFloor));
  }
  return sum / static_cast<double>(step_probs.size());
}

std::string prf_to_json(const PRFReport& report) {
  nlohmann::ordered_json doc{{"precision", report.precision},
                             {"recall", report.recall},
                             {"f1", report.f1},
                             {"tp", report.tp},
                             {"fp", report.fp},
                             {"tn", report.tn},
                             {"fn", report.fn},
                             {"threshold", report.threshold}};
  return doc.dump(2) + "\n";
}

std::pair<Detector, DetectorTrainReport> train_detector(
    const std::vector<DetectionSample>& dataset, const DetectorTrainConfig& config) {
  if (config.batch < 1) throw ConfigError("train_detector: batch must be >= 1");
  if (!(config.lr > 0.0)) throw ConfigError("train_detector: lr must be positive");
  if (config.weight_decay < 0.0) throw ConfigError("train_detector: weight_decay must be >= 0");
  if (!(config.split > 0.0) || !(config.split < 1.0)) {
    throw ConfigError("train_detector: split must lie in (0, 1)");
  }
  if (dataset.empty()) throw ConfigError("train_detector: empty dataset");
  if (dataset.front().actions.empty()) throw ShapeError("train_detector: empty action sequence");

  DetectorConfig dc;
  dc.item_dim = dataset.front().actions.front().size();
  dc.hidden = config.hidden;
  dc.combiner_dim = config.combiner_dim;
  dc.dropout = config.dropout;
  dc.attn_context = config.attn_context;
  dc.gru_variant = config.gru_variant;
  validate_samples(dataset, dc);

  bool has_benign = false;
  bool has_adversarial = false;
  for (const DetectionSample& s : dataset) (s.label == 1 ? has_adversarial : has_benign) = true;
  if (!has_benign || !has_adversarial) {
    throw StateError("train_detector: dataset contains a single class");
  }

  Detector detector = make_detector(dc, derive_seed(config.seed, "detector-init"));

  const std::size_t n = dataset.size();
  Rng split_rng(derive_seed(config.seed, "detector-split"));
  const std::vector<std::size_t> order = split_rng.permutation(n);
  std::size_t n_train = static_cast<std::size_t>(config.split * static_cast<double>(n));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + n_train);
  std::vector<DetectionSample> val;
  val.reserve(n - n_train);
  for (std::size_t i = n_train; i < n; ++i) val.push_back(dataset[order[i]]);

  DetectorTrainReport report;
  AdamState opt;
  opt.lr = config.lr;
  opt.weight_decay = config.weight_decay;
  Rng dropout_rng(derive_seed(config.seed, "detector-dropout"));

  double best_f1 = -1.0;
  ParamSet best_params = detector.params;
  PRFReport best_val = evaluate_detector(detector, val);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng order_rng(derive_seed(config.seed, "detector-epoch", epoch));
    const std::vector<std::size_t> epoch_order = order_rng.permutation(n_train);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n_train; start += config.batch) {
      const std::size_t stop = std::min(start + config.batch, n_train);
      Graph g;
      BoundParams bp(g, detector.params, true);
      NodeId acc = kNoNode;
      for (std::size_t i = start; i < stop; ++i) {
        const DetectionSample& s = dataset[train_idx[epoch_order[i]]];
        ForwardNodes nodes =
            build_forward(g, bp, dc, bind_actions(g, s.actions), true, &dropout_rng);
        NodeId sample = loss_node(g, nodes.step_probs, s.label);
        acc = acc == kNoNode ? sample : g.add(acc, sample);
      }
      const double batch_size = static_cast<double>(stop - start);
      NodeId loss = g.affine(acc, 1.0 / batch_size, 0.0);
      g.backward(loss);
      loss_sum += g.scalar(loss) * batch_size;
      adam_step(detector.params, bp.grads(), opt);
    }
    report.train_loss_curve.push_back(loss_sum / static_cast<double>(n_train));

    const PRFReport val_report = evaluate_detector(detector, val);
    report.val_f1_curve.push_back(val_report.f1);
    if (val_report.f1 > best_f1) {
      best_f1 = val_report.f1;
      best_params = detector.params;
      best_val = val_report;
      report.best_epoch = epoch;
    }
  }

  detector.params = std::move(best_params);
  report.validation = best_val;
  return {std::move(detector), std::move(report)};
}

PRFReport evaluate_detector(const Detector& detector, const std::vector<DetectionSample>& dataset,
                            double threshold) {
  if (threshold < 0.0 || threshold > 1.0) {
    throw ConfigError("evaluate_detector: threshold must lie in [0, 1]");
  }
  validate_samples(dataset, detector.config);
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  for (const DetectionSample& s : dataset) {
    const DetectorEval eval = detector_forward(detector, s.actions);
    const bool predicted = eval.step_probs[eval.step_probs.size() - 1] > threshold;
    if (s.label == 1) {
      (predicted ? tp : fn) += 1;
    } else {
      (predicted ? fp : tn) += 1;
    }
  }
  return prf_from_counts(tp, fp, tn, fn, threshold);
}

void save_detector(const std::filesystem::path& path, const Detector& detector) {
  validate_config(detector.config);
  Checkpoint ck;
  ck.kind = "detector";
  nlohmann::ordered_json cfg;
  cfg["item_dim"] = detector.config.item_dim;
  cfg["hidden"] = detector.config.hidden;
  cfg["combiner_dim"] = detector.config.combiner_dim;
  cfg["dropout"] = detector.config.dropout;
  cfg["attn_context"] = detector.config.attn_context;
  cfg["gru_variant"] = detector.config.gru_variant;
  ck.config_json = cfg.dump();
  ck.params = detector.params;
  save_checkpoint(path, ck);
}

Detector load_detector(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path, "detector");
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(ck.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path.string() + "': bad detector config: " + e.what());
  }
  for (const char* key :
       {"item_dim", "hidden", "combiner_dim", "dropout", "attn_context", "gru_variant"}) {
    if (!cfg.contains(key)) {
      throw ParseError("'" + path.string() + "': detector config missing '" + std::string(key) +
                       "'");
    }
  }

  Detector d;
  d.config.item_dim = cfg["item_dim"].get<std::size_t>();
  d.config.hidden = cfg["hidden"].get<std::size_t>();
  d.config.combiner_dim = cfg["combiner_dim"].get<std::size_t>();
  d.config.dropout = cfg["dropout"].get<double>();
  d.config.attn_context = cfg["attn_context"].get<std::string>();
  d.config.gru_variant = cfg["gru_variant"].get<std::string>();
  try {
    validate_config(d.config);
  } catch (const ConfigError& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
  d.params = std::move(ck.params);

  auto expect = [&](const std::string& name, Shape shape) {
    if (!d.params.has(name) || !(d.params.at(name).shape() == shape)) {
      throw ParseError("'" + path.string() + "': parameter '" + name + "' missing or mis-shaped");
    }
  };
  for (const char* gru : {"encoder", "decoder"}) {
    for (const char* gate : {"z", "r", "h"}) {
      const std::string prefix = std::string(gru) + ".";
      expect(prefix + "w" + gate, {d.config.hidden, d.config.item_dim});
      expect(prefix + "u" + gate, {d.config.hidden, d.config.hidden});
      expect(prefix + "b" + gate, {d.config.hidden});
    }
  }
  expect("combiner.w", {d.config.combiner_dim, d.config.item_dim + 2 * d.config.hidden});
  expect("combiner.b", {d.config.combiner_dim});
  expect("attention.w", {1, d.config.combiner_dim});
  expect("attention.b", {1});
  expect("head.w", {1, d.config.hidden});
  expect("head.b", {1});
  return d;
}

}  // namespace advrec
