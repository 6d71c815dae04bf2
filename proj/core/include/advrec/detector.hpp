#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "advrec/embedding.hpp"
#include "advrec/nn.hpp"
#include "advrec/tensor.hpp"
#include "advrec/trajectory.hpp"

namespace advrec {

struct DetectorConfig {
  std::size_t item_dim = 0;
  std::size_t hidden = 32;  // shared by encoder and decoder
  std::size_t combiner_dim = 32;
  double dropout = 0.5;                 // applied to the combiner output only
  std::string attn_context = "final";   // or "per_step"
  std::string gru_variant = "standard";  // or "paper"
};

/// GRU encoder over action embeddings plus an attention-based decoder
/// classifier: e_t = relu(combiner([a_t || hid_t || h])) scores feed a joint
/// softmax over the T steps, the decoder GRU re-reads alpha_t*a_t, and the
/// head emits a per-step attack probability.
struct Detector {
  DetectorConfig config;
  ParamSet params;
};

Detector make_detector(const DetectorConfig& config, std::uint64_t seed);

struct DetectionSample {
  std::vector<Tensor> actions;  // T item embedding vectors
  int label = 0;                // 1 = adversarial
};

/// Maps each trajectory to a sample: step actions become their item
/// embedding vectors.
std::vector<DetectionSample> detection_samples(std::span<const Trajectory> trajectories,
                                               const EmbeddingTable& table, int label);

/// Encoder states h_1..h_T (h_0 = 0).
std::vector<Tensor> detector_encode(const Detector& detector, const std::vector<Tensor>& actions);

struct DetectorEval {
  Tensor step_probs;  // p_1..p_T
  Tensor attention;   // alpha_1..alpha_T, sums to 1
};

/// Inference pass: dropout off, fully deterministic.
DetectorEval detector_forward(const Detector& detector, const std::vector<Tensor>& actions);

/// Mean per-step binary cross-entropy, probabilities clamped to
/// [1e-7, 1-1e-7] before the log.
double detector_loss(const Tensor& step_probs, int label);

/// Loss and parameter gradients for one sample, dropout off.
std::pair<double, GradMap> detector_grads(const Detector& detector, const DetectionSample& sample);

struct PRFReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  double threshold = 0.5;
};

std::string prf_to_json(const PRFReport& report);

struct DetectorTrainConfig {
  std::size_t epochs = 30;
  std::size_t batch = 16;
  double lr = 5e-4;
  double weight_decay = 0.01;
  std::size_t hidden = 32;
  std::size_t combiner_dim = 32;
  double dropout = 0.5;
  std::string attn_context = "final";
  std::string gru_variant = "standard";
  double split = 0.8;  // train fraction
  std::uint64_t seed = 0;
};

struct DetectorTrainReport {
  std::vector<double> train_loss_curve;  // one epoch-mean entry per epoch
  std::vector<double> val_f1_curve;
  std::size_t best_epoch = 0;
  PRFReport validation;  // at the best epoch
};

/// Adam on shuffled mini-batches with a one-time shuffled train/validation
/// split. Returns the parameters of the best-validation-F1 epoch (first epoch
/// wins ties); epochs = 0 returns the initialization with its chance-level
/// validation report.
std::pair<Detector, DetectorTrainReport> train_detector(
    const std::vector<DetectionSample>& dataset, const DetectorTrainConfig& config);

/// Prediction rule: p_T > threshold.
PRFReport evaluate_detector(const Detector& detector, const std::vector<DetectionSample>& dataset,
                            double threshold = 0.5);

void save_detector(const std::filesystem::path& path, const Detector& detector);
Detector load_detector(const std::filesystem::path& path);

}  // namespace advrec
