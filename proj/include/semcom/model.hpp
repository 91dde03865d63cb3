#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "semcom/graph.hpp"

namespace semcom {

// Small multi-modal fusion regressor: one encoder graph per modality
// feeding a shared scalar-output decoder over the concatenated
// features. Models are values; training and calibration return new
// instances.
struct ToyFusionModel {
  std::vector<CompGraph> encoders;
  CompGraph decoder;
  std::uint64_t seed = 0;
  std::vector<std::size_t> modality_dims;
  std::size_t hidden_dim = 0;
  double training_loss = -1.0;  // < 0 until trained
};

// Reproducible construction: weights uniform on [-1, 1] scaled by
// 1/sqrt(fan_in), biases zero, all drawn from per-node substreams of
// the seed. Encoders are d -> d MLPs (Affine, ReLU, Affine); the
// decoder is Concat -> Affine(hidden) -> ReLU -> Affine(1).
ToyFusionModel make_toy_fusion(std::uint64_t seed, const std::vector<std::size_t>& modality_dims,
                               std::size_t hidden_dim);

struct RegressionSample {
  std::vector<Vec> inputs;  // per modality
  double label = 0.0;
};
using Dataset = std::vector<RegressionSample>;

// Inputs uniform on [0,1]^d, labels from a hidden teacher network plus
// Gaussian noise. `modality_emphasis` scales how strongly each modality
// drives the teacher's output (empty = all ones); it shapes the
// semantic importance profile of models trained on the data.
Dataset make_synthetic_dataset(std::uint64_t seed, const std::vector<std::size_t>& modality_dims,
                               std::size_t count, double noise_sigma = 0.01,
                               const Vec& modality_emphasis = {});

std::vector<Vec> encode_features(const ToyFusionModel& model, const std::vector<Vec>& inputs);
double decoder_output(const ToyFusionModel& model, const std::vector<Vec>& features);
double model_output(const ToyFusionModel& model, const std::vector<Vec>& inputs);

struct AffineGrad {
  Mat weight;
  Vec bias;
};
struct GraphGradients {
  std::unordered_map<NodeId, AffineGrad> affine;
};
struct ModelGradients {
  std::vector<GraphGradients> encoders;
  GraphGradients decoder;
};

// Mean squared error over the dataset; gradients of it w.r.t. every
// affine parameter when `grads` is non-null.
double loss_and_gradients(const ToyFusionModel& model, const Dataset& data, ModelGradients* grads);

// Full-batch gradient descent. Aborts with a diagnostic if the loss
// goes non-finite. Zero epochs returns the model unchanged.
ToyFusionModel train_toy(const ToyFusionModel& model, const Dataset& data, int epochs,
                         double step_size);

// Appends a min-max affine squash to each encoder so features land in
// [0, 1] over the calibration batch, and folds the inverse into the
// decoder's first affine layer: end-to-end outputs are preserved.
ToyFusionModel calibrate_normalization(const ToyFusionModel& model, const Dataset& batch);

// Order-sensitive hash of every weight and bias bit pattern.
std::uint64_t model_checksum(const ToyFusionModel& model);

}  // namespace semcom
