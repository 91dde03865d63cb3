#include "semcom/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

#include "semcom/rng.hpp"

namespace semcom {

namespace {

// First-level stream tags; pipeline-level tags live in pipeline.cpp
// and start at 16.
constexpr std::uint64_t kTagWeights = 1;
constexpr std::uint64_t kTagTeacher = 2;
constexpr std::uint64_t kTagData = 3;
constexpr std::uint64_t kTagLabelNoise = 4;

Mat random_weight(std::size_t rows, std::size_t cols, RngStream& rng) {
  Mat w(rows, cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& v : w.data()) v = (2.0 * rng.next_unit() - 1.0) * scale;
  return w;
}

// Residual MLP block: a plain ReLU stack of width d can be born dead
// (every hidden unit inactive on the whole input cube, unrecoverable by
// gradient descent), which collapses the feature range and with it the
// modality's importance. The skip path keeps every encoder alive.
CompGraph make_encoder(std::uint64_t seed, std::size_t graph_index, std::size_t modality,
                       std::size_t dim) {
  std::vector<NodeSpec> nodes;
  nodes.push_back({0, InputNode{modality, dim}, {}});
  {
    RngStream rng(substream(seed, {kTagWeights, graph_index, 1}));
    nodes.push_back({1, AffineNode{random_weight(dim, dim, rng), Vec(dim, 0.0)}, {0}});
  }
  nodes.push_back({2, ReluNode{}, {1}});
  {
    RngStream rng(substream(seed, {kTagWeights, graph_index, 3}));
    nodes.push_back({3, AffineNode{random_weight(dim, dim, rng), Vec(dim, 0.0)}, {2}});
  }
  nodes.push_back({4, ScaleNode{0.5}, {0}});
  nodes.push_back({5, AddNode{}, {3, 4}});
  return CompGraph(std::move(nodes), 5, {{0, dim}});
}

CompGraph make_decoder(std::uint64_t seed, std::size_t graph_index,
                       const std::vector<std::size_t>& dims, std::size_t hidden) {
  std::vector<NodeSpec> nodes;
  std::vector<ModalityInput> partition;
  std::vector<NodeId> inputs;
  std::size_t total = 0;
  for (std::size_t m = 0; m < dims.size(); ++m) {
    nodes.push_back({static_cast<NodeId>(m), InputNode{m, dims[m]}, {}});
    partition.push_back({static_cast<NodeId>(m), dims[m]});
    inputs.push_back(static_cast<NodeId>(m));
    total += dims[m];
  }
  const NodeId concat_id = static_cast<NodeId>(dims.size());
  nodes.push_back({concat_id, ConcatNode{}, inputs});
  const NodeId fc1 = concat_id + 1;
  {
    RngStream rng(substream(seed, {kTagWeights, graph_index, fc1}));
    nodes.push_back({fc1, AffineNode{random_weight(hidden, total, rng), Vec(hidden, 0.0)}, {concat_id}});
  }
  const NodeId relu = fc1 + 1;
  nodes.push_back({relu, ReluNode{}, {fc1}});
  const NodeId fc2 = relu + 1;
  {
    RngStream rng(substream(seed, {kTagWeights, graph_index, fc2}));
    nodes.push_back({fc2, AffineNode{random_weight(1, hidden, rng), Vec(1, 0.0)}, {relu}});
  }
  return CompGraph(std::move(nodes), fc2, std::move(partition));
}

}  // namespace

ToyFusionModel make_toy_fusion(std::uint64_t seed, const std::vector<std::size_t>& modality_dims,
                               std::size_t hidden_dim) {
  if (modality_dims.empty()) throw std::invalid_argument("make_toy_fusion: no modalities");
  for (std::size_t d : modality_dims)
    if (d < 1) throw std::invalid_argument("make_toy_fusion: modality dims must be >= 1");
  if (hidden_dim < 1) throw std::invalid_argument("make_toy_fusion: hidden_dim must be >= 1");

  ToyFusionModel model;
  model.seed = seed;
  model.modality_dims = modality_dims;
  model.hidden_dim = hidden_dim;
  for (std::size_t m = 0; m < modality_dims.size(); ++m)
    model.encoders.push_back(make_encoder(seed, m, m, modality_dims[m]));
  model.decoder = make_decoder(seed, modality_dims.size(), modality_dims, hidden_dim);
  return model;
}

Dataset make_synthetic_dataset(std::uint64_t seed, const std::vector<std::size_t>& modality_dims,
                               std::size_t count, double noise_sigma,
                               const Vec& modality_emphasis) {
  // The teacher is a fusion net of the same family with its own seed;
  // its weights stay hidden from the trained model.
  ToyFusionModel teacher = make_toy_fusion(substream(seed, kTagTeacher), modality_dims, 8);
  if (!modality_emphasis.empty()) {
    if (modality_emphasis.size() != modality_dims.size())
      throw std::invalid_argument("make_synthetic_dataset: one emphasis per modality");
    // Scale the teacher decoder's input columns per modality.
    std::vector<NodeSpec> nodes = teacher.decoder.nodes();
    const auto offsets = teacher.decoder.modality_offsets();
    for (NodeSpec& n : nodes) {
      auto* aff = std::get_if<AffineNode>(&n.kind);
      if (!aff || aff->weight.cols() != teacher.decoder.input_dim()) continue;
      for (std::size_t m = 0; m < modality_emphasis.size(); ++m)
        for (std::size_t c = offsets[m]; c < offsets[m + 1]; ++c)
          for (std::size_t r = 0; r < aff->weight.rows(); ++r)
            aff->weight(r, c) *= modality_emphasis[m];
      break;
    }
    teacher.decoder =
        CompGraph(std::move(nodes), teacher.decoder.output(), teacher.decoder.modalities());
  }
  Dataset data;
  data.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    RngStream in_rng(substream(seed, {kTagData, i}));
    RegressionSample s;
    for (std::size_t d : modality_dims) {
      Vec x(d);
      for (double& v : x) v = in_rng.next_unit();
      s.inputs.push_back(std::move(x));
    }
    RngStream noise_rng(substream(seed, {kTagLabelNoise, i}));
    s.label = model_output(teacher, s.inputs) + noise_sigma * noise_rng.next_gaussian();
    data.push_back(std::move(s));
  }
  return data;
}

std::vector<Vec> encode_features(const ToyFusionModel& model, const std::vector<Vec>& inputs) {
  if (inputs.size() != model.encoders.size())
    throw std::invalid_argument("encode_features: modality count mismatch");
  std::vector<Vec> features;
  features.reserve(inputs.size());
  for (std::size_t m = 0; m < inputs.size(); ++m)
    features.push_back(forward(model.encoders[m], {inputs[m]}));
  return features;
}

double decoder_output(const ToyFusionModel& model, const std::vector<Vec>& features) {
  return forward(model.decoder, features).front();
}

double model_output(const ToyFusionModel& model, const std::vector<Vec>& inputs) {
  return decoder_output(model, encode_features(model, inputs));
}

namespace {

// Reverse-mode sweep over one graph: distributes the output adjoint to
// affine parameters and returns the adjoint at each modality input.
std::vector<Vec> backward_graph(const CompGraph& graph, const ForwardTrace& trace,
                                const Vec& out_adjoint, GraphGradients& grads) {
  const auto& nodes = graph.nodes();
  std::vector<Vec> adjoint(nodes.size());
  adjoint[graph.index_of(graph.output())] = out_adjoint;

  std::vector<Vec> input_adjoints(graph.modalities().size());

  for (std::size_t pos = nodes.size(); pos-- > 0;) {
    if (adjoint[pos].empty()) continue;
    const NodeSpec& n = nodes[pos];
    const Vec& adj = adjoint[pos];

    auto parent_adjoint = [&](NodeId p) -> Vec& {
      Vec& a = adjoint[graph.index_of(p)];
      if (a.empty()) a.assign(graph.node_dim(p), 0.0);
      return a;
    };

    if (std::holds_alternative<InputNode>(n.kind)) {
      for (std::size_t m = 0; m < graph.modalities().size(); ++m)
        if (graph.modalities()[m].node == n.id) input_adjoints[m] = adj;
    } else if (auto* aff = std::get_if<AffineNode>(&n.kind)) {
      const Vec& x = trace.at(graph.index_of(n.parents.front()));
      auto it = grads.affine.find(n.id);
      if (it == grads.affine.end())
        it = grads.affine
                 .emplace(n.id, AffineGrad{Mat(aff->weight.rows(), aff->weight.cols()),
                                           Vec(aff->bias.size(), 0.0)})
                 .first;
      AffineGrad& g = it->second;
      for (std::size_t r = 0; r < aff->weight.rows(); ++r) {
        g.bias[r] += adj[r];
        for (std::size_t c = 0; c < aff->weight.cols(); ++c) g.weight(r, c) += adj[r] * x[c];
      }
      Vec& pa = parent_adjoint(n.parents.front());
      for (std::size_t c = 0; c < aff->weight.cols(); ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < aff->weight.rows(); ++r) acc += aff->weight(r, c) * adj[r];
        pa[c] += acc;
      }
    } else if (std::holds_alternative<ReluNode>(n.kind)) {
      const Vec& x = trace.at(graph.index_of(n.parents.front()));
      Vec& pa = parent_adjoint(n.parents.front());
      for (std::size_t i = 0; i < adj.size(); ++i)
        if (x[i] > 0.0) pa[i] += adj[i];
    } else if (std::holds_alternative<ConcatNode>(n.kind)) {
      std::size_t off = 0;
      for (NodeId p : n.parents) {
        const std::size_t pd = graph.node_dim(p);
        Vec& pa = parent_adjoint(p);
        for (std::size_t i = 0; i < pd; ++i) pa[i] += adj[off + i];
        off += pd;
      }
    } else if (std::holds_alternative<AddNode>(n.kind)) {
      for (NodeId p : n.parents) {
        Vec& pa = parent_adjoint(p);
        for (std::size_t i = 0; i < adj.size(); ++i) pa[i] += adj[i];
      }
    } else if (auto* sc = std::get_if<ScaleNode>(&n.kind)) {
      Vec& pa = parent_adjoint(n.parents.front());
      for (std::size_t i = 0; i < adj.size(); ++i) pa[i] += sc->factor * adj[i];
    }
  }
  return input_adjoints;
}

}  // namespace

double loss_and_gradients(const ToyFusionModel& model, const Dataset& data,
                          ModelGradients* grads) {
  if (data.empty()) throw std::invalid_argument("loss_and_gradients: empty dataset");
  if (grads) {
    grads->encoders.assign(model.encoders.size(), GraphGradients{});
    grads->decoder = GraphGradients{};
  }

  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (const RegressionSample& s : data) {
    std::vector<ForwardTrace> enc_traces;
    std::vector<Vec> features;
    for (std::size_t m = 0; m < model.encoders.size(); ++m) {
      enc_traces.push_back(forward_trace(model.encoders[m], {s.inputs[m]}));
      features.push_back(
          enc_traces.back().at(model.encoders[m].index_of(model.encoders[m].output())));
    }
    ForwardTrace dec_trace = forward_trace(model.decoder, features);
    const double y = dec_trace.at(model.decoder.index_of(model.decoder.output())).front();
    const double err = y - s.label;
    loss += err * err * inv_n;

    if (!grads) continue;
    const Vec out_adjoint{2.0 * err * inv_n};
    std::vector<Vec> feature_adjoints =
        backward_graph(model.decoder, dec_trace, out_adjoint, grads->decoder);
    for (std::size_t m = 0; m < model.encoders.size(); ++m)
      backward_graph(model.encoders[m], enc_traces[m], feature_adjoints[m], grads->encoders[m]);
  }
  return loss;
}

namespace {

void apply_gradients(CompGraph& graph, const GraphGradients& grads, double step) {
  std::vector<NodeSpec> nodes = graph.nodes();
  for (NodeSpec& n : nodes) {
    auto it = grads.affine.find(n.id);
    if (it == grads.affine.end()) continue;
    auto* aff = std::get_if<AffineNode>(&n.kind);
    if (!aff) continue;
    for (std::size_t i = 0; i < aff->weight.data().size(); ++i)
      aff->weight.data()[i] -= step * it->second.weight.data()[i];
    for (std::size_t i = 0; i < aff->bias.size(); ++i) aff->bias[i] -= step * it->second.bias[i];
  }
  graph = CompGraph(std::move(nodes), graph.output(), graph.modalities());
}

}  // namespace

ToyFusionModel train_toy(const ToyFusionModel& model, const Dataset& data, int epochs,
                         double step_size) {
  if (epochs < 0) throw std::invalid_argument("train_toy: negative epochs");
  for (const RegressionSample& s : data) {
    if (s.inputs.size() != model.modality_dims.size())
      throw std::invalid_argument("train_toy: sample modality count mismatch");
    for (std::size_t m = 0; m < s.inputs.size(); ++m)
      if (s.inputs[m].size() != model.modality_dims[m])
        throw std::invalid_argument("train_toy: sample dim mismatch at modality " +
                                    std::to_string(m));
  }

  ToyFusionModel out = model;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    ModelGradients grads;
    const double loss = loss_and_gradients(out, data, &grads);
    if (!std::isfinite(loss))
      throw std::runtime_error("train_toy: non-finite loss at epoch " + std::to_string(epoch));
    for (std::size_t m = 0; m < out.encoders.size(); ++m)
      apply_gradients(out.encoders[m], grads.encoders[m], step_size);
    apply_gradients(out.decoder, grads.decoder, step_size);
    out.training_loss = loss;
  }
  if (epochs > 0) out.training_loss = loss_and_gradients(out, data, nullptr);
  return out;
}

ToyFusionModel calibrate_normalization(const ToyFusionModel& model, const Dataset& batch) {
  if (batch.empty()) throw std::invalid_argument("calibrate_normalization: empty batch");

  // Per-feature min/max of encoder outputs over the batch.
  std::vector<Vec> lo(model.encoders.size()), hi(model.encoders.size());
  for (std::size_t m = 0; m < model.encoders.size(); ++m) {
    lo[m].assign(model.modality_dims[m], std::numeric_limits<double>::infinity());
    hi[m].assign(model.modality_dims[m], -std::numeric_limits<double>::infinity());
  }
  for (const RegressionSample& s : batch) {
    std::vector<Vec> u = encode_features(model, s.inputs);
    for (std::size_t m = 0; m < u.size(); ++m)
      for (std::size_t j = 0; j < u[m].size(); ++j) {
        lo[m][j] = std::min(lo[m][j], u[m][j]);
        hi[m][j] = std::max(hi[m][j], u[m][j]);
      }
  }

  ToyFusionModel out = model;
  std::vector<Vec> width(model.encoders.size());
  for (std::size_t m = 0; m < model.encoders.size(); ++m) {
    width[m].resize(model.modality_dims[m]);
    for (std::size_t j = 0; j < width[m].size(); ++j)
      width[m][j] = std::max(hi[m][j] - lo[m][j], 1e-9);

    // Squash node u' = (u - lo) / width appended to the encoder.
    const std::size_t d = model.modality_dims[m];
    Mat w(d, d);
    Vec b(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      w(j, j) = 1.0 / width[m][j];
      b[j] = -lo[m][j] / width[m][j];
    }
    std::vector<NodeSpec> nodes = out.encoders[m].nodes();
    NodeId squash_id = 0;
    for (const NodeSpec& n : nodes) squash_id = std::max(squash_id, n.id);
    ++squash_id;
    nodes.push_back({squash_id, AffineNode{std::move(w), std::move(b)},
                     {out.encoders[m].output()}});
    out.encoders[m] =
        CompGraph(std::move(nodes), squash_id, out.encoders[m].modalities());
  }

  // Fold the inverse squash u = width*u' + lo into the decoder's first
  // affine layer so end-to-end outputs are unchanged.
  std::vector<NodeSpec> dec_nodes = out.decoder.nodes();
  const auto offsets = out.decoder.modality_offsets();
  // The affine being rewritten must consume the concatenated raw
  // features directly.
  auto reads_concat_of_inputs = [&](const NodeSpec& n) {
    if (n.parents.size() != 1) return false;
    const NodeSpec& p = out.decoder.node(n.parents.front());
    if (!std::holds_alternative<ConcatNode>(p.kind)) return false;
    for (NodeId q : p.parents)
      if (!std::holds_alternative<InputNode>(out.decoder.node(q).kind)) return false;
    return true;
  };
  bool folded = false;
  for (NodeSpec& n : dec_nodes) {
    auto* aff = std::get_if<AffineNode>(&n.kind);
    if (!aff) continue;
    if (aff->weight.cols() != out.decoder.input_dim() || !reads_concat_of_inputs(n)) continue;
    for (std::size_t m = 0; m < width.size(); ++m) {
      for (std::size_t j = 0; j < width[m].size(); ++j) {
        const std::size_t col = offsets[m] + j;
        for (std::size_t r = 0; r < aff->weight.rows(); ++r) {
          aff->bias[r] += aff->weight(r, col) * lo[m][j];
          aff->weight(r, col) *= width[m][j];
        }
      }
    }
    folded = true;
    break;
  }
  if (!folded)
    throw std::runtime_error("calibrate_normalization: decoder has no full-width affine layer");
  out.decoder = CompGraph(std::move(dec_nodes), out.decoder.output(), out.decoder.modalities());
  return out;
}

std::uint64_t model_checksum(const ToyFusionModel& model) {
  std::uint64_t h = mix64(model.seed + kGoldenGamma);
  auto fold = [&h](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = mix64(h ^ bits);
  };
  auto fold_graph = [&](const CompGraph& g) {
    for (const NodeSpec& n : g.nodes()) {
      if (auto* aff = std::get_if<AffineNode>(&n.kind)) {
        for (double v : aff->weight.data()) fold(v);
        for (double v : aff->bias) fold(v);
      } else if (auto* sc = std::get_if<ScaleNode>(&n.kind)) {
        fold(sc->factor);
      }
    }
  };
  for (const CompGraph& g : model.encoders) fold_graph(g);
  fold_graph(model.decoder);
  return h;
}

}  // namespace semcom
