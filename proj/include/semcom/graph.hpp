#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "semcom/linalg.hpp"

namespace semcom {

using NodeId = std::uint32_t;

// Flat numeric tensor. Everything in this project is rank-1 or rank-2;
// the shape is kept for validation and serialization.
struct Tensor {
  Vec data;
  std::vector<std::size_t> shape;

  static Tensor vector(Vec v) {
    Tensor t;
    t.shape = {v.size()};
    t.data = std::move(v);
    return t;
  }

  std::size_t size() const { return data.size(); }
  std::vector<std::string> violations() const;
};

// Node vocabulary: enough for MLP-style fusion heads while keeping
// exact brute-force range oracles feasible.
struct InputNode {
  std::size_t modality = 0;
  std::size_t dim = 0;
};
struct AffineNode {
  Mat weight;  // (out_dim x in_dim)
  Vec bias;    // (out_dim)
};
struct ReluNode {};
struct ConcatNode {};  // parent order defines the block order
struct AddNode {};
struct ScaleNode {
  double factor = 1.0;
};

using NodeKind = std::variant<InputNode, AffineNode, ReluNode, ConcatNode, AddNode, ScaleNode>;

struct NodeSpec {
  NodeId id = 0;
  NodeKind kind;
  std::vector<NodeId> parents;
};

struct ModalityInput {
  NodeId node = 0;
  std::size_t dim = 0;
};

// DAG of elementary operations, stored in topological order with one
// output node and a per-modality input partition. Immutable after
// construction; evaluation is pure and thread-safe.
class CompGraph {
 public:
  CompGraph() = default;
  CompGraph(std::vector<NodeSpec> nodes, NodeId output, std::vector<ModalityInput> modalities);

  const std::vector<NodeSpec>& nodes() const { return nodes_; }
  NodeId output() const { return output_; }
  const std::vector<ModalityInput>& modalities() const { return modalities_; }

  bool has_node(NodeId id) const { return index_.count(id) > 0; }
  std::size_t index_of(NodeId id) const;
  const NodeSpec& node(NodeId id) const { return nodes_[index_of(id)]; }

  // Output dimension of a node, derived from its kind and parents.
  std::size_t node_dim(NodeId id) const;
  // Total input dimension (sum of modality dims).
  std::size_t input_dim() const;
  // Column offset of each modality block in a flattened input vector,
  // with the total dimension appended.
  std::vector<std::size_t> modality_offsets() const;

  std::size_t output_dim() const { return node_dim(output_); }

 private:
  std::vector<NodeSpec> nodes_;
  NodeId output_ = 0;
  std::vector<ModalityInput> modalities_;
  std::unordered_map<NodeId, std::size_t> index_;
};

// Diagnostic check of every structural invariant. Empty result means
// the graph is well formed; otherwise one entry per violation.
std::vector<std::string> validate_graph(const CompGraph& graph);

// Per-node activations from one evaluation, indexed by position in the
// topological node list. Unset slots trap on access.
class ForwardTrace {
 public:
  explicit ForwardTrace(std::size_t node_count) : values_(node_count) {}

  void set(std::size_t pos, Vec v) { values_[pos] = std::move(v); }
  const Vec& at(std::size_t pos) const;
  bool is_set(std::size_t pos) const { return values_[pos].has_value(); }

 private:
  std::vector<std::optional<Vec>> values_;
};

// Evaluate the graph on per-modality inputs. Deterministic and pure.
Vec forward(const CompGraph& graph, const std::vector<Vec>& modality_inputs);
ForwardTrace forward_trace(const CompGraph& graph, const std::vector<Vec>& modality_inputs);

// Evaluate on a single flattened input laid out by modality offsets.
Vec forward_flat(const CompGraph& graph, const Vec& flat_input);

std::vector<Vec> split_by_modality(const CompGraph& graph, const Vec& flat_input);
Vec flatten_modalities(const CompGraph& graph, const std::vector<Vec>& modality_inputs);

}  // namespace semcom
