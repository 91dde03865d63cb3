#include "semcom/graph.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace semcom {

std::vector<std::string> Tensor::violations() const {
  std::vector<std::string> out;
  std::size_t prod = 1;
  for (std::size_t d : shape) {
    if (d == 0) out.push_back("zero dimension in shape");
    prod *= d;
  }
  if (prod != data.size()) out.push_back("shape product does not match data length");
  for (double v : data) {
    if (!std::isfinite(v)) {
      out.push_back("non-finite entry");
      break;
    }
  }
  return out;
}

CompGraph::CompGraph(std::vector<NodeSpec> nodes, NodeId output,
                     std::vector<ModalityInput> modalities)
    : nodes_(std::move(nodes)), output_(output), modalities_(std::move(modalities)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) index_[nodes_[i].id] = i;
}

std::size_t CompGraph::index_of(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::invalid_argument("unknown node id " + std::to_string(id));
  return it->second;
}

std::size_t CompGraph::node_dim(NodeId id) const {
  const NodeSpec& n = node(id);
  if (auto* in = std::get_if<InputNode>(&n.kind)) return in->dim;
  if (auto* aff = std::get_if<AffineNode>(&n.kind)) return aff->weight.rows();
  if (std::holds_alternative<ConcatNode>(n.kind)) {
    std::size_t total = 0;
    for (NodeId p : n.parents) total += node_dim(p);
    return total;
  }
  // ReLU / Add / Scale preserve the parent dimension.
  if (n.parents.empty()) throw std::invalid_argument("node " + std::to_string(id) + " has no parent");
  return node_dim(n.parents.front());
}

std::size_t CompGraph::input_dim() const {
  std::size_t total = 0;
  for (const auto& m : modalities_) total += m.dim;
  return total;
}

std::vector<std::size_t> CompGraph::modality_offsets() const {
  std::vector<std::size_t> offsets(modalities_.size() + 1, 0);
  for (std::size_t m = 0; m < modalities_.size(); ++m)
    offsets[m + 1] = offsets[m] + modalities_[m].dim;
  return offsets;
}

namespace {

std::string node_tag(NodeId id) { return "node " + std::to_string(id); }

}  // namespace

std::vector<std::string> validate_graph(const CompGraph& graph) {
  std::vector<std::string> out;
  const auto& nodes = graph.nodes();

  std::set<NodeId> seen;
  for (const NodeSpec& n : nodes) {
    if (!seen.insert(n.id).second) out.push_back("duplicate id: " + node_tag(n.id));
  }

  // Parents must exist and precede their child: this is both the DAG
  // check and the topological-order check in one pass.
  std::set<NodeId> preceding;
  for (const NodeSpec& n : nodes) {
    for (NodeId p : n.parents) {
      if (!seen.count(p)) {
        out.push_back("not a DAG: " + node_tag(n.id) + " references unknown parent " +
                      std::to_string(p));
      } else if (!preceding.count(p)) {
        out.push_back("not a DAG: " + node_tag(n.id) + " parent " + std::to_string(p) +
                      " does not precede it");
      }
    }
    preceding.insert(n.id);
  }
  if (!out.empty()) return out;  // dimension checks need a sane topology

  // Kind-specific arity and dimension rules.
  for (const NodeSpec& n : nodes) {
    if (auto* in = std::get_if<InputNode>(&n.kind)) {
      if (!n.parents.empty()) out.push_back("input " + node_tag(n.id) + " has parents");
      if (in->dim == 0) out.push_back("input " + node_tag(n.id) + " has zero dim");
      continue;
    }
    if (n.parents.empty()) {
      out.push_back(node_tag(n.id) + " has no parents");
      continue;
    }
    if (auto* aff = std::get_if<AffineNode>(&n.kind)) {
      if (n.parents.size() != 1) out.push_back("affine " + node_tag(n.id) + " needs one parent");
      const std::size_t pdim = graph.node_dim(n.parents.front());
      if (aff->weight.cols() != pdim)
        out.push_back("dim mismatch at " + node_tag(n.id) + ": weight cols " +
                      std::to_string(aff->weight.cols()) + " vs parent dim " +
                      std::to_string(pdim));
      if (aff->bias.size() != aff->weight.rows())
        out.push_back("dim mismatch at " + node_tag(n.id) + ": bias size " +
                      std::to_string(aff->bias.size()) + " vs weight rows " +
                      std::to_string(aff->weight.rows()));
    } else if (std::holds_alternative<AddNode>(n.kind)) {
      const std::size_t d0 = graph.node_dim(n.parents.front());
      for (NodeId p : n.parents) {
        if (graph.node_dim(p) != d0) {
          out.push_back("dim mismatch at " + node_tag(n.id) + ": add parents differ");
          break;
        }
      }
    } else if (std::holds_alternative<ReluNode>(n.kind) ||
               std::holds_alternative<ScaleNode>(n.kind)) {
      if (n.parents.size() != 1) out.push_back(node_tag(n.id) + " needs exactly one parent");
    }
  }

  // Exactly one childless node, and it must be the declared output.
  std::set<NodeId> with_children;
  for (const NodeSpec& n : nodes)
    for (NodeId p : n.parents) with_children.insert(p);
  std::vector<NodeId> childless;
  for (const NodeSpec& n : nodes)
    if (!with_children.count(n.id)) childless.push_back(n.id);
  if (childless.size() != 1)
    out.push_back("expected exactly one output node, found " + std::to_string(childless.size()));
  else if (childless.front() != graph.output())
    out.push_back("declared output " + node_tag(graph.output()) + " is not the childless node");
  if (!graph.has_node(graph.output())) out.push_back("output node does not exist");

  // Every non-input node must be reachable from at least one input.
  std::set<NodeId> touches_input;
  for (const NodeSpec& n : nodes) {
    if (std::holds_alternative<InputNode>(n.kind)) {
      touches_input.insert(n.id);
      continue;
    }
    for (NodeId p : n.parents) {
      if (touches_input.count(p)) {
        touches_input.insert(n.id);
        break;
      }
    }
  }
  for (const NodeSpec& n : nodes)
    if (!touches_input.count(n.id))
      out.push_back(node_tag(n.id) + " is not reachable from any input");

  // Modality partition must name real input nodes and cover them all.
  std::size_t partition_dim = 0;
  std::set<NodeId> partition_nodes;
  for (const ModalityInput& m : graph.modalities()) {
    partition_dim += m.dim;
    partition_nodes.insert(m.node);
    if (!graph.has_node(m.node)) {
      out.push_back("modality partition names unknown " + node_tag(m.node));
      continue;
    }
    const NodeSpec& n = graph.node(m.node);
    auto* in = std::get_if<InputNode>(&n.kind);
    if (!in)
      out.push_back("modality partition entry " + node_tag(m.node) + " is not an input");
    else if (in->dim != m.dim)
      out.push_back("modality partition dim mismatch at " + node_tag(m.node));
  }
  std::size_t actual_input_dim = 0;
  for (const NodeSpec& n : nodes) {
    if (auto* in = std::get_if<InputNode>(&n.kind)) {
      actual_input_dim += in->dim;
      if (!partition_nodes.count(n.id))
        out.push_back("input " + node_tag(n.id) + " missing from modality partition");
    }
  }
  if (partition_dim != actual_input_dim)
    out.push_back("modality dims sum " + std::to_string(partition_dim) +
                  " does not match total input dim " + std::to_string(actual_input_dim));

  return out;
}

const Vec& ForwardTrace::at(std::size_t pos) const {
  if (!values_[pos].has_value())
    throw std::logic_error("read of unset node value at position " + std::to_string(pos));
  return *values_[pos];
}

ForwardTrace forward_trace(const CompGraph& graph, const std::vector<Vec>& modality_inputs) {
  if (modality_inputs.size() != graph.modalities().size())
    throw std::invalid_argument("forward: expected " + std::to_string(graph.modalities().size()) +
                                " modality inputs, got " + std::to_string(modality_inputs.size()));
  for (std::size_t m = 0; m < modality_inputs.size(); ++m) {
    if (modality_inputs[m].size() != graph.modalities()[m].dim)
      throw std::invalid_argument("forward: dim mismatch at input node " +
                                  std::to_string(graph.modalities()[m].node));
  }

  const auto& nodes = graph.nodes();
  ForwardTrace trace(nodes.size());
  for (std::size_t pos = 0; pos < nodes.size(); ++pos) {
    const NodeSpec& n = nodes[pos];
    if (auto* in = std::get_if<InputNode>(&n.kind)) {
      // Find which modality entry this input belongs to.
      for (std::size_t m = 0; m < graph.modalities().size(); ++m) {
        if (graph.modalities()[m].node == n.id) {
          trace.set(pos, modality_inputs[m]);
          break;
        }
      }
      if (!trace.is_set(pos))
        throw std::invalid_argument("forward: input node " + std::to_string(n.id) +
                                    " missing from modality partition");
      (void)in;
      continue;
    }
    auto parent_value = [&](NodeId p) -> const Vec& { return trace.at(graph.index_of(p)); };

    if (auto* aff = std::get_if<AffineNode>(&n.kind)) {
      const Vec& x = parent_value(n.parents.front());
      if (x.size() != aff->weight.cols())
        throw std::invalid_argument("forward: dim mismatch at node " + std::to_string(n.id));
      Vec y = matvec(aff->weight, x);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += aff->bias[i];
      trace.set(pos, std::move(y));
    } else if (std::holds_alternative<ReluNode>(n.kind)) {
      Vec y = parent_value(n.parents.front());
      for (double& v : y) v = v > 0.0 ? v : 0.0;
      trace.set(pos, std::move(y));
    } else if (std::holds_alternative<ConcatNode>(n.kind)) {
      Vec y;
      for (NodeId p : n.parents) {
        const Vec& x = parent_value(p);
        y.insert(y.end(), x.begin(), x.end());
      }
      trace.set(pos, std::move(y));
    } else if (std::holds_alternative<AddNode>(n.kind)) {
      Vec y = parent_value(n.parents.front());
      for (std::size_t k = 1; k < n.parents.size(); ++k) {
        const Vec& x = parent_value(n.parents[k]);
        if (x.size() != y.size())
          throw std::invalid_argument("forward: dim mismatch at node " + std::to_string(n.id));
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
      }
      trace.set(pos, std::move(y));
    } else if (auto* sc = std::get_if<ScaleNode>(&n.kind)) {
      Vec y = parent_value(n.parents.front());
      for (double& v : y) v *= sc->factor;
      trace.set(pos, std::move(y));
    } else {
      throw std::invalid_argument("forward: unsupported node kind at node " +
                                  std::to_string(n.id));
    }
  }
  return trace;
}

Vec forward(const CompGraph& graph, const std::vector<Vec>& modality_inputs) {
  ForwardTrace trace = forward_trace(graph, modality_inputs);
  return trace.at(graph.index_of(graph.output()));
}

std::vector<Vec> split_by_modality(const CompGraph& graph, const Vec& flat_input) {
  if (flat_input.size() != graph.input_dim())
    throw std::invalid_argument("split_by_modality: dim mismatch");
  std::vector<Vec> out;
  const auto offsets = graph.modality_offsets();
  for (std::size_t m = 0; m < graph.modalities().size(); ++m)
    out.emplace_back(flat_input.begin() + offsets[m], flat_input.begin() + offsets[m + 1]);
  return out;
}

Vec flatten_modalities(const CompGraph& graph, const std::vector<Vec>& modality_inputs) {
  Vec flat;
  flat.reserve(graph.input_dim());
  for (const Vec& v : modality_inputs) flat.insert(flat.end(), v.begin(), v.end());
  return flat;
}

Vec forward_flat(const CompGraph& graph, const Vec& flat_input) {
  return forward(graph, split_by_modality(graph, flat_input));
}

}  // namespace semcom
