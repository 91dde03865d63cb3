#include "semcom/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace semcom {

NormOrder conjugate(NormOrder p) {
  switch (p) {
    case NormOrder::l1:
      return NormOrder::linf;
    case NormOrder::l2:
      return NormOrder::l2;
    case NormOrder::linf:
      return NormOrder::l1;
  }
  throw std::invalid_argument("unsupported norm order");
}

double norm_of(const double* v, std::size_t n, NormOrder order) {
  switch (order) {
    case NormOrder::l1: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += std::abs(v[i]);
      return acc;
    }
    case NormOrder::l2: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += v[i] * v[i];
      return std::sqrt(acc);
    }
    case NormOrder::linf: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc = std::max(acc, std::abs(v[i]));
      return acc;
    }
  }
  throw std::invalid_argument("unsupported norm order");
}

double norm_of(const Vec& v, NormOrder order) { return norm_of(v.data(), v.size(), order); }

double dual_norm(const Vec& v, NormOrder p) { return norm_of(v, conjugate(p)); }

Vec dual_maximizer(const Vec& v, NormOrder p) {
  bool all_zero = true;
  for (double x : v)
    if (x != 0.0) all_zero = false;
  if (v.empty() || all_zero) throw std::invalid_argument("dual_maximizer: zero vector");

  Vec out(v.size(), 0.0);
  switch (p) {
    case NormOrder::l2: {
      const double n = norm_of(v, NormOrder::l2);
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
      return out;
    }
    case NormOrder::linf: {
      // Corner of the unit cube; zero components stay zero.
      for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = v[i] > 0.0 ? 1.0 : (v[i] < 0.0 ? -1.0 : 0.0);
      return out;
    }
    case NormOrder::l1: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[best])) best = i;
      out[best] = v[best] > 0.0 ? 1.0 : -1.0;
      return out;
    }
  }
  throw std::invalid_argument("unsupported norm order");
}

ReluRelaxation relax_relu(double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("relax_relu: lo > hi");
  ReluRelaxation r;
  if (hi <= 0.0) {
    // Inactive: ReLU is identically zero on the interval.
    return r;
  }
  if (lo >= 0.0) {
    r.upper_slope = 1.0;
    r.lower_slope = 1.0;
    return r;
  }
  // Unstable neuron: chord from above, and the tighter of the two
  // zero-intercept lines (slope 0 or 1) from below.
  r.upper_slope = hi / (hi - lo);
  r.upper_intercept = -lo * r.upper_slope;
  r.lower_slope = hi >= -lo ? 1.0 : 0.0;
  return r;
}

namespace {

// Affine expression of one node's output in terms of another node's
// output, tracked separately for the lower and upper side.
struct CoefPair {
  Mat lower;
  Mat upper;
};

class BoundEngine {
 public:
  BoundEngine(const CompGraph& graph, const std::vector<Vec>& center,
              const PerturbationBall& ball)
      : graph_(graph), center_(center), ball_(ball) {
    if (center.size() != graph.modalities().size())
      throw std::invalid_argument("propagate_bounds: modality count mismatch");
    for (std::size_t m = 0; m < center.size(); ++m)
      if (center[m].size() != graph.modalities()[m].dim)
        throw std::invalid_argument("propagate_bounds: center dim mismatch at modality " +
                                    std::to_string(m));
    if (ball.radii.size() != graph.modalities().size())
      throw std::invalid_argument("propagate_bounds: one radius per modality required");
    for (double r : ball.radii)
      if (!(r >= 0.0) || !std::isfinite(r))
        throw std::invalid_argument("propagate_bounds: radii must be finite and non-negative");
  }

  LinearBounds bounds_for(NodeId target) {
    const std::size_t out_dim = graph_.node_dim(target);
    const std::size_t in_dim = graph_.input_dim();
    const std::size_t target_pos = graph_.index_of(target);
    const auto& nodes = graph_.nodes();

    std::unordered_map<std::size_t, CoefPair> coef;
    coef.emplace(target_pos, CoefPair{Mat::identity(out_dim), Mat::identity(out_dim)});

    LinearBounds result;
    result.lower_coef = Mat(out_dim, in_dim);
    result.upper_coef = Mat(out_dim, in_dim);
    result.lower_off = Vec(out_dim, 0.0);
    result.upper_off = Vec(out_dim, 0.0);
    result.block_offsets = graph_.modality_offsets();

    // Backward substitution in reverse topological order. Nodes past
    // the target never carry coefficients and are skipped.
    for (std::size_t pos = target_pos + 1; pos-- > 0;) {
      auto it = coef.find(pos);
      if (it == coef.end()) continue;
      CoefPair cur = std::move(it->second);
      coef.erase(it);
      const NodeSpec& n = nodes[pos];

      if (auto* in = std::get_if<InputNode>(&n.kind)) {
        accumulate_input_block(result, *in, n.id, cur);
      } else if (auto* aff = std::get_if<AffineNode>(&n.kind)) {
        const std::size_t ppos = graph_.index_of(n.parents.front());
        add_coef(coef, ppos, matmul(cur.lower, aff->weight), matmul(cur.upper, aff->weight));
        for (std::size_t r = 0; r < out_dim; ++r) {
          double lo = 0.0, hi = 0.0;
          for (std::size_t c = 0; c < aff->bias.size(); ++c) {
            lo += cur.lower(r, c) * aff->bias[c];
            hi += cur.upper(r, c) * aff->bias[c];
          }
          result.lower_off[r] += lo;
          result.upper_off[r] += hi;
        }
      } else if (std::holds_alternative<ReluNode>(n.kind)) {
        substitute_relu(result, coef, n, cur, out_dim);
      } else if (std::holds_alternative<ConcatNode>(n.kind)) {
        std::size_t col = 0;
        for (NodeId p : n.parents) {
          const std::size_t pdim = graph_.node_dim(p);
          Mat lo(out_dim, pdim), hi(out_dim, pdim);
          for (std::size_t r = 0; r < out_dim; ++r)
            for (std::size_t c = 0; c < pdim; ++c) {
              lo(r, c) = cur.lower(r, col + c);
              hi(r, c) = cur.upper(r, col + c);
            }
          add_coef(coef, graph_.index_of(p), std::move(lo), std::move(hi));
          col += pdim;
        }
      } else if (std::holds_alternative<AddNode>(n.kind)) {
        for (NodeId p : n.parents) add_coef(coef, graph_.index_of(p), cur.lower, cur.upper);
      } else if (auto* sc = std::get_if<ScaleNode>(&n.kind)) {
        // Exact linear substitution; the factor's sign flows through.
        Mat lo = cur.lower, hi = cur.upper;
        for (double& v : lo.data()) v *= sc->factor;
        for (double& v : hi.data()) v *= sc->factor;
        add_coef(coef, graph_.index_of(n.parents.front()), std::move(lo), std::move(hi));
      } else {
        throw std::invalid_argument("propagate_bounds: unsupported node kind at node " +
                                    std::to_string(n.id));
      }
    }
    return result;
  }

  // Pre-activation box of a node, memoized per node.
  const std::vector<Interval>& preactivation_box(NodeId id) {
    auto it = box_cache_.find(id);
    if (it != box_cache_.end()) return it->second;
    LinearBounds b = bounds_for(id);
    auto box = concretize(b, center_, ball_);
    return box_cache_.emplace(id, std::move(box)).first->second;
  }

 private:
  static void add_coef(std::unordered_map<std::size_t, CoefPair>& coef, std::size_t pos, Mat lo,
                       Mat hi) {
    auto it = coef.find(pos);
    if (it == coef.end()) {
      coef.emplace(pos, CoefPair{std::move(lo), std::move(hi)});
      return;
    }
    for (std::size_t i = 0; i < lo.data().size(); ++i) it->second.lower.data()[i] += lo.data()[i];
    for (std::size_t i = 0; i < hi.data().size(); ++i) it->second.upper.data()[i] += hi.data()[i];
  }

  void accumulate_input_block(LinearBounds& result, const InputNode& in, NodeId id,
                              const CoefPair& cur) {
    // Locate the modality block this input owns.
    std::size_t block = graph_.modalities().size();
    for (std::size_t m = 0; m < graph_.modalities().size(); ++m)
      if (graph_.modalities()[m].node == id) block = m;
    if (block == graph_.modalities().size())
      throw std::invalid_argument("propagate_bounds: input node " + std::to_string(id) +
                                  " missing from modality partition");
    const std::size_t off = result.block_offsets[block];
    for (std::size_t r = 0; r < cur.lower.rows(); ++r)
      for (std::size_t c = 0; c < in.dim; ++c) {
        result.lower_coef(r, off + c) += cur.lower(r, c);
        result.upper_coef(r, off + c) += cur.upper(r, c);
      }
  }

  void substitute_relu(LinearBounds& result, std::unordered_map<std::size_t, CoefPair>& coef,
                       const NodeSpec& n, const CoefPair& cur, std::size_t out_dim) {
    const NodeId parent = n.parents.front();
    const std::size_t pdim = graph_.node_dim(parent);
    const auto& box = preactivation_box(parent);

    std::vector<ReluRelaxation> relax(pdim);
    for (std::size_t j = 0; j < pdim; ++j) relax[j] = relax_relu(box[j].lo, box[j].hi);

    Mat lo(out_dim, pdim), hi(out_dim, pdim);
    for (std::size_t r = 0; r < out_dim; ++r) {
      for (std::size_t j = 0; j < pdim; ++j) {
        const ReluRelaxation& rx = relax[j];
        // Upper side: positive weight keeps the upper line, negative
        // weight flips to the lower line. Mirrored for the lower side.
        const double wu = cur.upper(r, j);
        if (wu >= 0.0) {
          hi(r, j) = wu * rx.upper_slope;
          result.upper_off[r] += wu * rx.upper_intercept;
        } else {
          hi(r, j) = wu * rx.lower_slope;
          result.upper_off[r] += wu * rx.lower_intercept;
        }
        const double wl = cur.lower(r, j);
        if (wl >= 0.0) {
          lo(r, j) = wl * rx.lower_slope;
          result.lower_off[r] += wl * rx.lower_intercept;
        } else {
          lo(r, j) = wl * rx.upper_slope;
          result.lower_off[r] += wl * rx.upper_intercept;
        }
      }
    }
    add_coef(coef, graph_.index_of(parent), std::move(lo), std::move(hi));
  }

  const CompGraph& graph_;
  const std::vector<Vec>& center_;
  const PerturbationBall& ball_;
  std::unordered_map<NodeId, std::vector<Interval>> box_cache_;
};

}  // namespace

LinearBounds propagate_bounds(const CompGraph& graph, const std::vector<Vec>& center,
                              const PerturbationBall& ball) {
  BoundEngine engine(graph, center, ball);
  return engine.bounds_for(graph.output());
}

std::vector<Interval> concretize(const LinearBounds& bounds, const std::vector<Vec>& center,
                                 const PerturbationBall& ball) {
  const std::size_t out_dim = bounds.lower_coef.rows();
  const std::size_t blocks = bounds.block_offsets.size() - 1;
  if (ball.radii.size() != blocks)
    throw std::invalid_argument("concretize: ball/block modality count mismatch");
  if (center.size() != blocks)
    throw std::invalid_argument("concretize: center/block modality count mismatch");
  const NormOrder q = conjugate(ball.p);

  std::vector<Interval> out(out_dim);
  for (std::size_t r = 0; r < out_dim; ++r) {
    double hi = bounds.upper_off[r];
    double lo = bounds.lower_off[r];
    for (std::size_t m = 0; m < blocks; ++m) {
      const std::size_t b0 = bounds.block_offsets[m];
      const std::size_t bd = bounds.block_offsets[m + 1] - b0;
      const double* up_row = bounds.upper_coef.row_ptr(r) + b0;
      const double* lo_row = bounds.lower_coef.row_ptr(r) + b0;
      double up_center = 0.0, lo_center = 0.0;
      for (std::size_t c = 0; c < bd; ++c) {
        up_center += up_row[c] * center[m][c];
        lo_center += lo_row[c] * center[m][c];
      }
      hi += ball.radii[m] * norm_of(up_row, bd, q) + up_center;
      lo += -ball.radii[m] * norm_of(lo_row, bd, q) + lo_center;
    }
    out[r] = Interval{lo, hi};
  }
  return out;
}

RobustnessReport robustness_bound(const LinearBounds& bounds, const std::vector<Vec>& center,
                                  const PerturbationBall& ball) {
  const std::size_t out_dim = bounds.upper_coef.rows();
  const std::size_t blocks = bounds.block_offsets.size() - 1;
  if (ball.radii.size() != blocks)
    throw std::invalid_argument("robustness_bound: ball/block modality count mismatch");
  const NormOrder q = conjugate(ball.p);

  RobustnessReport report;
  report.p = ball.p;
  report.radii = ball.radii;
  report.kappa.assign(blocks, 0.0);
  // Row-wise dual norms per block; multi-output reduces by the
  // coordinate-wise maximum (worst output coordinate).
  for (std::size_t m = 0; m < blocks; ++m) {
    const std::size_t b0 = bounds.block_offsets[m];
    const std::size_t bd = bounds.block_offsets[m + 1] - b0;
    double worst = 0.0;
    for (std::size_t r = 0; r < out_dim; ++r) {
      const double row_kappa = norm_of(bounds.upper_coef.row_ptr(r) + b0, bd, q) +
                               norm_of(bounds.lower_coef.row_ptr(r) + b0, bd, q);
      worst = std::max(worst, row_kappa);
    }
    report.kappa[m] = worst;
  }
  report.gamma = 0.0;
  for (std::size_t m = 0; m < blocks; ++m) report.gamma += ball.radii[m] * report.kappa[m];
  report.output_box = concretize(bounds, center, ball);
  return report;
}

}  // namespace semcom
