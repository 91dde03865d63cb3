#include "semcom/serialize.hpp"

#include <fstream>
#include <stdexcept>

namespace semcom {

using nlohmann::json;

namespace {

json kind_to_json(const NodeKind& kind) {
  json j;
  if (auto* in = std::get_if<InputNode>(&kind)) {
    j["kind"] = "input";
    j["modality"] = in->modality;
    j["dim"] = in->dim;
  } else if (auto* aff = std::get_if<AffineNode>(&kind)) {
    j["kind"] = "affine";
    j["rows"] = aff->weight.rows();
    j["cols"] = aff->weight.cols();
    j["weight"] = aff->weight.data();  // row-major
    j["bias"] = aff->bias;
  } else if (std::holds_alternative<ReluNode>(kind)) {
    j["kind"] = "relu";
  } else if (std::holds_alternative<ConcatNode>(kind)) {
    j["kind"] = "concat";
  } else if (std::holds_alternative<AddNode>(kind)) {
    j["kind"] = "add";
  } else if (auto* sc = std::get_if<ScaleNode>(&kind)) {
    j["kind"] = "scale";
    j["factor"] = sc->factor;
  }
  return j;
}

NodeKind kind_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "input")
    return InputNode{j.at("modality").get<std::size_t>(), j.at("dim").get<std::size_t>()};
  if (kind == "affine") {
    Mat w(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
          j.at("weight").get<Vec>());
    return AffineNode{std::move(w), j.at("bias").get<Vec>()};
  }
  if (kind == "relu") return ReluNode{};
  if (kind == "concat") return ConcatNode{};
  if (kind == "add") return AddNode{};
  if (kind == "scale") return ScaleNode{j.at("factor").get<double>()};
  throw std::invalid_argument("unknown node kind '" + kind + "'");
}

}  // namespace

json graph_to_json(const CompGraph& graph) {
  json nodes = json::array();
  for (const NodeSpec& n : graph.nodes()) {
    json jn = kind_to_json(n.kind);
    jn["id"] = n.id;
    jn["parents"] = n.parents;
    nodes.push_back(std::move(jn));
  }
  json modalities = json::array();
  for (const ModalityInput& m : graph.modalities())
    modalities.push_back({{"node", m.node}, {"dim", m.dim}});
  return json{{"nodes", std::move(nodes)},
              {"output", graph.output()},
              {"modalities", std::move(modalities)}};
}

CompGraph graph_from_json(const json& j) {
  std::vector<NodeSpec> nodes;
  for (const json& jn : j.at("nodes")) {
    NodeSpec n;
    n.id = jn.at("id").get<NodeId>();
    n.kind = kind_from_json(jn);
    n.parents = jn.at("parents").get<std::vector<NodeId>>();
    nodes.push_back(std::move(n));
  }
  std::vector<ModalityInput> modalities;
  for (const json& jm : j.at("modalities"))
    modalities.push_back({jm.at("node").get<NodeId>(), jm.at("dim").get<std::size_t>()});
  return CompGraph(std::move(nodes), j.at("output").get<NodeId>(), std::move(modalities));
}

json model_to_json(const ToyFusionModel& model) {
  json encoders = json::array();
  for (const CompGraph& g : model.encoders) encoders.push_back(graph_to_json(g));
  return json{{"encoders", std::move(encoders)},
              {"decoder", graph_to_json(model.decoder)},
              {"metadata",
               {{"seed", model.seed},
                {"modality_dims", model.modality_dims},
                {"hidden_dim", model.hidden_dim},
                {"training_loss", model.training_loss}}}};
}

ToyFusionModel model_from_json(const json& j) {
  ToyFusionModel model;
  for (const json& jg : j.at("encoders")) model.encoders.push_back(graph_from_json(jg));
  model.decoder = graph_from_json(j.at("decoder"));
  const json& meta = j.at("metadata");
  model.seed = meta.at("seed").get<std::uint64_t>();
  model.modality_dims = meta.at("modality_dims").get<std::vector<std::size_t>>();
  model.hidden_dim = meta.at("hidden_dim").get<std::size_t>();
  model.training_loss = meta.at("training_loss").get<double>();
  return model;
}

void save_model(const std::string& path, const ToyFusionModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << model_to_json(model).dump(2) << "\n";
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

ToyFusionModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j;
  in >> j;
  return model_from_json(j);
}

json report_to_json(const RobustnessReport& report) {
  json box = json::array();
  for (const Interval& iv : report.output_box) box.push_back({{"lo", iv.lo}, {"hi", iv.hi}});
  return json{{"gamma", report.gamma},
              {"kappa", report.kappa},
              {"p", norm_order_name(report.p)},
              {"radii", report.radii},
              {"output_box", std::move(box)}};
}

std::string norm_order_name(NormOrder p) {
  switch (p) {
    case NormOrder::l1:
      return "1";
    case NormOrder::l2:
      return "2";
    case NormOrder::linf:
      return "inf";
  }
  return "?";
}

NormOrder norm_order_from_name(const std::string& name) {
  if (name == "1") return NormOrder::l1;
  if (name == "2") return NormOrder::l2;
  if (name == "inf" || name == "oo") return NormOrder::linf;
  throw std::invalid_argument("unsupported norm order '" + name + "' (use 1, 2, or inf)");
}

}  // namespace semcom
