#pragma once

#include <string>

#include <json.hpp>

#include "semcom/bounds.hpp"
#include "semcom/graph.hpp"
#include "semcom/model.hpp"

namespace semcom {

// Graph documents list nodes in topological order with row-major weight
// matrices under the field names {nodes, output, modalities}. Doubles
// round-trip bit-exactly through the shortest-representation printer.
nlohmann::json graph_to_json(const CompGraph& graph);
CompGraph graph_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const ToyFusionModel& model);
ToyFusionModel model_from_json(const nlohmann::json& j);

void save_model(const std::string& path, const ToyFusionModel& model);
ToyFusionModel load_model(const std::string& path);

nlohmann::json report_to_json(const RobustnessReport& report);

std::string norm_order_name(NormOrder p);
NormOrder norm_order_from_name(const std::string& name);

}  // namespace semcom
