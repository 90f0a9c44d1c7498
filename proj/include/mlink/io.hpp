#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "mlink/evaluation.hpp"

namespace mlink {

using ordered_json = nlohmann::ordered_json;

// Point CSV: header "x,y" or "x,y,label"; label 0 = outlier.
PointSet read_scene_csv(std::istream& is);
void write_scene_csv(const PointSet& data, std::ostream& os);

// Segmentation JSON (schema_version 1).
ordered_json segmentation_to_json(const Segmentation& seg, double epsilon,
                                  const std::string& algorithm,
                                  const ordered_json& config_echo,
                                  bool include_merge_log);
Segmentation segmentation_from_json(const ordered_json& j);

ordered_json merge_log_to_json(const std::vector<MergeLogEntry>& log);

ordered_json eval_report_to_json(const EvalReport& report);

ordered_json scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const ordered_json& j);

ordered_json sweep_to_json(const SweepResult& result);
void write_sweep_runs_csv(const SweepResult& result, std::ostream& os);
void write_sweep_cells_csv(const SweepResult& result, std::ostream& os);

}  // namespace mlink
