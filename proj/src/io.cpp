#include "mlink/io.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace mlink {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

PointSet read_scene_csv(std::istream& is) {
  PointSet out;
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("scene csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  bool with_labels;
  if (header.size() == 2 && header[0] == "x" && header[1] == "y")
    with_labels = false;
  else if (header.size() == 3 && header[0] == "x" && header[1] == "y" &&
           header[2] == "label")
    with_labels = true;
  else
    throw ConfigError("scene csv: header must be 'x,y' or 'x,y,label'");

  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != (with_labels ? 3u : 2u))
      throw ConfigError("scene csv: wrong field count at line " + std::to_string(lineno));
    Eigen::VectorXd p(2);
    try {
      p << std::stod(fields[0]), std::stod(fields[1]);
    } catch (const std::exception&) {
      throw ConfigError("scene csv: bad number at line " + std::to_string(lineno));
    }
    out.points.push_back(std::move(p));
    if (with_labels) {
      int label = 0;
      try {
        label = std::stoi(fields[2]);
      } catch (const std::exception&) {
        throw ConfigError("scene csv: bad label at line " + std::to_string(lineno));
      }
      if (label < 0) throw ConfigError("scene csv: negative label");
      out.gt_labels.push_back(label);
    }
  }
  if (out.points.empty()) throw ConfigError("scene csv: no points");
  return out;
}

void write_scene_csv(const PointSet& data, std::ostream& os) {
  const bool with_labels = data.has_gt();
  os << (with_labels ? "x,y,label\n" : "x,y\n");
  for (int i = 0; i < data.size(); ++i) {
    os << fmt_double(data.points[i][0]) << ',' << fmt_double(data.points[i][1]);
    if (with_labels) os << ',' << data.gt_labels[i];
    os << '\n';
  }
}

namespace {
ordered_json model_to_json(const ModelInstance& m) {
  ordered_json j;
  j["class"] = m.class_id;
  j["params"] = std::vector<double>(m.params.data(), m.params.data() + m.params.size());
  return j;
}

ModelInstance model_from_json(const ordered_json& j) {
  ModelInstance m;
  m.class_id = j.at("class").get<std::string>();
  const auto params = j.at("params").get<std::vector<double>>();
  m.params = Eigen::Map<const Eigen::VectorXd>(params.data(),
                                               static_cast<int>(params.size()));
  return m;
}
}  // namespace

ordered_json merge_log_to_json(const std::vector<MergeLogEntry>& log) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : log) {
    ordered_json j;
    j["step"] = e.step;
    j["clusters"] = {e.cluster_u, e.cluster_v};
    j["sizes"] = {e.size_u, e.size_v};
    j["distance"] = e.distance;
    j["fallback"] = e.used_fallback;
    j["accepted"] = e.accepted;
    if (!e.verdict.scores.empty()) {
      ordered_json scores = ordered_json::array();
      for (const auto& s : e.verdict.scores) {
        ordered_json sj;
        sj["class"] = s.class_id;
        sj["available"] = s.available;
        if (s.available) {
          sj["g_u"] = s.g_u;
          sj["g_v"] = s.g_v;
          sj["g_union"] = s.g_union;
        }
        scores.push_back(std::move(sj));
      }
      j["scores"] = std::move(scores);
      if (e.verdict.accept) j["winning_class"] = e.verdict.winning_class;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

ordered_json segmentation_to_json(const Segmentation& seg, double epsilon,
                                  const std::string& algorithm,
                                  const ordered_json& config_echo,
                                  bool include_merge_log) {
  ordered_json j;
  j["schema_version"] = 1;
  j["algorithm"] = algorithm;
  j["epsilon"] = epsilon;
  j["n_points"] = seg.n_points;
  ordered_json structures = ordered_json::array();
  for (const auto& s : seg.structures) {
    ordered_json sj = model_to_json(s.model);
    sj["gric"] = s.gric;
    sj["members"] = s.members;
    structures.push_back(std::move(sj));
  }
  j["structures"] = std::move(structures);
  j["outliers"] = seg.outlier_indices;
  if (!config_echo.is_null()) j["config"] = config_echo;
  if (include_merge_log) j["merge_log"] = merge_log_to_json(seg.merge_log);
  return j;
}

Segmentation segmentation_from_json(const ordered_json& j) {
  if (j.at("schema_version").get<int>() != 1)
    throw ConfigError("segmentation json: unsupported schema_version");
  Segmentation seg;
  seg.n_points = j.at("n_points").get<int>();
  for (const auto& sj : j.at("structures")) {
    StructureResult s;
    s.model = model_from_json(sj);
    s.class_id = s.model.class_id;
    s.gric = sj.at("gric").get<double>();
    s.members = sj.at("members").get<std::vector<int>>();
    seg.structures.push_back(std::move(s));
  }
  seg.outlier_indices = j.at("outliers").get<std::vector<int>>();
  return seg;
}

ordered_json eval_report_to_json(const EvalReport& report) {
  ordered_json j;
  j["me"] = report.me;
  j["n_points"] = report.n_points;
  j["misassigned"] = report.misassigned;
  ordered_json per = ordered_json::array();
  for (const auto& s : report.per_structure) {
    ordered_json sj;
    sj["pred_index"] = s.pred_index;
    sj["matched_gt_label"] = s.matched_gt_label;
    sj["correct"] = s.correct;
    sj["precision"] = s.precision;
    sj["recall"] = s.recall;
    per.push_back(std::move(sj));
  }
  j["per_structure"] = std::move(per);
  ordered_json assign = ordered_json::array();
  for (const auto& [p, g] : report.assignment) assign.push_back({p, g});
  j["assignment"] = std::move(assign);
  j["timing"] = {{"hypotheses_s", report.hyp_time_s},
                 {"clustering_s", report.cluster_time_s}};
  return j;
}

ordered_json scene_spec_to_json(const SceneSpec& spec) {
  ordered_json j;
  ordered_json structures = ordered_json::array();
  for (const auto& s : spec.structures) {
    ordered_json sj;
    sj["class"] = s.class_id;
    sj["params"] = s.params;
    sj["extent"] = {s.t_lo, s.t_hi};
    sj["count"] = s.count;
    sj["noise_sigma"] = s.noise_sigma;
    structures.push_back(std::move(sj));
  }
  j["structures"] = std::move(structures);
  j["outlier_count"] = spec.outlier_count;
  j["box"] = spec.box;
  j["seed"] = spec.seed;
  return j;
}

SceneSpec scene_spec_from_json(const ordered_json& j) {
  SceneSpec spec;
  for (const auto& sj : j.at("structures")) {
    SceneStructure s;
    s.class_id = sj.at("class").get<std::string>();
    s.params = sj.at("params").get<std::vector<double>>();
    const auto extent = sj.at("extent").get<std::vector<double>>();
    if (extent.size() != 2) throw ConfigError("scene spec: extent must have 2 values");
    s.t_lo = extent[0];
    s.t_hi = extent[1];
    s.count = sj.at("count").get<int>();
    s.noise_sigma = sj.at("noise_sigma").get<double>();
    spec.structures.push_back(std::move(s));
  }
  spec.outlier_count = j.at("outlier_count").get<int>();
  const auto box = j.at("box").get<std::vector<double>>();
  if (box.size() != 4) throw ConfigError("scene spec: box must have 4 values");
  std::copy(box.begin(), box.end(), spec.box.begin());
  spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

namespace {
ordered_json run_to_json(const SweepRun& r) {
  ordered_json j;
  j["setting"] = r.setting;
  j["seed"] = r.seed;
  j["algorithm"] = r.algorithm;
  j["me"] = r.me;
  j["hyp_time_s"] = r.hyp_time_s;
  j["cluster_time_s"] = r.cluster_time_s;
  j["pool_hash"] = r.pool_hash;
  j["error"] = r.error;
  return j;
}

ordered_json cell_to_json(const SweepCell& c) {
  ordered_json j;
  j["setting"] = c.setting;
  j["algorithm"] = c.algorithm;
  j["median_me"] = c.median_me;
  j["iqr_me"] = c.iqr_me;
  j["min_me"] = c.min_me;
  j["max_me"] = c.max_me;
  j["mean_hyp_time_s"] = c.mean_hyp_time_s;
  j["mean_cluster_time_s"] = c.mean_cluster_time_s;
  j["n_ok"] = c.n_ok;
  j["n_failed"] = c.n_failed;
  return j;
}
}  // namespace

ordered_json sweep_to_json(const SweepResult& result) {
  ordered_json j;
  ordered_json runs = ordered_json::array();
  for (const auto& r : result.runs) runs.push_back(run_to_json(r));
  ordered_json cells = ordered_json::array();
  for (const auto& c : result.cells) cells.push_back(cell_to_json(c));
  j["runs"] = std::move(runs);
  j["summary"] = std::move(cells);
  return j;
}

void write_sweep_runs_csv(const SweepResult& result, std::ostream& os) {
  os << "setting,seed,algorithm,me,hyp_time_s,cluster_time_s,pool_hash,error\n";
  for (const auto& r : result.runs) {
    os << fmt_double(r.setting) << ',' << r.seed << ',' << r.algorithm << ','
       << fmt_double(r.me) << ',' << fmt_double(r.hyp_time_s) << ','
       << fmt_double(r.cluster_time_s) << ',' << r.pool_hash << ',' << r.error
       << '\n';
  }
}

void write_sweep_cells_csv(const SweepResult& result, std::ostream& os) {
  os << "setting,algorithm,median_me,iqr_me,min_me,max_me,"
        "mean_hyp_time_s,mean_cluster_time_s,n_ok,n_failed\n";
  for (const auto& c : result.cells) {
    os << fmt_double(c.setting) << ',' << c.algorithm << ','
       << fmt_double(c.median_me) << ',' << fmt_double(c.iqr_me) << ','
       << fmt_double(c.min_me) << ',' << fmt_double(c.max_me) << ','
       << fmt_double(c.mean_hyp_time_s) << ',' << fmt_double(c.mean_cluster_time_s)
       << ',' << c.n_ok << ',' << c.n_failed << '\n';
  }
}

}  // namespace mlink
