#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mgnn/pipeline.hpp"

namespace mgnn::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- parameter snapshots ---------------------------------------------------

inline json matrix_to_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw DataError("snapshot matrix has inconsistent shape");
  }
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index jj = 0; jj < cols; ++jj) m(i, jj) = data[k++];
  return m;
}

inline json params_to_json(const ModelParams& p) {
  json weights = json::array();
  for (const Matrix& w : p.weights) weights.push_back(matrix_to_json(w));
  json biases = json::array();
  for (const Vector& b : p.biases) biases.push_back(std::vector<double>(b.data(), b.data() + b.size()));
  return {{"format", "mgnn-params"}, {"version", 1},   {"n_nodes", p.n_nodes},
          {"scales", p.scales},      {"weights", weights}, {"biases", biases}};
}

inline ModelParams params_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "mgnn-params" || j.at("version").get<int>() != 1) {
      throw DataError("not an mgnn-params v1 snapshot");
    }
    ModelParams p;
    p.n_nodes = j.at("n_nodes").get<Eigen::Index>();
    p.scales = j.at("scales").get<std::vector<double>>();
    for (const json& w : j.at("weights")) p.weights.push_back(matrix_from_json(w));
    for (const json& b : j.at("biases")) {
      const auto v = b.get<std::vector<double>>();
      p.biases.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    p.check_consistent();
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt parameter snapshot: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("corrupt parameter snapshot: ") + e.what());
  }
}

inline void save_params(const fs::path& path, const ModelParams& p) {
  write_text(path, params_to_json(p).dump(1) + "\n");
}

inline ModelParams load_params(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw DataError("corrupt parameter snapshot '" + path.string() + "': " + e.what());
  }
  return params_from_json(j);
}

// ---- metrics ---------------------------------------------------------------

inline json metrics_to_json(const MetricsReport& m) {
  json per_class = json::array();
  for (const ClassMetrics& c : m.per_class) {
    per_class.push_back({{"precision", c.precision}, {"recall", c.recall}, {"support", c.support}});
  }
  return {{"accuracy", m.accuracy},
          {"weighted_precision", m.weighted_precision},
          {"weighted_recall", m.weighted_recall},
          {"per_class", per_class},
          {"confusion", m.confusion}};
}

inline json summary_to_json(const SummaryStat& s) { return {{"mean", s.mean}, {"std", s.std}}; }

inline json cv_to_json(const CvResult& r) {
  json folds = json::array();
  for (std::size_t f = 0; f < r.folds.size(); ++f) {
    json entry = metrics_to_json(r.folds[f].metrics);
    entry["fold"] = f;
    entry["test_size"] = r.folds[f].test_indices.size();
    folds.push_back(entry);
  }
  return {{"folds", folds},
          {"summary",
           {{"accuracy", summary_to_json(r.accuracy)},
            {"weighted_precision", summary_to_json(r.weighted_precision)},
            {"weighted_recall", summary_to_json(r.weighted_recall)}}},
          {"majority_baseline", r.majority_baseline}};
}

inline std::string metrics_csv_header() {
  return "fold,accuracy,weighted_precision,weighted_recall,n\n";
}

inline std::string metrics_csv_row(const std::string& fold, const MetricsReport& m) {
  long n = 0;
  for (const ClassMetrics& c : m.per_class) n += c.support;
  return fold + "," + format_double(m.accuracy) + "," + format_double(m.weighted_precision) + "," +
         format_double(m.weighted_recall) + "," + std::to_string(n) + "\n";
}

// ---- history ---------------------------------------------------------------

inline std::string history_csv(const TrainHistory& h, std::size_t scale_count) {
  std::string out = "epoch,total_loss,data_loss";
  for (std::size_t j = 0; j < scale_count; ++j) out += ",s_" + std::to_string(j + 1);
  out += "\n";
  for (const EpochRecord& r : h) {
    out += std::to_string(r.epoch) + "," + format_double(r.total_loss) + "," +
           format_double(r.data_loss);
    for (double s : r.scales) out += "," + format_double(s);
    out += "\n";
  }
  return out;
}

// ---- saliency --------------------------------------------------------------

inline std::string matrix_csv(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ",";
      out += format_double(m(i, j));
    }
    out += "\n";
  }
  return out;
}

// Optional index -> display name lookup; one `index,name` pair (or bare name,
// indexed by line) per line.
inline std::map<Eigen::Index, std::string> read_name_lookup(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open name lookup '" + path.string() + "'");
  std::map<Eigen::Index, std::string> names;
  std::string line;
  Eigen::Index next = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma != std::string::npos) {
      try {
        next = std::stol(line.substr(0, comma));
      } catch (const std::exception&) {
        throw DataError("bad index in name lookup line '" + line + "'");
      }
      names[next] = line.substr(comma + 1);
    } else {
      names[next] = line;
    }
    ++next;
  }
  return names;
}

inline std::string top_k_csv(const std::vector<RankedEdge>& edges,
                             const std::map<Eigen::Index, std::string>* names = nullptr) {
  std::string out = names ? "row,col,value,row_name,col_name\n" : "row,col,value\n";
  for (const RankedEdge& e : edges) {
    out += std::to_string(e.row) + "," + std::to_string(e.col) + "," + format_double(e.value);
    if (names) {
      auto name = [names](Eigen::Index i) {
        const auto it = names->find(i);
        return it == names->end() ? std::string() : it->second;
      };
      out += "," + name(e.row) + "," + name(e.col);
    }
    out += "\n";
  }
  return out;
}

}  // namespace mgnn::io
