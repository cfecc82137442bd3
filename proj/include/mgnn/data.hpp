#pragma once

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mgnn/graph.hpp"
#include "mgnn/rng.hpp"

namespace mgnn {

namespace fs = std::filesystem;

struct GraphSample {
  std::string id;
  AdjacencyMatrix adjacency;
  int label = 0;
};

struct Dataset {
  std::vector<GraphSample> samples;
  int n_classes = 0;
  std::vector<int> class_counts;
  std::vector<std::string> warnings;

  std::size_t size() const { return samples.size(); }
  Eigen::Index n_nodes() const { return samples.empty() ? 0 : samples.front().adjacency.n(); }

  // Recomputes class_counts and checks the shared-node-count and label invariants.
  void finalize() {
    if (samples.empty()) throw DataError("dataset is empty");
    class_counts.assign(static_cast<std::size_t>(n_classes), 0);
    const Eigen::Index n = n_nodes();
    for (const GraphSample& s : samples) {
      if (s.adjacency.n() != n) {
        throw DataError("sample '" + s.id + "' has " + std::to_string(s.adjacency.n()) +
                        " nodes, expected " + std::to_string(n));
      }
      if (s.label < 0 || s.label >= n_classes) {
        throw DataError("sample '" + s.id + "' has unknown label " + std::to_string(s.label));
      }
      ++class_counts[static_cast<std::size_t>(s.label)];
    }
    for (int c = 0; c < n_classes; ++c) {
      if (class_counts[static_cast<std::size_t>(c)] == 0) {
        throw DataError("class " + std::to_string(c) + " has no samples");
      }
    }
  }

  Dataset subset(const std::vector<std::size_t>& indices) const {
    Dataset d;
    d.n_classes = n_classes;
    d.class_counts.assign(static_cast<std::size_t>(n_classes), 0);
    for (std::size_t i : indices) {
      d.samples.push_back(samples.at(i));
      ++d.class_counts[static_cast<std::size_t>(samples[i].label)];
    }
    return d;
  }
};

struct LoadOptions {
  // Relative asymmetry (w.r.t. max |entry|) that is silently symmetrized.
  double symmetry_tolerance = 1e-6;
  // Entries in [-negative_tolerance, 0) are treated as zero.
  double negative_tolerance = 1e-9;
  // Take |a_ij| before validation (for signed correlation inputs).
  bool absolute_values = false;
  // 0 infers the class count as max label + 1.
  int n_classes = 0;
};

// Reads N lines of N numbers separated by commas and/or whitespace.
inline Matrix read_matrix_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open matrix file '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream tokens(line);
    std::vector<double> row;
    std::string tok;
    while (tokens >> tok) {
      errno = 0;
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0' || errno == ERANGE) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": cannot parse '" +
                        tok + "' as a number");
      }
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(rows.front().size()) + " values, found " +
                      std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("matrix file '" + path.string() + "' is empty");
  if (rows.size() != rows.front().size()) {
    throw DataError("matrix file '" + path.string() + "' is not square (" +
                    std::to_string(rows.size()) + "x" + std::to_string(rows.front().size()) + ")");
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

// Writes one row per line with round-trip precision.
inline void write_matrix_file(const fs::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j > 0) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

// Canonicalizes a raw matrix into a valid adjacency: symmetrize (M + M^T)/2,
// zero the diagonal (with a warning), reject negative entries.
inline AdjacencyMatrix sanitize_adjacency(Matrix m, const std::string& id,
                                          const LoadOptions& opts,
                                          std::vector<std::string>* warnings) {
  if (m.rows() != m.cols()) throw DataError("'" + id + "': matrix is not square");
  if (!m.allFinite()) throw DataError("'" + id + "': non-finite entry");
  if (opts.absolute_values) m = m.cwiseAbs();
  const double scale = m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > opts.symmetry_tolerance * scale) {
    throw DataError("'" + id + "': matrix is not symmetric (max |a_ij - a_ji| = " +
                    std::to_string(asym) + ")");
  }
  Matrix sym = 0.5 * (m + m.transpose());
  if (sym.diagonal().cwiseAbs().maxCoeff() > 0.0 && warnings != nullptr) {
    warnings->push_back("'" + id + "': nonzero diagonal (self-loops) set to zero");
  }
  sym.diagonal().setZero();
  for (Eigen::Index j = 0; j < sym.cols(); ++j) {
    for (Eigen::Index i = 0; i < sym.rows(); ++i) {
      if (sym(i, j) < 0.0) {
        if (sym(i, j) < -opts.negative_tolerance) {
          throw DataError("'" + id + "': negative entry " + std::to_string(sym(i, j)) + " at (" +
                          std::to_string(i) + "," + std::to_string(j) + ")");
        }
        sym(i, j) = 0.0;
      }
    }
  }
  return AdjacencyMatrix(std::move(sym));
}

// Manifest lines: `relative/path.txt,<label>`; `#` comments and blank lines
// are skipped; paths resolve against the manifest's directory.
inline Dataset load_dataset(const fs::path& manifest, const LoadOptions& opts = {}) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest '" + manifest.string() + "'");
  const fs::path base = manifest.parent_path();
  Dataset d;
  std::string line;
  int line_no = 0;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto comma = line.rfind(',');
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    if (comma == std::string::npos) throw DataError(where + ": expected 'path,label'");
    std::string rel = line.substr(0, comma);
    std::string label_text = line.substr(comma + 1);
    rel.erase(rel.find_last_not_of(" \t") + 1);
    label_text.erase(0, label_text.find_first_not_of(" \t"));
    char* end = nullptr;
    errno = 0;
    const long label = std::strtol(label_text.c_str(), &end, 10);
    if (label_text.empty() || *end != '\0' || errno == ERANGE) {
      throw DataError(where + ": cannot parse label '" + label_text + "'");
    }
    if (label < 0 || (opts.n_classes > 0 && label >= opts.n_classes)) {
      throw DataError(where + ": unknown label " + label_text);
    }
    const fs::path file = base / rel;
    if (!fs::exists(file)) throw DataError(where + ": missing file '" + file.string() + "'");
    d.samples.push_back(GraphSample{
        rel, sanitize_adjacency(read_matrix_file(file), rel, opts, &d.warnings),
        static_cast<int>(label)});
    max_label = std::max(max_label, static_cast<int>(label));
  }
  if (d.samples.empty()) throw DataError("manifest '" + manifest.string() + "' lists no samples");
  d.n_classes = opts.n_classes > 0 ? opts.n_classes : max_label + 1;
  d.finalize();
  return d;
}

// Writes each sample as `<id>` below `dir` plus a manifest.csv; ids must be
// relative paths.
inline void write_dataset(const Dataset& d, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir.string() + "': " + ec.message());
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw DataError("cannot write manifest in '" + dir.string() + "'");
  for (const GraphSample& s : d.samples) {
    const fs::path file = dir / s.id;
    if (file.has_parent_path()) fs::create_directories(file.parent_path(), ec);
    write_matrix_file(file, s.adjacency.weights());
    manifest << s.id << ',' << s.label << '\n';
  }
  if (!manifest) throw DataError("failed writing manifest in '" + dir.string() + "'");
}

struct FoldPlan {
  int k = 0;
  std::vector<int> assignments;
  std::uint64_t seed = 0;

  std::vector<std::size_t> members(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] == fold) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> complement(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] != fold) out.push_back(i);
    return out;
  }
};

// Shuffles each class, then deals its members round-robin; the dealing cursor
// carries over between classes so fold sizes also stay within one sample.
inline FoldPlan stratified_kfold(const Dataset& d, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be >= 2, got " + std::to_string(k));
  for (int c = 0; c < d.n_classes; ++c) {
    if (d.class_counts[static_cast<std::size_t>(c)] < k) {
      throw DataError("class " + std::to_string(c) + " has fewer than " + std::to_string(k) +
                      " samples");
    }
  }
  Rng rng = substream(seed, "folds");
  FoldPlan plan{k, std::vector<int>(d.size(), -1), seed};
  int cursor = 0;
  for (int c = 0; c < d.n_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (d.samples[i].label == c) members.push_back(i);
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[uniform_index(rng, i)]);
    }
    for (std::size_t idx : members) {
      plan.assignments[idx] = cursor;
      cursor = (cursor + 1) % k;
    }
  }
  return plan;
}

// Class-balanced sampling with replacement: floor(batch/L) draws per class,
// the remainder assigned to classes in rotating round-robin order.
class BalancedSampler {
 public:
  BalancedSampler(std::span<const int> labels, int n_classes, int batch_size, Rng rng)
      : batch_size_(batch_size), rng_(std::move(rng)) {
    if (batch_size < n_classes) {
      throw ConfigError("batch_size (" + std::to_string(batch_size) +
                        ") must be at least the class count (" + std::to_string(n_classes) + ")");
    }
    by_class_.resize(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || labels[i] >= n_classes) throw DataError("label out of range");
      by_class_[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    for (std::size_t c = 0; c < by_class_.size(); ++c) {
      if (by_class_[c].empty()) {
        throw DataError("class " + std::to_string(c) + " is empty in the training subset");
      }
    }
  }

  static std::vector<int> labels_of(const Dataset& d) {
    std::vector<int> out;
    for (const GraphSample& s : d.samples) out.push_back(s.label);
    return out;
  }

  std::vector<std::size_t> next() {
    const std::size_t classes = by_class_.size();
    std::vector<int> counts(classes, batch_size_ / static_cast<int>(classes));
    for (int r = 0; r < batch_size_ % static_cast<int>(classes); ++r) {
      ++counts[rotation_];
      rotation_ = (rotation_ + 1) % classes;
    }
    std::vector<std::size_t> batch;
    batch.reserve(static_cast<std::size_t>(batch_size_));
    for (std::size_t c = 0; c < classes; ++c) {
      for (int k = 0; k < counts[c]; ++k) {
        batch.push_back(by_class_[c][uniform_index(rng_, by_class_[c].size())]);
      }
    }
    return batch;
  }

 private:
  int batch_size_;
  Rng rng_;
  std::vector<std::vector<std::size_t>> by_class_;
  std::size_t rotation_ = 0;
};

struct SyntheticSpec {
  Eigen::Index n = 0;
  std::vector<Matrix> templates;
  double sigma = 0.0;
  std::vector<int> counts;
  std::uint64_t seed = 0;
};

// Sample of class c is max(mu_c + E, 0) with E symmetric N(0, sigma^2) noise
// and zero diagonal.
inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.templates.empty() || spec.templates.size() != spec.counts.size()) {
    throw ConfigError("synthetic spec needs one count per template");
  }
  if (!(spec.sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
  for (const Matrix& t : spec.templates) {
    if (t.rows() != spec.n || t.cols() != spec.n) {
      throw DataError("template shape " + std::to_string(t.rows()) + "x" +
                      std::to_string(t.cols()) + " does not match n = " + std::to_string(spec.n));
    }
    AdjacencyMatrix check(t);  // validates symmetric, nonnegative, zero diagonal
  }
  for (int c : spec.counts)
    if (c < 1) throw ConfigError("per-class counts must be positive");

  Rng rng = substream(spec.seed, "synth");
  Dataset d;
  d.n_classes = static_cast<int>(spec.templates.size());
  for (std::size_t c = 0; c < spec.templates.size(); ++c) {
    for (int k = 0; k < spec.counts[c]; ++k) {
      Matrix m = spec.templates[c];
      if (spec.sigma > 0.0) {
        for (Eigen::Index j = 0; j < spec.n; ++j) {
          for (Eigen::Index i = 0; i < j; ++i) {
            const double v = std::max(0.0, m(i, j) + spec.sigma * standard_normal(rng));
            m(i, j) = v;
            m(j, i) = v;
          }
        }
      }
      char id[64];
      std::snprintf(id, sizeof id, "class%zu/g%04d.csv", c, k);
      d.samples.push_back(GraphSample{id, AdjacencyMatrix(std::move(m)), static_cast<int>(c)});
    }
  }
  d.finalize();
  return d;
}

// Two class templates: a random base graph (edge probability `density`,
// weights uniform in [0, 1]) and the same graph plus a nonnegative perturbation
// on a random edge subset scaled so that ||mu_1 - mu_0||_F = separation.
inline std::vector<Matrix> make_separated_templates(Eigen::Index n, double separation,
                                                    double density, std::uint64_t seed) {
  if (n < 2) throw ConfigError("template node count must be >= 2");
  if (!(separation > 0.0)) throw ConfigError("template separation must be positive");
  if (!(density > 0.0 && density <= 1.0)) throw ConfigError("template density must be in (0, 1]");
  Rng rng = substream(seed, "templates");
  Matrix base = Matrix::Zero(n, n);
  Matrix delta = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) {
      if (uniform01(rng) < density) base(i, j) = base(j, i) = uniform01(rng);
      if (uniform01(rng) < density) delta(i, j) = delta(j, i) = uniform(rng, 0.5, 1.0);
    }
  }
  if (delta.norm() == 0.0) delta(0, 1) = delta(1, 0) = 1.0;
  delta *= separation / delta.norm();
  return {base, base + delta};
}

}  // namespace mgnn
