#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "mgnn/data.hpp"
#include "mgnn/model.hpp"

namespace mgnn {

// How each graph is turned into classifier input.
struct SpectralOptions {
  bool normalized = false;
  bool approximate = false;  // Taylor series instead of eigendecomposition
  int order = 30;

  void validate() const {
    if (approximate && !normalized) {
      throw ConfigError("transform.mode = approx requires laplacian.normalized = true");
    }
    if (order < 0) throw ConfigError("approx.K must be >= 0");
  }
};

inline GraphSpectrum prepare_spectrum(const AdjacencyMatrix& a, const SpectralOptions& opts) {
  GraphLaplacian l = build_laplacian(a, opts.normalized);
  if (opts.approximate) return GraphSpectrum::approximate(std::move(l), opts.order);
  return GraphSpectrum::exact(eigendecompose(l));
}

inline std::vector<GraphSpectrum> prepare_spectra(const Dataset& d, const SpectralOptions& opts,
                                                  int workers = 1) {
  std::vector<GraphSpectrum> out;
  out.reserve(d.size());
  if (workers <= 1) {
    for (const GraphSample& s : d.samples) out.push_back(prepare_spectrum(s.adjacency, opts));
    return out;
  }
  std::vector<std::future<GraphSpectrum>> jobs;
  for (std::size_t start = 0; start < d.size(); start += static_cast<std::size_t>(workers)) {
    jobs.clear();
    const std::size_t stop = std::min(d.size(), start + static_cast<std::size_t>(workers));
    for (std::size_t i = start; i < stop; ++i) {
      jobs.push_back(std::async(std::launch::async, [&d, &opts, i] {
        return prepare_spectrum(d.samples[i].adjacency, opts);
      }));
    }
    for (auto& j : jobs) out.push_back(j.get());
  }
  return out;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  long support = 0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  std::vector<ClassMetrics> per_class;
  std::vector<std::vector<long>> confusion;  // [true][predicted]
};

inline MetricsReport metrics_from_confusion(std::vector<std::vector<long>> confusion) {
  MetricsReport r;
  const std::size_t classes = confusion.size();
  long total = 0;
  long correct = 0;
  std::vector<long> predicted(classes, 0);
  for (std::size_t t = 0; t < classes; ++t) {
    if (confusion[t].size() != classes) throw ConfigError("confusion matrix is not square");
    for (std::size_t p = 0; p < classes; ++p) {
      total += confusion[t][p];
      predicted[p] += confusion[t][p];
    }
    correct += confusion[t][t];
  }
  r.per_class.resize(classes);
  if (total == 0) {
    r.confusion = std::move(confusion);
    return r;
  }
  for (std::size_t c = 0; c < classes; ++c) {
    const long tp = confusion[c][c];
    const long support = std::accumulate(confusion[c].begin(), confusion[c].end(), 0L);
    ClassMetrics& m = r.per_class[c];
    m.support = support;
    m.precision = predicted[c] > 0 ? static_cast<double>(tp) / static_cast<double>(predicted[c]) : 0.0;
    m.recall = support > 0 ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
    r.weighted_precision += static_cast<double>(support) * m.precision;
    r.weighted_recall += static_cast<double>(support) * m.recall;
  }
  r.weighted_precision /= static_cast<double>(total);
  r.weighted_recall /= static_cast<double>(total);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  r.confusion = std::move(confusion);
  return r;
}

inline MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted,
                                     int n_classes) {
  if (truth.size() != predicted.size()) throw ConfigError("prediction count mismatch");
  std::vector<std::vector<long>> confusion(static_cast<std::size_t>(n_classes),
                                           std::vector<long>(static_cast<std::size_t>(n_classes), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= n_classes || predicted[i] < 0 || predicted[i] >= n_classes) {
      throw ConfigError("class index out of range");
    }
    ++confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return metrics_from_confusion(std::move(confusion));
}

// Lowest index wins ties.
inline int argmax(const Vector& v) {
  int best = 0;
  for (Eigen::Index l = 1; l < v.size(); ++l)
    if (v(l) > v(best)) best = static_cast<int>(l);
  return best;
}

inline std::vector<int> predict(const ModelParams& params, const Kernel& kernel,
                                std::span<const GraphSpectrum* const> inputs) {
  std::vector<int> out;
  out.reserve(inputs.size());
  for (const GraphSpectrum* g : inputs) {
    out.push_back(argmax(forward(*g, params, kernel, {Mode::kEval}, nullptr).probabilities));
  }
  return out;
}

inline MetricsReport evaluate(const ModelParams& params, const Kernel& kernel,
                              std::span<const GraphSpectrum* const> inputs,
                              std::span<const int> labels) {
  if (inputs.empty()) throw ConfigError("evaluation subset is empty");
  const std::vector<int> pred = predict(params, kernel, inputs);
  return compute_metrics(labels, pred, static_cast<int>(params.n_classes()));
}

struct EpochRecord {
  int epoch = 0;
  double total_loss = 0.0;
  double data_loss = 0.0;
  std::vector<double> scales;
};

using TrainHistory = std::vector<EpochRecord>;

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

struct ModelSpec {
  std::size_t scale_count = 5;
  double scale_init_max = 2.5;
  std::vector<Eigen::Index> hidden_widths{2000, 128, 32};
};

namespace detail {

inline std::string nonfinite_group(const ModelParams& p) {
  for (double s : p.scales)
    if (!std::isfinite(s)) return "scales";
  for (std::size_t h = 0; h < p.weights.size(); ++h)
    if (!p.weights[h].allFinite()) return "weights of layer " + std::to_string(h + 1);
  for (std::size_t h = 0; h < p.biases.size(); ++h)
    if (!p.biases[h].allFinite()) return "biases of layer " + std::to_string(h + 1);
  return "loss only (parameters finite)";
}

}  // namespace detail

// Trains on the samples addressed by `inputs`/`labels`. `stream` separates the
// random streams of independent runs (e.g. folds) under the same seed.
inline TrainResult train(std::span<const GraphSpectrum* const> inputs, std::span<const int> labels,
                         int n_classes, const Kernel& kernel, const TrainConfig& cfg,
                         const ModelSpec& spec, std::uint64_t stream = 0) {
  cfg.validate();
  if (inputs.empty() || inputs.size() != labels.size()) {
    throw ConfigError("training subset is empty or labels are missing");
  }
  ModelGeometry geo;
  geo.n_nodes = inputs.front()->n();
  geo.scale_count = spec.scale_count;
  geo.hidden_widths = spec.hidden_widths;
  geo.n_classes = n_classes;
  geo.use_bias = cfg.use_bias;
  Rng init_rng = substream(cfg.seed, "init", stream);
  TrainResult result{init_params(geo, init_rng, spec.scale_init_max), {}};
  if (cfg.epochs == 0) return result;

  std::vector<Vector> one_hots;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i]->n() != geo.n_nodes) throw DataError("training graphs differ in node count");
    if (labels[i] < 0 || labels[i] >= n_classes) throw DataError("label out of range");
    one_hots.push_back(one_hot(labels[i], n_classes));
  }
  BalancedSampler sampler(labels, n_classes, cfg.batch_size,
                          substream(cfg.seed, "sampling", stream));
  Rng dropout_rng = substream(cfg.seed, "dropout", stream);
  Optimizer opt(cfg.optimizer, result.params);
  const ForwardOptions fwd{Mode::kTrain, cfg.dropout_rate, cfg.leaky_slope};
  const std::size_t batches_per_epoch =
      (inputs.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
      static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double total = 0.0;
    double data = 0.0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const std::vector<std::size_t> batch = sampler.next();
      std::vector<const GraphSpectrum*> batch_inputs;
      std::vector<ForwardTrace> traces;
      std::vector<Vector> batch_labels;
      LossReport report;
      try {
        for (std::size_t i : batch) {
          batch_inputs.push_back(inputs[i]);
          traces.push_back(forward(*inputs[i], result.params, kernel, fwd, &dropout_rng));
          batch_labels.push_back(one_hots[i]);
        }
        report = loss(traces, batch_labels, result.params, cfg);
      } catch (const NumericalError& e) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + " (" +
                             e.what() + "); offending parameter group: " +
                             detail::nonfinite_group(result.params));
      }
      total += report.total;
      data += report.data_loss;
      const Gradients grads =
          backward(batch_inputs, traces, batch_labels, result.params, kernel, cfg);
      opt.step(result.params, grads, cfg);
    }
    const double denom = static_cast<double>(batches_per_epoch);
    result.history.push_back({epoch, total / denom, data / denom, result.params.scales});
  }
  return result;
}

struct FoldResult {
  MetricsReport metrics;
  TrainHistory history;
  ModelParams params;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

struct SummaryStat {
  double mean = 0.0;
  double std = 0.0;  // population
};

struct CvResult {
  std::vector<FoldResult> folds;
  SummaryStat accuracy;
  SummaryStat weighted_precision;
  SummaryStat weighted_recall;
  double majority_baseline = 0.0;
};

inline SummaryStat summarize(const std::vector<double>& v) {
  SummaryStat s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(v.size()));
  return s;
}

inline double majority_baseline(const std::vector<int>& class_counts) {
  const long total = std::accumulate(class_counts.begin(), class_counts.end(), 0L);
  if (total == 0) return 0.0;
  return static_cast<double>(*std::max_element(class_counts.begin(), class_counts.end())) /
         static_cast<double>(total);
}

inline CvResult cross_validate(const Dataset& d, const std::vector<GraphSpectrum>& spectra,
                               const Kernel& kernel, const TrainConfig& cfg, const ModelSpec& spec,
                               int k, std::uint64_t fold_seed, int workers = 1) {
  if (spectra.size() != d.size()) throw ConfigError("one spectrum per sample is required");
  const FoldPlan plan = stratified_kfold(d, k, fold_seed);

  auto run_fold = [&](int f) {
    FoldResult fr;
    fr.train_indices = plan.complement(f);
    fr.test_indices = plan.members(f);
    std::vector<const GraphSpectrum*> train_in, test_in;
    std::vector<int> train_y, test_y;
    for (std::size_t i : fr.train_indices) {
      train_in.push_back(&spectra[i]);
      train_y.push_back(d.samples[i].label);
    }
    for (std::size_t i : fr.test_indices) {
      test_in.push_back(&spectra[i]);
      test_y.push_back(d.samples[i].label);
    }
    TrainResult tr = train(train_in, train_y, d.n_classes, kernel, cfg, spec,
                           static_cast<std::uint64_t>(f));
    fr.metrics = evaluate(tr.params, kernel, test_in, test_y);
    fr.history = std::move(tr.history);
    fr.params = std::move(tr.params);
    return fr;
  };

  CvResult out;
  out.folds.resize(static_cast<std::size_t>(k));
  if (workers <= 1) {
    for (int f = 0; f < k; ++f) out.folds[static_cast<std::size_t>(f)] = run_fold(f);
  } else {
    for (int start = 0; start < k; start += workers) {
      std::vector<std::future<FoldResult>> jobs;
      for (int f = start; f < std::min(k, start + workers); ++f) {
        jobs.push_back(std::async(std::launch::async, run_fold, f));
      }
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        out.folds[static_cast<std::size_t>(start) + j] = jobs[j].get();
      }
    }
  }
  std::vector<double> acc, wp, wr;
  for (const FoldResult& fr : out.folds) {
    acc.push_back(fr.metrics.accuracy);
    wp.push_back(fr.metrics.weighted_precision);
    wr.push_back(fr.metrics.weighted_recall);
  }
  out.accuracy = summarize(acc);
  out.weighted_precision = summarize(wp);
  out.weighted_recall = summarize(wr);
  out.majority_baseline = majority_baseline(d.class_counts);
  return out;
}

struct SaliencyMatrix {
  Matrix matrix;
  std::vector<double> scale_profile;

  Eigen::Index n() const { return matrix.rows(); }
};

// Mean |w| over first-hidden units for every (scale, p, q) input, averaged over
// scales and symmetrized. scale_profile[j] is the summed per-position mean of
// slice j before the scale average.
inline SaliencyMatrix edge_saliency(const ModelParams& params) {
  params.check_consistent();
  const Eigen::Index n = params.n_nodes;
  const Matrix& w = params.weights.front();
  const Vector column_mean = w.cwiseAbs().colwise().mean().transpose();
  SaliencyMatrix s{Matrix::Zero(n, n), std::vector<double>(params.scales.size(), 0.0)};
  for (std::size_t j = 0; j < params.scales.size(); ++j) {
    const Eigen::Index offset = static_cast<Eigen::Index>(j) * n * n;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = 0; q < n; ++q) {
        const double v = column_mean(offset + p * n + q);
        s.matrix(p, q) += v;
        s.scale_profile[j] += v;
      }
    }
  }
  s.matrix /= static_cast<double>(params.scales.size());
  s.matrix = 0.5 * (s.matrix + s.matrix.transpose()).eval();
  return s;
}

struct RankedEdge {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double value = 0.0;
};

// Upper-triangle entries by descending value, ties by (row, col).
inline std::vector<RankedEdge> top_k_edges(const SaliencyMatrix& s, std::size_t k) {
  const Eigen::Index n = s.n();
  const std::size_t available = static_cast<std::size_t>(n * (n - 1) / 2);
  if (k > available) {
    throw ConfigError("top-k of " + std::to_string(k) + " exceeds the " +
                      std::to_string(available) + " available edges");
  }
  std::vector<RankedEdge> edges;
  edges.reserve(available);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = r + 1; c < n; ++c) edges.push_back({r, c, s.matrix(r, c)});
  std::partial_sort(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(k), edges.end(),
                    [](const RankedEdge& a, const RankedEdge& b) {
                      if (a.value != b.value) return a.value > b.value;
                      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
                    });
  edges.resize(k);
  return edges;
}

// Fraction of first-layer weights with |w| below `threshold`.
inline double first_layer_sparsity(const ModelParams& params, double threshold = 1e-4) {
  const Matrix& w = params.weights.front();
  const auto small = (w.array().abs() < threshold).count();
  return static_cast<double>(small) / static_cast<double>(w.size());
}

}  // namespace mgnn
