#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mgnn/rng.hpp"
#include "mgnn/transform.hpp"

namespace mgnn {

enum class OptimizerKind { kGradientDescent, kAdam };
enum class LossKind { kPerClassBinary, kCategorical };
enum class Mode { kTrain, kEval };

inline constexpr double kScaleMin = 1e-3;
inline constexpr double kScaleMax = 10.0;
inline constexpr double kProbabilityClip = 1e-12;

struct TrainConfig {
  double theta1 = 1e-4;  // l1 on first-layer weights
  double theta2 = 1e-3;  // l2 on scales
  double lr_weights = 0.01;
  double lr_scales = 0.05;
  double dropout_rate = 0.2;
  double leaky_slope = 0.01;
  int epochs = 100;
  int batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  LossKind loss = LossKind::kPerClassBinary;
  bool use_bias = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (theta1 < 0 || theta2 < 0) throw ConfigError("regularization coefficients must be >= 0");
    if (lr_weights < 0 || lr_scales < 0) throw ConfigError("learning rates must be >= 0");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw ConfigError("dropout_rate must be in [0, 1)");
    }
    if (leaky_slope < 0) throw ConfigError("leaky_slope must be >= 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  }
};

struct ModelGeometry {
  Eigen::Index n_nodes = 0;
  std::size_t scale_count = 5;
  std::vector<Eigen::Index> hidden_widths{2000, 128, 32};
  Eigen::Index n_classes = 2;
  bool use_bias = false;

  Eigen::Index input_width() const {
    return static_cast<Eigen::Index>(scale_count) * n_nodes * n_nodes;
  }
};

// Learnable scales plus the fully connected stack. weights[h] maps layer h's
// input to its output (rows = fan_out); the last entry produces class logits.
// Biases, when enabled, exist on hidden layers only.
struct ModelParams {
  std::vector<double> scales;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Eigen::Index n_nodes = 0;

  std::size_t layer_count() const { return weights.size(); }
  Eigen::Index n_classes() const { return weights.empty() ? 0 : weights.back().rows(); }
  bool has_bias() const { return !biases.empty(); }
  ScaleSet scale_set() const { return ScaleSet(scales); }

  ModelGeometry geometry() const {
    ModelGeometry g;
    g.n_nodes = n_nodes;
    g.scale_count = scales.size();
    g.hidden_widths.clear();
    for (std::size_t h = 0; h + 1 < weights.size(); ++h) g.hidden_widths.push_back(weights[h].rows());
    g.n_classes = n_classes();
    g.use_bias = has_bias();
    return g;
  }

  void check_consistent() const {
    if (weights.empty()) throw ConfigError("model has no layers");
    if (scales.empty()) throw ConfigError("model has no scales");
    const Eigen::Index in = static_cast<Eigen::Index>(scales.size()) * n_nodes * n_nodes;
    if (weights.front().cols() != in) throw ConfigError("first layer does not match |s|*N*N");
    for (std::size_t h = 1; h < weights.size(); ++h) {
      if (weights[h].cols() != weights[h - 1].rows()) throw ConfigError("layer widths do not chain");
    }
    if (has_bias()) {
      if (biases.size() + 1 != weights.size()) throw ConfigError("bias count mismatch");
      for (std::size_t h = 0; h < biases.size(); ++h) {
        if (biases[h].size() != weights[h].rows()) throw ConfigError("bias width mismatch");
      }
    }
  }
};

// Xavier-uniform weights, scales uniform in (1e-3, scale_max].
inline ModelParams init_params(const ModelGeometry& geo, Rng& rng, double scale_max = 2.5) {
  if (geo.n_nodes < 1) throw ConfigError("node count must be positive");
  if (geo.scale_count < 1) throw ConfigError("scale count must be >= 1");
  if (geo.hidden_widths.empty()) throw ConfigError("at least one hidden layer is required");
  if (geo.n_classes < 2) throw ConfigError("at least two classes are required");
  if (!(scale_max > kScaleMin)) throw ConfigError("scale init range must exceed 1e-3");
  for (Eigen::Index w : geo.hidden_widths) {
    if (w < 1) throw ConfigError("layer widths must be positive");
  }

  ModelParams p;
  p.n_nodes = geo.n_nodes;
  p.scales.resize(geo.scale_count);
  for (double& s : p.scales) s = scale_max - (scale_max - kScaleMin) * uniform01(rng);

  std::vector<Eigen::Index> dims{geo.input_width()};
  dims.insert(dims.end(), geo.hidden_widths.begin(), geo.hidden_widths.end());
  dims.push_back(geo.n_classes);
  for (std::size_t h = 0; h + 1 < dims.size(); ++h) {
    const Eigen::Index fan_in = dims[h];
    const Eigen::Index fan_out = dims[h + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_out, fan_in);
    for (Eigen::Index j = 0; j < fan_in; ++j)
      for (Eigen::Index i = 0; i < fan_out; ++i) w(i, j) = uniform(rng, -bound, bound);
    p.weights.push_back(std::move(w));
  }
  if (geo.use_bias) {
    for (std::size_t h = 0; h < geo.hidden_widths.size(); ++h) {
      p.biases.push_back(Vector::Zero(geo.hidden_widths[h]));
    }
  }
  return p;
}

struct ForwardTrace {
  MultiResolutionMap feature_map;
  Vector flattened;
  std::vector<Vector> pre_activations;  // one per layer, output layer last
  std::vector<Vector> activations;      // hidden outputs after dropout
  std::vector<Vector> dropout_masks;    // 0 or 1/(1-p); empty in eval mode
  Vector probabilities;
};

struct ForwardOptions {
  Mode mode = Mode::kEval;
  double dropout_rate = 0.2;
  double leaky_slope = 0.01;
};

// Scale-major then row-major: index = j*N*N + p*N + q.
inline Vector flatten(const MultiResolutionMap& m) {
  const Eigen::Index n = m.n();
  Vector out(static_cast<Eigen::Index>(m.scale_count()) * n * n);
  Eigen::Index k = 0;
  for (const Matrix& slice : m.slices)
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = 0; q < n; ++q) out(k++) = slice(p, q);
  return out;
}

inline Vector softmax(const Vector& z) {
  const double shift = z.maxCoeff();
  Vector e = (z.array() - shift).exp().matrix();
  return e / e.sum();
}

inline ForwardTrace forward(const GraphSpectrum& input, const ModelParams& params,
                            const Kernel& kernel, const ForwardOptions& opts, Rng* dropout_rng) {
  if (input.n() != params.n_nodes) {
    throw ConfigError("graph has " + std::to_string(input.n()) + " nodes, model expects " +
                      std::to_string(params.n_nodes));
  }
  const bool train = opts.mode == Mode::kTrain && opts.dropout_rate > 0.0;
  if (train && dropout_rng == nullptr) throw ConfigError("training-mode dropout needs an rng");

  ForwardTrace t;
  t.feature_map = input.feature_map(kernel, params.scale_set());
  t.flattened = flatten(t.feature_map);

  const Vector* x = &t.flattened;
  const std::size_t hidden = params.layer_count() - 1;
  for (std::size_t h = 0; h < hidden; ++h) {
    Vector z = params.weights[h] * *x;
    if (params.has_bias()) z += params.biases[h];
    Vector a = z.unaryExpr([&](double v) { return v >= 0.0 ? v : opts.leaky_slope * v; });
    if (train) {
      Vector mask(a.size());
      const double keep_scale = 1.0 / (1.0 - opts.dropout_rate);
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        mask(i) = uniform01(*dropout_rng) < opts.dropout_rate ? 0.0 : keep_scale;
      }
      a.array() *= mask.array();
      t.dropout_masks.push_back(std::move(mask));
    }
    t.pre_activations.push_back(std::move(z));
    t.activations.push_back(std::move(a));
    x = &t.activations.back();
  }
  Vector logits = params.weights.back() * *x;
  t.probabilities = softmax(logits);
  t.pre_activations.push_back(std::move(logits));
  if (!t.probabilities.allFinite() || !t.pre_activations.back().allFinite()) {
    throw NumericalError("non-finite activation in forward pass (scales or weights diverged)");
  }
  return t;
}

struct LossReport {
  double data_loss = 0.0;
  double l1_penalty = 0.0;
  double l2_scale_penalty = 0.0;
  double total = 0.0;
};

inline Vector one_hot(Eigen::Index label, Eigen::Index n_classes) {
  Vector y = Vector::Zero(n_classes);
  y(label) = 1.0;
  return y;
}

namespace detail {

inline void require_one_hot(const Vector& y, Eigen::Index n_classes) {
  if (y.size() != n_classes) throw ConfigError("label width does not match class count");
  int ones = 0;
  for (Eigen::Index l = 0; l < y.size(); ++l) {
    if (y(l) == 1.0) {
      ++ones;
    } else if (y(l) != 0.0) {
      throw ConfigError("label is not one-hot");
    }
  }
  if (ones != 1) throw ConfigError("label is not one-hot");
}

inline double clip_probability(double o) {
  return std::clamp(o, kProbabilityClip, 1.0 - kProbabilityClip);
}

}  // namespace detail

inline LossReport loss(std::span<const ForwardTrace> traces, std::span<const Vector> labels,
                       const ModelParams& params, const TrainConfig& cfg) {
  if (traces.empty() || traces.size() != labels.size()) {
    throw ConfigError("loss needs one label per trace and a nonempty batch");
  }
  const double n_graphs = static_cast<double>(traces.size());
  LossReport r;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const Vector& o = traces[i].probabilities;
    const Vector& y = labels[i];
    detail::require_one_hot(y, o.size());
    for (Eigen::Index l = 0; l < o.size(); ++l) {
      const double p = detail::clip_probability(o(l));
      if (cfg.loss == LossKind::kPerClassBinary) {
        r.data_loss -= y(l) * std::log(p) + (1.0 - y(l)) * std::log(1.0 - p);
      } else {
        r.data_loss -= y(l) * std::log(p);
      }
    }
  }
  r.data_loss /= n_graphs;
  r.l1_penalty = cfg.theta1 / (2.0 * n_graphs) * params.weights.front().cwiseAbs().sum();
  double sq = 0.0;
  for (double s : params.scales) sq += s * s;
  r.l2_scale_penalty = cfg.theta2 / (2.0 * n_graphs) * sq;
  r.total = r.data_loss + r.l1_penalty + r.l2_scale_penalty;
  if (!std::isfinite(r.total)) throw NumericalError("non-finite loss");
  return r;
}

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  std::vector<double> scales;

  static Gradients zeros_like(const ModelParams& p) {
    Gradients g;
    for (const Matrix& w : p.weights) g.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
    for (const Vector& b : p.biases) g.biases.push_back(Vector::Zero(b.size()));
    g.scales.assign(p.scales.size(), 0.0);
    return g;
  }

  bool all_finite() const {
    for (const Matrix& w : weights)
      if (!w.allFinite()) return false;
    for (const Vector& b : biases)
      if (!b.allFinite()) return false;
    for (double s : scales)
      if (!std::isfinite(s)) return false;
    return true;
  }
};

inline double sign_or_zero(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Exact gradient of LossReport::total for the batch, reusing the dropout
// masks recorded in the traces.
inline Gradients backward(std::span<const GraphSpectrum* const> inputs,
                          std::span<const ForwardTrace> traces, std::span<const Vector> labels,
                          const ModelParams& params, const Kernel& kernel,
                          const TrainConfig& cfg) {
  if (inputs.size() != traces.size() || traces.size() != labels.size() || traces.empty()) {
    throw ConfigError("backward needs matching, nonempty inputs, traces and labels");
  }
  params.check_consistent();
  const std::size_t hidden = params.layer_count() - 1;
  const Eigen::Index n = params.n_nodes;
  const double n_graphs = static_cast<double>(traces.size());
  Gradients g = Gradients::zeros_like(params);

  for (std::size_t i = 0; i < traces.size(); ++i) {
    const ForwardTrace& t = traces[i];
    if (t.pre_activations.size() != params.layer_count() || t.activations.size() != hidden ||
        t.flattened.size() != params.weights.front().cols()) {
      throw ConfigError("forward trace does not match model parameters");
    }
    const Vector& o = t.probabilities;
    const Vector& y = labels[i];
    detail::require_one_hot(y, o.size());

    Vector d_out(o.size());
    for (Eigen::Index l = 0; l < o.size(); ++l) {
      const bool inside = o(l) > kProbabilityClip && o(l) < 1.0 - kProbabilityClip;
      const double p = detail::clip_probability(o(l));
      double d = 0.0;
      if (inside) {
        d = cfg.loss == LossKind::kPerClassBinary ? -(y(l) / p - (1.0 - y(l)) / (1.0 - p))
                                                  : -y(l) / p;
      }
      d_out(l) = d / n_graphs;
    }
    // Softmax Jacobian.
    Vector dz = (o.array() * (d_out.array() - d_out.dot(o))).matrix();

    for (std::size_t h = params.layer_count(); h-- > 0;) {
      const Vector& layer_in = h == 0 ? t.flattened : t.activations[h - 1];
      g.weights[h].noalias() += dz * layer_in.transpose();
      if (h < hidden && params.has_bias()) g.biases[h] += dz;
      Vector dx = params.weights[h].transpose() * dz;
      if (h == 0) {
        // dx is the gradient with respect to the flattened feature map.
        for (std::size_t j = 0; j < params.scales.size(); ++j) {
          const Matrix dslice = inputs[i]->slice_derivative(kernel, params.scales[j]);
          const Eigen::Index offset = static_cast<Eigen::Index>(j) * n * n;
          double acc = 0.0;
          for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = 0; q < n; ++q) acc += dx(offset + p * n + q) * dslice(p, q);
          g.scales[j] += acc;
        }
        break;
      }
      const std::size_t below = h - 1;
      if (!t.dropout_masks.empty()) dx.array() *= t.dropout_masks[below].array();
      const Vector& z = t.pre_activations[below];
      for (Eigen::Index k = 0; k < dx.size(); ++k) {
        if (z(k) < 0.0) dx(k) *= cfg.leaky_slope;
      }
      dz = std::move(dx);
    }
  }

  const double l1 = cfg.theta1 / (2.0 * n_graphs);
  if (l1 != 0.0) g.weights.front() += l1 * params.weights.front().unaryExpr(&sign_or_zero);
  for (std::size_t j = 0; j < params.scales.size(); ++j) {
    g.scales[j] += cfg.theta2 / n_graphs * params.scales[j];
  }
  return g;
}

// Plain gradient descent or Adam with separate rates for weights and scales.
// Scales are projected into [1e-3, 10] after every step.
class Optimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Optimizer(OptimizerKind kind, const ModelParams& params) : kind_(kind) {
    m_ = Gradients::zeros_like(params);
    v_ = Gradients::zeros_like(params);
  }

  int steps() const { return step_; }

  void step(ModelParams& params, const Gradients& grads, const TrainConfig& cfg) {
    if (!grads.all_finite()) throw NumericalError("non-finite gradient");
    if (grads.weights.size() != params.weights.size() ||
        grads.biases.size() != params.biases.size() ||
        grads.scales.size() != params.scales.size()) {
      throw ConfigError("gradient shapes do not match parameters");
    }
    ++step_;
    const double c1 = 1.0 - std::pow(kBeta1, step_);
    const double c2 = 1.0 - std::pow(kBeta2, step_);
    auto update = [&](double& w, double gval, double& m, double& v, double lr) {
      if (kind_ == OptimizerKind::kGradientDescent) {
        w -= lr * gval;
        return;
      }
      m = kBeta1 * m + (1.0 - kBeta1) * gval;
      v = kBeta2 * v + (1.0 - kBeta2) * gval * gval;
      w -= lr * (m / c1) / (std::sqrt(v / c2) + kEpsilon);
    };
    for (std::size_t h = 0; h < params.weights.size(); ++h) {
      Matrix& w = params.weights[h];
      if (w.rows() != grads.weights[h].rows() || w.cols() != grads.weights[h].cols()) {
        throw ConfigError("gradient shapes do not match parameters");
      }
      for (Eigen::Index k = 0; k < w.size(); ++k) {
        update(w.data()[k], grads.weights[h].data()[k], m_.weights[h].data()[k],
               v_.weights[h].data()[k], cfg.lr_weights);
      }
    }
    for (std::size_t h = 0; h < params.biases.size(); ++h) {
      for (Eigen::Index k = 0; k < params.biases[h].size(); ++k) {
        update(params.biases[h](k), grads.biases[h](k), m_.biases[h](k), v_.biases[h](k),
               cfg.lr_weights);
      }
    }
    for (std::size_t j = 0; j < params.scales.size(); ++j) {
      update(params.scales[j], grads.scales[j], m_.scales[j], v_.scales[j], cfg.lr_scales);
      params.scales[j] = std::clamp(params.scales[j], kScaleMin, kScaleMax);
    }
  }

 private:
  OptimizerKind kind_;
  Gradients m_;
  Gradients v_;
  int step_ = 0;
};

}  // namespace mgnn
