// Command-line front end: transform inspection, training, cross-validation,
// saliency export and synthetic data generation.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mgnn/config.hpp"
#include "mgnn/io.hpp"
#include "mgnn/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mgnn;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
  std::vector<std::string> overrides;
};

RunConfig resolve(const CommonFlags& flags) {
  RunConfig cfg;
  if (!flags.config_path.empty()) load_config_file(cfg, flags.config_path);
  for (const std::string& kv : flags.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_override(cfg, config_detail::trim(kv.substr(0, eq)), config_detail::trim(kv.substr(eq + 1)));
  }
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.workers) cfg.workers = *flags.workers;
  if (!flags.out.empty()) apply_override(cfg, "output.dir", flags.out);
  validate(cfg);
  return cfg;
}

fs::path output_dir(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) throw ConfigError("output.dir (or --out) is required");
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw DataError("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
  return cfg.out_dir;
}

Dataset load_configured_dataset(const RunConfig& cfg) {
  if (cfg.manifest.empty()) throw ConfigError("data.manifest is required");
  LoadOptions opts;
  opts.absolute_values = cfg.absolute_values;
  Dataset d = load_dataset(cfg.manifest, opts);
  for (const std::string& w : d.warnings) std::cerr << "warning: " << w << "\n";
  return d;
}

void write_run_manifest(const fs::path& dir, const RunConfig& cfg, const std::string& command) {
  io::write_text(dir / "run_manifest.conf",
                 "# mgnn " + command + " --config run_manifest.conf\n" + to_text(cfg));
}

int cmd_inspect(const CommonFlags& flags) {
  std::cout << to_text(resolve(flags));
  return 0;
}

int cmd_transform(const CommonFlags& flags, const std::string& graph,
                  const std::vector<double>& scale_values) {
  const RunConfig cfg = resolve(flags);
  const ScaleSet scales(scale_values);
  LoadOptions opts;
  opts.absolute_values = cfg.absolute_values;
  std::vector<std::string> warnings;
  const AdjacencyMatrix a = sanitize_adjacency(read_matrix_file(graph), graph, opts, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  const Kernel kernel = cfg.kernel();
  const GraphLaplacian l = build_laplacian(a, cfg.normalized);
  const EigenSystem eig = eigendecompose(l);

  std::vector<Matrix> slices;
  std::string report = "scale,frobenius_norm,exact_vs_approx_rel_error\n";
  for (double s : scales.values()) {
    Matrix exact = transform_exact(eig, kernel, s);
    std::string discrepancy;
    if (cfg.approximate) {
      Matrix approx = transform_approx(l, kernel, s, cfg.approx_order);
      discrepancy = io::format_double((approx - exact).norm() / std::max(exact.norm(), 1e-12));
      exact = std::move(approx);
    }
    report += io::format_double(s) + "," + io::format_double(exact.norm()) + "," + discrepancy + "\n";
    slices.push_back(std::move(exact));
  }
  const Matrix recon = reconstruct(eig, kernel, default_reconstruction_grid(eig));
  const double recon_err = l.matrix.norm() > 0 ? (recon - l.matrix).norm() / l.matrix.norm()
                                                : recon.norm();

  const fs::path dir = output_dir(cfg);
  for (std::size_t j = 0; j < slices.size(); ++j) {
    io::write_text(dir / ("slice_" + std::to_string(j + 1) + ".csv"), io::matrix_csv(slices[j]));
  }
  io::write_text(dir / "report.csv", report);
  io::write_text(dir / "reconstruction.csv",
                 "grid_points,relative_frobenius_error\n400," + io::format_double(recon_err) + "\n");
  write_run_manifest(dir, cfg, "transform");
  std::cout << report << "reconstruction relative error: " << io::format_double(recon_err) << "\n";
  return 0;
}

int cmd_train(const CommonFlags& flags) {
  const RunConfig cfg = resolve(flags);
  const Dataset d = load_configured_dataset(cfg);
  const std::vector<GraphSpectrum> spectra = prepare_spectra(d, cfg.spectral(), cfg.workers);
  std::vector<const GraphSpectrum*> inputs;
  std::vector<int> labels;
  for (std::size_t i = 0; i < d.size(); ++i) {
    inputs.push_back(&spectra[i]);
    labels.push_back(d.samples[i].label);
  }
  const Kernel kernel = cfg.kernel();
  const TrainResult tr =
      train(inputs, labels, d.n_classes, kernel, cfg.train_config(), cfg.model_spec());
  const MetricsReport m = evaluate(tr.params, kernel, inputs, labels);

  const fs::path dir = output_dir(cfg);
  io::save_params(dir / "params.json", tr.params);
  io::write_text(dir / "history.csv", io::history_csv(tr.history, cfg.scale_count));
  io::write_text(dir / "metrics.json", io::metrics_to_json(m).dump(2) + "\n");
  io::write_text(dir / "metrics.csv", io::metrics_csv_header() + io::metrics_csv_row("train", m));
  write_run_manifest(dir, cfg, "train");
  std::cout << "training accuracy " << m.accuracy << "\n";
  return 0;
}

int cmd_cv(const CommonFlags& flags) {
  const RunConfig cfg = resolve(flags);
  const Dataset d = load_configured_dataset(cfg);
  const std::vector<GraphSpectrum> spectra = prepare_spectra(d, cfg.spectral(), cfg.workers);
  const CvResult r = cross_validate(d, spectra, cfg.kernel(), cfg.train_config(), cfg.model_spec(),
                                    cfg.folds, cfg.seed, cfg.workers);

  const fs::path dir = output_dir(cfg);
  std::string csv = io::metrics_csv_header();
  for (std::size_t f = 0; f < r.folds.size(); ++f) {
    const std::string tag = std::to_string(f + 1);
    csv += io::metrics_csv_row(tag, r.folds[f].metrics);
    io::write_text(dir / ("history_fold" + tag + ".csv"),
                   io::history_csv(r.folds[f].history, cfg.scale_count));
    io::save_params(dir / ("params_fold" + tag + ".json"), r.folds[f].params);
  }
  io::write_text(dir / "metrics.csv", csv);
  io::write_text(dir / "metrics.json", io::cv_to_json(r).dump(2) + "\n");
  write_run_manifest(dir, cfg, "cv");
  std::cout << "mean accuracy " << r.accuracy.mean << " (std " << r.accuracy.std
            << "), majority baseline " << r.majority_baseline << "\n";
  return 0;
}

int cmd_saliency(const CommonFlags& flags, const std::string& params_path, std::size_t k,
                 const std::string& names_path) {
  const RunConfig cfg = resolve(flags);
  const ModelParams params = io::load_params(params_path);
  const SaliencyMatrix s = edge_saliency(params);
  const std::vector<RankedEdge> top = top_k_edges(s, k);
  std::optional<std::map<Eigen::Index, std::string>> names;
  if (!names_path.empty()) names = io::read_name_lookup(names_path);

  const fs::path dir = output_dir(cfg);
  io::write_text(dir / "saliency.csv", io::matrix_csv(s.matrix));
  io::write_text(dir / "top_k.csv", io::top_k_csv(top, names ? &*names : nullptr));
  std::string profile = "scale_index,scale,mass\n";
  for (std::size_t j = 0; j < s.scale_profile.size(); ++j) {
    profile += std::to_string(j + 1) + "," + io::format_double(params.scales[j]) + "," +
               io::format_double(s.scale_profile[j]) + "\n";
  }
  io::write_text(dir / "scale_profile.csv", profile);
  std::cout << io::top_k_csv(top, names ? &*names : nullptr);
  return 0;
}

int cmd_synth(const CommonFlags& flags) {
  const RunConfig cfg = resolve(flags);
  SyntheticSpec spec;
  spec.n = cfg.synth_n;
  spec.sigma = cfg.synth_sigma;
  spec.counts = cfg.synth_counts;
  spec.seed = cfg.seed;
  if (!cfg.synth_templates.empty()) {
    for (const std::string& path : cfg.synth_templates) {
      spec.templates.push_back(AdjacencyMatrix(read_matrix_file(path)).weights());
    }
  } else {
    if (cfg.synth_counts.size() != 2) {
      throw ConfigError("generated templates support exactly two classes; list synth.templates "
                        "for other class counts");
    }
    spec.templates =
        make_separated_templates(cfg.synth_n, cfg.synth_separation, cfg.synth_density, cfg.seed);
  }
  const Dataset d = generate_synthetic(spec);
  const fs::path dir = output_dir(cfg);
  write_dataset(d, dir);
  for (std::size_t c = 0; c < spec.templates.size(); ++c) {
    write_matrix_file(dir / ("template" + std::to_string(c) + ".csv"), spec.templates[c]);
  }
  write_run_manifest(dir, cfg, "synth");
  std::cout << "wrote " << d.size() << " graphs to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mgnn: multi-resolution spectral graph classifier"};
  app.require_subcommand(1);
  CommonFlags flags;
  auto add_common = [&flags](CLI::App* sub) {
    sub->add_option("--config", flags.config_path, "Config file (section.key = value lines)");
    sub->add_option("--seed", flags.seed, "Master seed (overrides run.seed)");
    sub->add_option("--out", flags.out, "Output directory (overrides output.dir)");
    sub->add_option("--workers", flags.workers, "Worker threads (default 1, fully deterministic)");
    sub->add_option("--set", flags.overrides, "Override any config key: --set train.epochs=50");
  };

  auto* inspect = app.add_subcommand("inspect", "Print the resolved configuration");
  add_common(inspect);

  std::string graph;
  std::vector<double> scales;
  auto* transform = app.add_subcommand("transform", "Write L_s slices and a reconstruction report");
  add_common(transform);
  transform->add_option("--graph", graph, "Adjacency matrix file")->required();
  transform->add_option("--scales", scales, "Comma-separated scales")->delimiter(',')->required();

  auto* train_cmd = app.add_subcommand("train", "Train on the whole dataset");
  add_common(train_cmd);
  auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  add_common(cv);

  std::string params_path;
  std::string names_path;
  std::size_t top_k = 10;
  auto* saliency = app.add_subcommand("saliency", "Edge saliency from a parameter snapshot");
  add_common(saliency);
  saliency->add_option("--params", params_path, "Parameter snapshot (params*.json)")->required();
  saliency->add_option("--top-k", top_k, "Number of ranked edges to export");
  saliency->add_option("--names", names_path, "Optional index,name lookup for display");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled graph population");
  add_common(synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (inspect->parsed()) return cmd_inspect(flags);
    if (transform->parsed()) return cmd_transform(flags, graph, scales);
    if (train_cmd->parsed()) return cmd_train(flags);
    if (cv->parsed()) return cmd_cv(flags);
    if (saliency->parsed()) return cmd_saliency(flags, params_path, top_k, names_path);
    if (synth->parsed()) return cmd_synth(flags);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
