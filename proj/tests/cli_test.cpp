#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <random>

#include <sys/wait.h>
#include <unistd.h>

#include "mgnn/io.hpp"
#include "mgnn/pipeline.hpp"

using namespace mgnn;

namespace {

const fs::path kCli = MGNN_CLI_PATH;
const fs::path kSamples = MGNN_SAMPLES_DIR;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    static int counter = 0;
    dir_ = fs::temp_directory_path() /
           ("mgnn_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) const {
    const std::string cmd = kCli.string() + " " + args + " > " + (dir_ / "stdout.txt").string() +
                            " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  fs::path path(const std::string& name) const { return dir_ / name; }

  fs::path dir_;
};

std::string slurp(const fs::path& p) { return io::read_text(p); }

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_F(CliTest, TransformOfTwoNodePath) {
  ASSERT_EQ(run("transform --graph " + (kSamples / "path2.csv").string() +
                " --scales 0.5 --out " + path("t").string()),
            0);
  const Matrix s = read_matrix_file(path("t") / "slice_1.csv");
  // Single nonzero eigenvalue 2 with kernel value e^{-1}: L_s = e^{-2} [[1,-1],[-1,1]].
  const double v = std::exp(-2.0);
  EXPECT_NEAR(s(0, 0), v, 1e-9);
  EXPECT_NEAR(s(0, 1), -v, 1e-9);
  EXPECT_NEAR(s(1, 0), -v, 1e-9);
  EXPECT_NEAR(s(1, 1), v, 1e-9);
  EXPECT_TRUE(fs::exists(path("t") / "report.csv"));
  EXPECT_TRUE(fs::exists(path("t") / "run_manifest.conf"));
}

TEST_F(CliTest, ApproximateTransformReportsSmallDiscrepancy) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u;
  Matrix w = Matrix::Zero(12, 12);
  for (int j = 0; j < 12; ++j)
    for (int i = 0; i < j; ++i)
      if (u(gen) < 0.4) w(i, j) = w(j, i) = u(gen);
  write_matrix_file(path("g.csv"), w);
  ASSERT_EQ(run("transform --graph " + path("g.csv").string() +
                " --scales 0.1,1,2.5 --set transform.mode=approx --set laplacian.normalized=true"
                " --out " + path("t").string()),
            0);
  std::ifstream report(path("t") / "report.csv");
  std::string line;
  std::getline(report, line);
  int rows = 0;
  while (std::getline(report, line)) {
    const double err = std::stod(line.substr(line.rfind(',') + 1));
    EXPECT_LE(err, 1e-6) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 3);
}

TEST_F(CliTest, MissingInputFailsWithoutOutput) {
  EXPECT_EQ(run("transform --graph " + path("nope.csv").string() + " --scales 1 --out " +
                path("t").string()),
            3);
  EXPECT_FALSE(fs::exists(path("t")));
  EXPECT_NE(slurp(path("stderr.txt")).find("nope.csv"), std::string::npos);
}

TEST_F(CliTest, ConfigErrorsExitWithTwo) {
  EXPECT_EQ(run("cv --set cv.folds=1 --out " + path("cv").string()), 2);
  EXPECT_NE(slurp(path("stderr.txt")).find("cv.folds"), std::string::npos);
  EXPECT_EQ(run("train --set nonsense.key=3"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
}

TEST_F(CliTest, InspectPrintsResolvedConfig) {
  ASSERT_EQ(run("inspect --config " + (kSamples / "cv.conf").string() + " --seed 42"), 0);
  const std::string out = slurp(path("stdout.txt"));
  EXPECT_NE(out.find("run.seed = 42"), std::string::npos) << out;
  EXPECT_NE(out.find("model.widths = 64,32"), std::string::npos) << out;
}

TEST_F(CliTest, SynthIsReproducible) {
  const std::string conf = "--config " + (kSamples / "synth.conf").string();
  ASSERT_EQ(run("synth " + conf + " --out " + path("a").string()), 0);
  ASSERT_EQ(run("synth " + conf + " --out " + path("b").string()), 0);
  EXPECT_EQ(count_lines(path("a") / "manifest.csv"), 120u);
  EXPECT_EQ(slurp(path("a") / "manifest.csv"), slurp(path("b") / "manifest.csv"));
  EXPECT_EQ(slurp(path("a") / "class1" / "g0042.csv"), slurp(path("b") / "class1" / "g0042.csv"));
  const Dataset d = load_dataset(path("a") / "manifest.csv");
  EXPECT_EQ(d.class_counts, (std::vector<int>{60, 60}));
  EXPECT_EQ(d.n_nodes(), 20);
}

TEST_F(CliTest, SynthWithoutNoiseReproducesTemplates) {
  ASSERT_EQ(run("synth --set synth.sigma=0 --set synth.n=6 --set synth.counts=3,3 --out " +
                path("s").string()),
            0);
  const Matrix t0 = read_matrix_file(path("s") / "template0.csv");
  const Matrix t1 = read_matrix_file(path("s") / "template1.csv");
  const Dataset d = load_dataset(path("s") / "manifest.csv");
  for (const GraphSample& s : d.samples) {
    EXPECT_EQ(s.adjacency.weights(), s.label == 0 ? t0 : t1);
  }
}

TEST_F(CliTest, CrossValidationIsByteIdenticalAndSaliencyRoundTrips) {
  ASSERT_EQ(run("synth --set synth.n=8 --set synth.counts=12,12 --seed 3 --out " +
                path("data").string()),
            0);
  const std::string cv_args = "cv --set data.manifest=" + (path("data") / "manifest.csv").string() +
                              " --set model.widths=16 --set scales.count=2 --set train.epochs=8"
                              " --set train.batch_size=8 --seed 5 --out ";
  ASSERT_EQ(run(cv_args + path("cv1").string()), 0);
  ASSERT_EQ(run(cv_args + path("cv2").string()), 0);
  for (const char* f : {"metrics.csv", "metrics.json", "history_fold1.csv", "history_fold3.csv",
                        "params_fold2.json"}) {
    EXPECT_EQ(slurp(path("cv1") / f), slurp(path("cv2") / f)) << f;
  }
  EXPECT_EQ(count_lines(path("cv1") / "history_fold1.csv"), 9u);
  EXPECT_EQ(count_lines(path("cv1") / "metrics.csv"), 4u);

  const fs::path params = path("cv1") / "params_fold1.json";
  ASSERT_EQ(run("saliency --params " + params.string() + " --top-k 10 --out " + path("sal").string()), 0);
  const Matrix written = read_matrix_file(path("sal") / "saliency.csv");
  const SaliencyMatrix recomputed = edge_saliency(io::load_params(params));
  EXPECT_LE((written - recomputed.matrix).cwiseAbs().maxCoeff(), 1e-12);

  std::ifstream top(path("sal") / "top_k.csv");
  std::string line;
  std::getline(top, line);
  EXPECT_EQ(line, "row,col,value");
  double previous = std::numeric_limits<double>::infinity();
  int rows = 0;
  while (std::getline(top, line)) {
    const double v = std::stod(line.substr(line.rfind(',') + 1));
    EXPECT_LE(v, previous);
    previous = v;
    ++rows;
  }
  EXPECT_EQ(rows, 10);

  EXPECT_EQ(run("saliency --params " + params.string() + " --top-k 29 --out " + path("big").string()), 2);
}

TEST_F(CliTest, CorruptSnapshotIsADataError) {
  io::write_text(path("bad.json"), "{\"format\": \"something-else\"}");
  EXPECT_EQ(run("saliency --params " + path("bad.json").string() + " --out " + path("o").string()), 3);
}
