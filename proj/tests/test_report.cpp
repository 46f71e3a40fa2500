// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "splitnn/run.hpp"

using namespace splitnn;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("splitnn_report_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// One shared dataset/network, three methods.
ExperimentConfig base_config(const fs::path& out, Method m) {
  std::string text = R"(
[run]
method = splitnn
topology = vanilla
epochs = 3
batch = 16
lr = 0.1
seed = 7

[data]
source = synthetic
samples = 96
dims = 8
classes = 4
data_seed = 3
clients = 2

[model]
input = 8
layers = dense(8,32) relu dense(32,16) relu dense(16,4) softmax_ce(4)
cuts = 2
)";
  ExperimentConfig cfg = parse_experiment_config(text);
  cfg.output_dir = out.string();
  if (m != Method::SplitNN) {
    cfg.method = m;
    cfg.topology_given = false;
    cfg.cuts_given = false;
    cfg.cuts.clear();
  }
  return cfg;
}

}  // namespace

TEST_CASE("curves carry one point per eval row with monotone client flops") {
  TempDir dir("curves");
  run_experiment(base_config(dir.path, Method::SplitNN));
  run_experiment(base_config(dir.path, Method::Federated));

  auto runs = load_runs(dir.path);
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].id == "prev.1.metrics.csv");
  CHECK(runs[1].id == "metrics.csv");

  auto pts = curves(runs);
  // 3 epochs => 3 eval points per run
  REQUIRE(pts.size() == 6);
  int split_pts = 0, fed_pts = 0;
  for (const auto& p : pts) {
    if (p.method == "split:vanilla") ++split_pts;
    if (p.method == "federated") ++fed_pts;
  }
  CHECK(split_pts == 3);
  CHECK(fed_pts == 3);

  SECTION("csv round-trips losslessly") {
    std::string csv = curves_to_csv(pts);
    auto back = parse_curves_csv(csv);
    REQUIRE(back.size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(back[i] == pts[i]);
  }

  SECTION("splitnn points sit strictly left of federated points, epoch by epoch") {
    std::vector<double> split_x, fed_x;
    for (const auto& p : pts) {
      if (p.method == "split:vanilla") split_x.push_back(p.client_flops);
      if (p.method == "federated") fed_x.push_back(p.client_flops);
    }
    REQUIRE(split_x.size() == fed_x.size());
    for (std::size_t i = 0; i < split_x.size(); ++i) CHECK(split_x[i] < fed_x[i]);
    // whole x-range comparison: the last split point is left of the first
    // federated point for this cut
    CHECK(split_x.back() < fed_x.front());
  }
}

TEST_CASE("comparison table values equal final ledger counters exactly") {
  TempDir dir("table");
  RunOutcome split = run_experiment(base_config(dir.path, Method::SplitNN));
  RunOutcome fed = run_experiment(base_config(dir.path, Method::Federated));

  auto runs = load_runs(dir.path);
  ComparisonTable table = comparison_for(runs);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].method == "split:vanilla");
  CHECK(table.rows[1].method == "federated");

  auto expect_tflops = [](const RunOutcome& out) {
    const MetricsRow& last = out.metrics.rows.back();
    double flops = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < out.metrics.roles.size(); ++i) {
      if (out.metrics.roles[i].rfind("client_", 0) != 0) continue;
      flops += double(last.counters[i].flops_fwd) + double(last.counters[i].flops_bwd);
      ++n;
    }
    return flops / n / 1e12;
  };
  CHECK(table.rows[0].client_tflops == expect_tflops(split));
  CHECK(table.rows[1].client_tflops == expect_tflops(fed));
  CHECK(table.rows[0].client_tflops < table.rows[1].client_tflops);
  CHECK_THAT(table.text, ContainsSubstring("reference figures"));
}

TEST_CASE("incompatible runs are refused with the offending run named") {
  TempDir dir("mismatch");
  run_experiment(base_config(dir.path, Method::SplitNN));
  ExperimentConfig other = base_config(dir.path, Method::Federated);
  other.options.epochs = 5;
  run_experiment(other);

  auto runs = load_runs(dir.path);
  CHECK_THROWS_WITH(curves(runs), ContainsSubstring("different epoch counts"));
  CHECK_THROWS_WITH(comparison_for(runs), ContainsSubstring("different epoch counts"));

  SECTION("different dataset") {
    auto r2 = runs;
    r2[1].meta.dataset = "something_else";
    CHECK_THROWS_WITH(curves(r2), ContainsSubstring("different datasets"));
  }
  SECTION("different network") {
    auto r2 = runs;
    r2[1].meta.network = "dense(8,4) softmax_ce(4)";
    CHECK_THROWS_WITH(curves(r2), ContainsSubstring("different networks"));
  }
}

TEST_CASE("write_comparison emits curves.csv and summary.txt for a directory") {
  TempDir dir("drive");
  run_experiment(base_config(dir.path, Method::SplitNN));
  run_experiment(base_config(dir.path, Method::LargeBatch));

  std::string text = write_comparison(dir.path);
  CHECK(fs::exists(dir.path / "curves.csv"));
  CHECK(fs::exists(dir.path / "summary.txt"));
  CHECK(read_text_file(dir.path / "summary.txt") == text);
  CHECK_THAT(text, ContainsSubstring("split:vanilla"));
  CHECK_THAT(text, ContainsSubstring("largebatch"));
  CHECK_THAT(text, ContainsSubstring("best accuracy"));

  auto pts = parse_curves_csv(read_text_file(dir.path / "curves.csv"));
  CHECK(pts.size() == 6);

  SECTION("single run still yields a valid single curve") {
    TempDir solo("solo");
    run_experiment(base_config(solo.path, Method::SplitNN));
    std::string single = write_comparison(solo.path);
    auto sp = parse_curves_csv(read_text_file(solo.path / "curves.csv"));
    CHECK(sp.size() == 3);
    CHECK_THAT(single, ContainsSubstring("1 run"));
  }

  SECTION("artifact pairs must be complete") {
    fs::remove(dir.path / "run.meta");
    CHECK_THROWS_WITH(load_runs(dir.path), ContainsSubstring("without its partner"));
  }

  SECTION("empty directory is refused") {
    TempDir empty("empty");
    CHECK_THROWS_WITH(write_comparison(empty.path), ContainsSubstring("no runs found"));
  }
}
