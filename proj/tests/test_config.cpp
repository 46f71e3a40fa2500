// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "splitnn/config.hpp"

using namespace splitnn;
using Catch::Matchers::ContainsSubstring;

namespace {

const char* kVanilla = R"(
# two clients training a small dense network
[run]
method = splitnn
topology = vanilla
epochs = 3
batch = 16
lr = 0.1
seed = 42
output_dir = runs/demo

[data]
source = synthetic
samples = 128
dims = 8
classes = 4
data_seed = 5
partition = equal
clients = 2

[model]
input = 8
layers = dense(8,32) relu dense(32,16) relu dense(16,4) softmax_ce(4)
cuts = 2
)";

bool mentions(const std::vector<std::string>& msgs, const std::string& needle) {
  return std::any_of(msgs.begin(), msgs.end(), [&](const std::string& m) {
    return m.find(needle) != std::string::npos;
  });
}

}  // namespace

TEST_CASE("a full split config parses into typed fields") {
  ExperimentConfig cfg = parse_experiment_config(kVanilla);
  CHECK(cfg.method == Method::SplitNN);
  CHECK(cfg.topology == Topology::Vanilla);
  CHECK(cfg.options.epochs == 3);
  CHECK(cfg.options.batch == 16);
  CHECK(cfg.options.lr == 0.1f);
  CHECK(cfg.options.seed == 42);
  CHECK(cfg.output_dir == "runs/demo");
  CHECK(cfg.source.kind == SourceKind::Synthetic);
  CHECK(cfg.source.n == 128);
  CHECK(cfg.source.dims == 8);
  CHECK(cfg.source.classes == 4);
  CHECK(cfg.source.seed == 5);
  CHECK(cfg.partition.kind == PartitionKind::HorizontalEqual);
  CHECK(cfg.partition.num_clients == 2);
  CHECK(cfg.input_shape == Shape{8});
  REQUIRE(cfg.network.size() == 6);
  CHECK(cfg.network[0].kind == LayerKind::Dense);
  CHECK(cfg.network[0].in_dim == 8);
  CHECK(cfg.network[0].out_dim == 32);
  CHECK(cfg.network[5].kind == LayerKind::SoftmaxCrossEntropy);
  CHECK(cfg.cuts == std::vector<std::size_t>{2});
  CHECK(cfg.transport == TransportKind::InProcess);
  // defaults hold where the file is silent
  CHECK(cfg.options.sync == WeightSyncMode::ServerMediated);
  CHECK(cfg.options.batches_per_turn == 1);
  CHECK(cfg.options.eval_each_epoch);

  CHECK(validate_experiment_config(cfg).empty());
}

TEST_CASE("layer grammar covers every factory and rejects junk") {
  auto net = parse_layer_list(
      "conv2d(1,8,3,3) relu maxpool2d(2) conv2d(8,16,3,3,2) flatten dense(144,10,nobias) "
      "softmax_ce(10)");
  REQUIRE(net.size() == 7);
  CHECK(net[0].kind == LayerKind::Conv2D);
  CHECK(net[0].stride == 1);
  CHECK(net[2].kind == LayerKind::MaxPool2D);
  CHECK(net[2].window == 2);
  CHECK(net[2].stride == 2);  // stride defaults to the window
  CHECK(net[3].stride == 2);
  CHECK(net[5].kind == LayerKind::Dense);
  CHECK_FALSE(net[5].has_bias);

  CHECK(parse_layer_token("concat").kind == LayerKind::Concat);

  CHECK_THROWS_WITH(parse_layer_token("dense(8)"), ContainsSubstring("number of arguments"));
  CHECK_THROWS_WITH(parse_layer_token("dense(8,4,extra)"), ContainsSubstring("nobias"));
  CHECK_THROWS_WITH(parse_layer_token("dense(8,x)"), ContainsSubstring("expected a number"));
  CHECK_THROWS_WITH(parse_layer_token("dense(8,4"), ContainsSubstring("missing ')'"));
  CHECK_THROWS_WITH(parse_layer_token("batchnorm"), ContainsSubstring("unknown layer"));
  CHECK_THROWS_AS(parse_layer_list("   "), ConfigError);

  // signatures render back to the same tokens
  CHECK(network_signature(net) ==
        "conv2d(1,8,3,3) relu maxpool2d(2) conv2d(8,16,3,3,2) flatten dense(144,10,nobias) "
        "softmax_ce(10)");
}

TEST_CASE("head lists split on the pipe separator") {
  auto heads = parse_head_lists(
      "dense(16,8) relu dense(8,4) softmax_ce(4) | dense(16,3) softmax_ce(3)");
  REQUIRE(heads.size() == 2);
  CHECK(heads[0].size() == 4);
  CHECK(heads[1].size() == 2);
  CHECK(heads[1][1].num_classes == 3);
}

TEST_CASE("ini reader reports syntax problems with line numbers") {
  CHECK_THROWS_WITH(parse_experiment_config("[run\nmethod = splitnn\n"),
                    ContainsSubstring("line 1"));
  CHECK_THROWS_WITH(parse_experiment_config("method = splitnn\n"),
                    ContainsSubstring("outside of any [section]"));
  CHECK_THROWS_WITH(parse_experiment_config("[run]\nmethod splitnn\n"),
                    ContainsSubstring("expected key = value"));
  CHECK_THROWS_WITH(parse_experiment_config("[run]\nmethod = splitnn\nmethod = federated\n"),
                    ContainsSubstring("duplicate key"));
  CHECK_THROWS_WITH(parse_experiment_config("[run]\nmethod = splitnn\nbatch = ten\n"
                                            "[model]\nlayers = relu\n"),
                    ContainsSubstring("unsigned integer"));
  CHECK_THROWS_WITH(parse_experiment_config(std::string(kVanilla) + "\n[run2]\nwat = 1\n"),
                    ContainsSubstring("unknown key 'run2.wat'"));
  CHECK_THROWS_WITH(parse_experiment_config("[run]\nmethod = dance\n"),
                    ContainsSubstring("unknown method"));
}

TEST_CASE("validation lists every violation at once") {
  ExperimentConfig cfg = parse_experiment_config(kVanilla);
  cfg.options.batch = 0;
  cfg.options.epochs = 0;
  cfg.options.lr = -1.0f;
  cfg.output_dir.clear();
  auto bad = validate_experiment_config(cfg);
  CHECK(bad.size() == 4);
  CHECK(mentions(bad, "run.batch"));
  CHECK(mentions(bad, "run.epochs"));
  CHECK(mentions(bad, "run.lr"));
  CHECK(mentions(bad, "run.output_dir"));
}

TEST_CASE("vertical partitioning pairs only with vertically partitioned topologies") {
  ExperimentConfig cfg = parse_experiment_config(kVanilla);

  SECTION("vanilla + vertical partition is refused") {
    cfg.partition.kind = PartitionKind::VerticalColumns;
    cfg.partition.feature_widths = {4, 4};
    auto bad = validate_experiment_config(cfg);
    REQUIRE_FALSE(bad.empty());
    CHECK(mentions(bad, "vertically partitioned topology"));
  }
  SECTION("vertical topology requires the vertical partition") {
    cfg.topology = Topology::Vertical;
    auto bad = validate_experiment_config(cfg);
    CHECK(mentions(bad, "requires data.partition = vertical"));
  }
  SECTION("a consistent vertical config validates clean") {
    const char* text = R"(
[run]
method = splitnn
topology = vertical
epochs = 2
batch = 8

[data]
source = synthetic
samples = 64
dims = 10
classes = 3
partition = vertical
clients = 2
feature_widths = 4,6

[model]
input = 10
layers = dense(10,8) relu concat dense(16,8) relu dense(8,3) softmax_ce(3)
cuts = 2
)";
    auto vcfg = parse_experiment_config(text);
    auto bad = validate_experiment_config(vcfg);
    CAPTURE(bad);
    CHECK(bad.empty());
  }
  SECTION("widths must cover every client and sum to the feature count") {
    cfg.topology = Topology::Vertical;
    cfg.partition.kind = PartitionKind::VerticalColumns;
    cfg.partition.feature_widths = {4, 3};  // dims = 8
    auto bad = validate_experiment_config(cfg);
    CHECK(mentions(bad, "sum to 7"));
  }
}

TEST_CASE("baseline configs refuse split-only keys") {
  std::string text(kVanilla);
  auto pos = text.find("method = splitnn");
  text.replace(pos, 16, "method = federated");
  ExperimentConfig cfg = parse_experiment_config(text);
  auto bad = validate_experiment_config(cfg);
  CHECK(mentions(bad, "run.topology is only meaningful"));
  CHECK(mentions(bad, "model.cuts is only meaningful"));

  SECTION("clean baseline config passes and dry-builds the chain") {
    const char* fed = R"(
[run]
method = federated
epochs = 2
batch = 8
local_epochs = 2

[data]
source = synthetic
samples = 64
dims = 8
classes = 4
clients = 3

[model]
input = 8
layers = dense(8,16) relu dense(16,4) softmax_ce(4)
)";
    auto fcfg = parse_experiment_config(fed);
    auto fbad = validate_experiment_config(fcfg);
    CAPTURE(fbad);
    CHECK(fbad.empty());
  }
  SECTION("baseline without a loss tail is caught by the dry build") {
    const char* fed = R"(
[run]
method = largebatch

[data]
source = synthetic
samples = 64
dims = 8
classes = 4
clients = 2

[model]
input = 8
layers = dense(8,16) relu
)";
    auto fcfg = parse_experiment_config(fed);
    CHECK(mentions(validate_experiment_config(fcfg), "loss layer"));
  }
}

TEST_CASE("structural plan errors surface through validation") {
  ExperimentConfig cfg = parse_experiment_config(kVanilla);
  SECTION("cut out of range") {
    cfg.cuts = {99};
    CHECK_FALSE(validate_experiment_config(cfg).empty());
  }
  SECTION("multi_task without heads") {
    cfg.topology = Topology::MultiTask;
    cfg.partition.kind = PartitionKind::VerticalColumns;
    cfg.partition.feature_widths = {4, 4};
    auto bad = validate_experiment_config(cfg);
    CHECK(mentions(bad, "model.heads"));
  }
  SECTION("heads on a non-multi-task topology") {
    cfg.heads_given = true;
    cfg.heads = {{dense(4, 2), softmax_ce(2)}};
    auto bad = validate_experiment_config(cfg);
    CHECK(mentions(bad, "only meaningful for topology = multi_task"));
  }
}

TEST_CASE("dataset and network signatures are canonical strings") {
  ExperimentConfig cfg = parse_experiment_config(kVanilla);
  CHECK(dataset_signature(cfg) ==
        "synthetic(n=128,dims=8,classes=4,seed=5)/equal(clients=2)");
  CHECK(config_network_signature(cfg) ==
        "dense(8,32) relu dense(32,16) relu dense(16,4) softmax_ce(4)");

  cfg.partition.kind = PartitionKind::HorizontalDirichlet;
  cfg.partition.alpha = 0.5;
  CHECK_THAT(dataset_signature(cfg), ContainsSubstring("dirichlet(clients=2,alpha=0.5)"));

  cfg.heads = {{dense(16, 3), softmax_ce(3)}};
  CHECK_THAT(config_network_signature(cfg), ContainsSubstring("| dense(16,3) softmax_ce(3)"));
}

TEST_CASE("multi_task config round-trips through parse and validate") {
  const char* text = R"(
[run]
method = splitnn
topology = multi_task
epochs = 2
batch = 8
merge = mean

[data]
source = synthetic
samples = 48
dims = 10
classes = 4
partition = vertical
clients = 2
feature_widths = 4,6

[model]
input = 10
layers = dense(10,8) relu concat
cuts = 2
heads = dense(16,8) relu dense(8,4) softmax_ce(4) | dense(16,3) softmax_ce(3)

[transport]
kind = tcp
)";
  auto cfg = parse_experiment_config(text);
  CHECK(cfg.options.merge_mean);
  CHECK(cfg.transport == TransportKind::Tcp);
  REQUIRE(cfg.heads.size() == 2);
  auto bad = validate_experiment_config(cfg);
  CAPTURE(bad);
  CHECK(bad.empty());
}
