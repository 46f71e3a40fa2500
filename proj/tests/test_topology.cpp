// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "splitnn/topology.hpp"

using namespace splitnn;

namespace {

std::vector<LayerSpec> mlp4() {
  return {dense(8, 16), relu(), dense(16, 3), softmax_ce(3)};
}

std::vector<LayerSpec> mlp5() {
  return {dense(8, 16), relu(), dense(16, 8), dense(8, 3), softmax_ce(3)};
}

}  // namespace

TEST_CASE("vanilla plan splits a chain at one cut") {
  auto net = auto_name_layers(mlp4());
  auto plan = build_plan(Topology::Vanilla, net, {2}, 3, {8});
  REQUIRE(plan.segments.size() == 2);
  REQUIRE(plan.segments[0].id == "front");
  REQUIRE(plan.segments[0].owner == "client");
  REQUIRE(plan.segments[0].layers.size() == 2);
  REQUIRE(plan.segments[1].owner == "server");
  REQUIRE(plan.label_holder == "server");
  REQUIRE(plan.num_clients == 3);
  REQUIRE(plan.num_classes == 3);
  REQUIRE(validate_plan(plan).empty());
  REQUIRE(monolithic_equivalent(plan) == std::vector<std::vector<LayerSpec>>{net});
  auto mono = monolithic_graph(plan);
  REQUIRE(mono.branches.empty());
  REQUIRE(mono.heads.size() == 1);
  REQUIRE(mono.heads[0] == net);
}

TEST_CASE("u_shaped plan keeps first and last segments at the client") {
  auto net = auto_name_layers(mlp5());
  auto plan = build_plan(Topology::UShaped, net, {2, 4}, 2, {8});
  REQUIRE(plan.segments.size() == 3);
  REQUIRE(plan.segments[0].owner == "client");
  REQUIRE(plan.segments[1].owner == "server");
  REQUIRE(plan.segments[2].owner == "client");
  REQUIRE(plan.label_holder == "client");
  REQUIRE(validate_plan(plan).empty());
  REQUIRE(monolithic_equivalent(plan)[0] == net);
}

TEST_CASE("extended_vanilla inserts a compute-only relay") {
  auto net = auto_name_layers(mlp5());
  auto plan = build_plan(Topology::ExtendedVanilla, net, {2, 4}, 2, {8});
  REQUIRE(plan.roles.size() == 3);
  REQUIRE(plan.find_role("relay") != nullptr);
  REQUIRE(plan.find_role("relay")->kind == RoleKind::Client);
  REQUIRE(plan.segments[1].owner == "relay");
  REQUIRE(plan.label_holder == "server");
  REQUIRE(monolithic_equivalent(plan)[0] == net);
}

TEST_CASE("multi_hop chains one segment per client") {
  auto net = auto_name_layers(mlp5());
  auto plan = build_plan(Topology::MultiHop, net, {1, 2, 3}, 3, {8});
  REQUIRE(plan.segments.size() == 4);
  REQUIRE(plan.segments[0].owner == "client_0");
  REQUIRE(plan.segments[2].owner == "client_2");
  REQUIRE(plan.segments[3].owner == "server");
  REQUIRE(plan.edges.size() == 3);
  REQUIRE(plan.edges[0].from == "hop_0");
  REQUIRE(plan.edges[2].to == "back");
  REQUIRE(monolithic_equivalent(plan)[0] == net);
}

TEST_CASE("vertical plan instantiates branches per feature width") {
  // two parties with 4 and 6 features, both encode to width 8, joined to 16
  std::vector<LayerSpec> net = {dense(10, 8), concat({}), dense(16, 2), softmax_ce(2)};
  PlanExtras ex;
  ex.feature_widths = {4, 6};
  auto plan = build_plan(Topology::Vertical, net, {1}, 2, {10}, ex);
  REQUIRE(plan.segments.size() == 3);
  REQUIRE(plan.segments[0].layers[0].in_dim == 4);
  REQUIRE(plan.segments[1].layers[0].in_dim == 6);
  REQUIRE(plan.segments[0].layers[0].out_dim == 8);
  const Segment& back = plan.segments[2];
  REQUIRE(back.owner == "server");
  REQUIRE(back.layers[0].kind == LayerKind::Concat);
  REQUIRE(back.layers[0].input_widths == std::vector<std::uint32_t>{8, 8});
  REQUIRE(plan.label_holder == "server");
  REQUIRE(validate_plan(plan).empty());

  auto mono = monolithic_graph(plan);
  REQUIRE(mono.branches.size() == 2);
  REQUIRE(mono.junction.kind == LayerKind::Concat);
  REQUIRE(mono.heads.size() == 1);
  REQUIRE(mono.heads[0].size() == 2);  // dense + loss

  auto flat = monolithic_equivalent(plan)[0];
  REQUIRE(flat.size() == 2 + 3);  // 2 branches of 1 layer + concat,dense,loss
}

TEST_CASE("multi_task plan fans a shared concat into task heads") {
  std::vector<LayerSpec> net = {dense(8, 4), concat({})};
  PlanExtras ex;
  ex.feature_widths = {3, 5};
  ex.heads = {{dense(8, 16), relu(), dense(16, 3), softmax_ce(3)}, {dense(8, 2), softmax_ce(2)}};
  auto plan = build_plan(Topology::MultiTask, net, {1}, 2, {8}, ex);
  REQUIRE(plan.task_heads.size() == 2);
  REQUIRE(plan.find_role("coord")->kind == RoleKind::Coordinator);
  REQUIRE(plan.find_role("server_0")->kind == RoleKind::Server);
  REQUIRE(plan.label_holder.empty());
  REQUIRE(plan.find_segment("trunk")->layers[0].input_widths ==
          std::vector<std::uint32_t>{4, 4});
  REQUIRE(validate_plan(plan).empty());

  auto nets = monolithic_equivalent(plan);
  REQUIRE(nets.size() == 2);
  // both nets share the trunk prefix
  REQUIRE(std::vector<LayerSpec>(nets[0].begin(), nets[0].begin() + 3) ==
          std::vector<LayerSpec>(nets[1].begin(), nets[1].begin() + 3));
  REQUIRE(nets[0].back().num_classes == 3);
  REQUIRE(nets[1].back().num_classes == 2);
  REQUIRE(plan.num_classes == 3);  // first head's classes

  auto mono = monolithic_graph(plan);
  REQUIRE(mono.branches.size() == 2);
  REQUIRE(mono.heads.size() == 2);
}

TEST_CASE("layer names are unique after building") {
  auto plan = build_plan(Topology::Vanilla, mlp4(), {2}, 1, {8});
  std::set<std::string> names;
  for (const auto& seg : plan.segments)
    for (const auto& l : seg.layers) {
      REQUIRE(!l.name.empty());
      REQUIRE(names.insert(l.name).second);
    }
}

TEST_CASE("bad cut points are rejected") {
  REQUIRE_THROWS_AS(build_plan(Topology::Vanilla, mlp4(), {}, 1, {8}), PlanError);
  REQUIRE_THROWS_AS(build_plan(Topology::Vanilla, mlp4(), {0}, 1, {8}), PlanError);
  REQUIRE_THROWS_AS(build_plan(Topology::Vanilla, mlp4(), {4}, 1, {8}), PlanError);
  REQUIRE_THROWS_AS(build_plan(Topology::UShaped, mlp5(), {3, 3}, 1, {8}), PlanError);
  REQUIRE_THROWS_AS(build_plan(Topology::UShaped, mlp5(), {4, 2}, 1, {8}), PlanError);
  REQUIRE_THROWS_AS(build_plan(Topology::MultiHop, mlp5(), {1, 2}, 3, {8}), PlanError);
}

TEST_CASE("chain networks must end with the loss") {
  std::vector<LayerSpec> headless = {dense(8, 4), relu()};
  REQUIRE_THROWS_AS(build_plan(Topology::Vanilla, headless, {1}, 1, {8}), PlanError);
  std::vector<LayerSpec> early_loss = {dense(8, 4), softmax_ce(4), relu(), softmax_ce(4)};
  REQUIRE_THROWS_AS(build_plan(Topology::Vanilla, early_loss, {1}, 1, {8}), PlanError);
}

TEST_CASE("vertical plans validate their extras") {
  std::vector<LayerSpec> net = {dense(10, 8), concat({}), dense(16, 2), softmax_ce(2)};
  PlanExtras ok;
  ok.feature_widths = {4, 6};
  // cut not on the concat
  REQUIRE_THROWS_AS(build_plan(Topology::Vertical, net, {2}, 2, {10}, ok), PlanError);
  // widths do not sum to the feature count
  PlanExtras bad = ok;
  bad.feature_widths = {4, 4};
  REQUIRE_THROWS_AS(build_plan(Topology::Vertical, net, {1}, 2, {10}, bad), PlanError);
  // width count vs clients
  REQUIRE_THROWS_AS(build_plan(Topology::Vertical, net, {1}, 3, {10}, ok), PlanError);
  // single party is not a vertical split
  PlanExtras one;
  one.feature_widths = {10};
  REQUIRE_THROWS_AS(build_plan(Topology::Vertical, net, {1}, 1, {10}, one), PlanError);
  // branch template must start with a dense layer
  std::vector<LayerSpec> raw = {relu(), concat({}), dense(10, 2), softmax_ce(2)};
  REQUIRE_THROWS_AS(build_plan(Topology::Vertical, raw, {1}, 2, {10}, ok), PlanError);
}

TEST_CASE("multi_task requires at least two heads") {
  std::vector<LayerSpec> net = {dense(8, 4), concat({})};
  PlanExtras ex;
  ex.feature_widths = {3, 5};
  ex.heads = {{dense(8, 2), softmax_ce(2)}};
  REQUIRE_THROWS_AS(build_plan(Topology::MultiTask, net, {1}, 2, {8}, ex), PlanError);
}

TEST_CASE("validate_plan collects every violation on a tampered plan") {
  std::vector<LayerSpec> net = {dense(10, 8), concat({}), dense(16, 2), softmax_ce(2)};
  PlanExtras ex;
  ex.feature_widths = {4, 6};
  auto plan = build_plan(Topology::Vertical, net, {1}, 2, {10}, ex);

  // concat arity no longer matches the two client branches
  plan.segments[2].layers[0].input_widths = {8, 8, 8};
  auto v1 = validate_plan(plan);
  REQUIRE(!v1.empty());
  bool names_concat = false;
  for (const auto& m : v1) names_concat |= m.find("concat") != std::string::npos;
  REQUIRE(names_concat);

  // several independent violations are all reported
  plan.roles.push_back(plan.roles[0]);      // duplicate role id
  plan.segments[0].layers.clear();          // empty segment
  REQUIRE(validate_plan(plan).size() >= 3);
}

TEST_CASE("u_shaped labels must stay at the client") {
  auto plan = build_plan(Topology::UShaped, mlp5(), {2, 4}, 1, {8});
  plan.label_holder = "server";
  auto v = validate_plan(plan);
  bool mentions_labels = false;
  for (const auto& m : v) mentions_labels |= m.find("labels") != std::string::npos;
  REQUIRE(mentions_labels);
}

TEST_CASE("topology names round-trip through the parser") {
  for (Topology t : {Topology::Vanilla, Topology::UShaped, Topology::Vertical,
                     Topology::ExtendedVanilla, Topology::MultiTask, Topology::MultiHop})
    REQUIRE(parse_topology(topology_name(t)) == t);
  REQUIRE_THROWS_AS(parse_topology("ring"), ConfigError);
}
