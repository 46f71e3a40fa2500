// SPDX-License-Identifier: Apache-2.0
#pragma once

// Partition plans: a full network plus cut points becomes an ordered segment
// graph with role assignments, one constructor per supported topology. Plans
// are immutable after build and shared read-only by the engine, the cost
// predictor and the monolithic oracle.

#include <cstdint>
#include <string>
#include <vector>

#include "splitnn/error.hpp"
#include "splitnn/layers.hpp"

namespace splitnn {

enum class Topology : std::uint8_t {
  Vanilla,
  UShaped,
  Vertical,
  ExtendedVanilla,
  MultiTask,
  MultiHop,
};

inline const char* topology_name(Topology t) {
  switch (t) {
    case Topology::Vanilla: return "vanilla";
    case Topology::UShaped: return "u_shaped";
    case Topology::Vertical: return "vertical";
    case Topology::ExtendedVanilla: return "extended_vanilla";
    case Topology::MultiTask: return "multi_task";
    case Topology::MultiHop: return "multi_hop";
  }
  return "?";
}

inline Topology parse_topology(const std::string& s) {
  if (s == "vanilla") return Topology::Vanilla;
  if (s == "u_shaped" || s == "ushaped") return Topology::UShaped;
  if (s == "vertical") return Topology::Vertical;
  if (s == "extended_vanilla") return Topology::ExtendedVanilla;
  if (s == "multi_task" || s == "multitask") return Topology::MultiTask;
  if (s == "multi_hop" || s == "multihop") return Topology::MultiHop;
  throw ConfigError("unknown topology '" + s + "'");
}

enum class RoleKind : std::uint8_t { Client, Server, Coordinator };

inline const char* role_kind_name(RoleKind k) {
  switch (k) {
    case RoleKind::Client: return "client";
    case RoleKind::Server: return "server";
    case RoleKind::Coordinator: return "coordinator";
  }
  return "?";
}

struct Role {
  std::string id;
  RoleKind kind = RoleKind::Client;
};

struct Segment {
  std::string id;
  std::vector<LayerSpec> layers;  // non-empty, in_shape resolved by build_plan
  std::string owner;              // role id
};

// Directed activation-forward link between segments.
struct Edge {
  std::string from, to;
};

struct TaskHead {
  std::string server;   // role id
  std::string segment;  // segment id
};

struct PartitionPlan {
  Topology topology = Topology::Vanilla;
  std::vector<Role> roles;
  std::vector<Segment> segments;  // canonical forward order (weight-init order)
  std::vector<Edge> edges;
  std::string label_holder;       // role computing the loss; empty for multi_task
  std::uint32_t num_clients = 1;  // replicas (horizontal) or parties (others)
  std::vector<TaskHead> task_heads;
  Shape sample_shape;                       // full per-sample input shape
  std::vector<std::uint32_t> feature_widths;  // per-party input widths (vertical kin)
  std::uint32_t num_classes = 0;

  const Segment* find_segment(const std::string& id) const {
    for (const auto& s : segments)
      if (s.id == id) return &s;
    return nullptr;
  }
  const Role* find_role(const std::string& id) const {
    for (const auto& r : roles)
      if (r.id == id) return &r;
    return nullptr;
  }
  std::vector<const Segment*> segments_of(const std::string& role_id) const {
    std::vector<const Segment*> out;
    for (const auto& s : segments)
      if (s.owner == role_id) out.push_back(&s);
    return out;
  }
};

struct PlanExtras {
  std::vector<std::uint32_t> feature_widths;   // vertical / multi_task
  std::vector<std::vector<LayerSpec>> heads;   // multi_task, each ends with the loss
};

// Gives every unnamed layer a stable positional name so segment contents stay
// identifiable after splitting.
inline std::vector<LayerSpec> auto_name_layers(std::vector<LayerSpec> net,
                                               const std::string& prefix = "") {
  for (std::size_t i = 0; i < net.size(); ++i)
    if (net[i].name.empty())
      net[i].name = prefix + "l" + std::to_string(i) + "_" + kind_name(net[i].kind);
  return net;
}

namespace plan_detail {

inline std::vector<LayerSpec> slice(const std::vector<LayerSpec>& net, std::size_t a,
                                    std::size_t b) {
  return {net.begin() + a, net.begin() + b};
}

inline void check_cuts(const std::vector<std::size_t>& cuts, std::size_t n,
                       std::size_t expected, const char* topo) {
  if (cuts.size() != expected)
    throw PlanError(std::string(topo) + " needs " + std::to_string(expected) +
                    " cut point(s), got " + std::to_string(cuts.size()));
  std::size_t prev = 0;
  for (std::size_t c : cuts) {
    if (c <= prev || c >= n)
      throw PlanError("cut points must be strictly increasing inside (0," +
                      std::to_string(n) + ")");
    prev = c;
  }
}

inline void require_loss_tail(const std::vector<LayerSpec>& net, const char* topo) {
  if (net.empty() || net.back().kind != LayerKind::SoftmaxCrossEntropy)
    throw PlanError(std::string(topo) + " network must end with a softmax_ce loss layer");
  for (std::size_t i = 0; i + 1 < net.size(); ++i)
    if (net[i].kind == LayerKind::SoftmaxCrossEntropy)
      throw PlanError("loss layer may only appear last, found at position " +
                      std::to_string(i));
}

inline void forbid_concat(const std::vector<LayerSpec>& net, const char* topo) {
  for (const auto& l : net)
    if (l.kind == LayerKind::Concat)
      throw PlanError(std::string(topo) + " network cannot contain a concat layer");
}

// Per-party branch: copy of the template whose leading dense accepts that
// party's feature slice instead of the full feature width.
inline std::vector<LayerSpec> instantiate_branch(const std::vector<LayerSpec>& tmpl,
                                                 std::uint32_t width, std::uint32_t party) {
  if (tmpl.empty()) throw PlanError("client branch template is empty");
  if (tmpl[0].kind != LayerKind::Dense)
    throw PlanError("client branch template must start with a dense layer");
  std::vector<LayerSpec> out = tmpl;
  out[0].in_dim = width;
  for (auto& l : out) l.name = "c" + std::to_string(party) + "." + l.name;
  return out;
}

inline std::uint32_t branch_out_width(std::vector<LayerSpec> branch, std::uint32_t width) {
  Shape out = resolve_shapes(branch, {width});
  if (out.size() != 1)
    throw PlanError("client branch must end in a [batch,features] tensor, got per-sample " +
                    shape_str(out));
  return out[0];
}

}  // namespace plan_detail

inline std::vector<std::string> validate_plan(const PartitionPlan& plan);

// Splits `network` at `cuts` (layer counts: cut c puts layers [0,c) on the
// left) and assigns the segments per topology. Vertical and multi_task read
// per-party feature widths (and head chains) from `extras`; their cut must
// land exactly on the concat layer. Throws PlanError on any violation.
inline PartitionPlan build_plan(Topology topo, const std::vector<LayerSpec>& network,
                                const std::vector<std::size_t>& cuts,
                                std::uint32_t num_clients, Shape sample_shape,
                                const PlanExtras& extras = {}) {
  using namespace plan_detail;
  if (num_clients < 1) throw PlanError("need at least one client");
  std::vector<LayerSpec> net = auto_name_layers(network);
  PartitionPlan plan;
  plan.topology = topo;
  plan.num_clients = num_clients;
  plan.sample_shape = sample_shape;

  auto resolve_segment = [](Segment& seg, Shape in) {
    return resolve_shapes(seg.layers, std::move(in));
  };

  switch (topo) {
    case Topology::Vanilla: {
      check_cuts(cuts, net.size(), 1, "vanilla");
      require_loss_tail(net, "vanilla");
      forbid_concat(net, "vanilla");
      plan.roles = {{"client", RoleKind::Client}, {"server", RoleKind::Server}};
      plan.segments = {{"front", slice(net, 0, cuts[0]), "client"},
                       {"back", slice(net, cuts[0], net.size()), "server"}};
      plan.edges = {{"front", "back"}};
      plan.label_holder = "server";
      Shape mid = resolve_segment(plan.segments[0], sample_shape);
      resolve_segment(plan.segments[1], mid);
      break;
    }
    case Topology::UShaped: {
      check_cuts(cuts, net.size(), 2, "u_shaped");
      require_loss_tail(net, "u_shaped");
      forbid_concat(net, "u_shaped");
      plan.roles = {{"client", RoleKind::Client}, {"server", RoleKind::Server}};
      plan.segments = {{"front", slice(net, 0, cuts[0]), "client"},
                       {"middle", slice(net, cuts[0], cuts[1]), "server"},
                       {"tail", slice(net, cuts[1], net.size()), "client"}};
      plan.edges = {{"front", "middle"}, {"middle", "tail"}};
      plan.label_holder = "client";
      Shape s = resolve_segment(plan.segments[0], sample_shape);
      s = resolve_segment(plan.segments[1], s);
      resolve_segment(plan.segments[2], s);
      break;
    }
    case Topology::ExtendedVanilla: {
      check_cuts(cuts, net.size(), 2, "extended_vanilla");
      require_loss_tail(net, "extended_vanilla");
      forbid_concat(net, "extended_vanilla");
      plan.roles = {{"client", RoleKind::Client},
                    {"relay", RoleKind::Client},  // compute-only, holds no data
                    {"server", RoleKind::Server}};
      plan.segments = {{"front", slice(net, 0, cuts[0]), "client"},
                       {"middle", slice(net, cuts[0], cuts[1]), "relay"},
                       {"back", slice(net, cuts[1], net.size()), "server"}};
      plan.edges = {{"front", "middle"}, {"middle", "back"}};
      plan.label_holder = "server";
      Shape s = resolve_segment(plan.segments[0], sample_shape);
      s = resolve_segment(plan.segments[1], s);
      resolve_segment(plan.segments[2], s);
      break;
    }
    case Topology::MultiHop: {
      if (num_clients < 2) throw PlanError("multi_hop needs at least 2 clients");
      check_cuts(cuts, net.size(), num_clients, "multi_hop");
      require_loss_tail(net, "multi_hop");
      forbid_concat(net, "multi_hop");
      std::size_t prev = 0;
      Shape s = sample_shape;
      for (std::uint32_t i = 0; i < num_clients; ++i) {
        std::string rid = "client_" + std::to_string(i);
        plan.roles.push_back({rid, RoleKind::Client});
        plan.segments.push_back({"hop_" + std::to_string(i), slice(net, prev, cuts[i]), rid});
        s = resolve_segment(plan.segments.back(), s);
        prev = cuts[i];
      }
      plan.roles.push_back({"server", RoleKind::Server});
      plan.segments.push_back({"back", slice(net, prev, net.size()), "server"});
      resolve_segment(plan.segments.back(), s);
      for (std::size_t i = 0; i + 1 < plan.segments.size(); ++i)
        plan.edges.push_back({plan.segments[i].id, plan.segments[i + 1].id});
      plan.label_holder = "server";
      break;
    }
    case Topology::Vertical: {
      if (num_clients < 2) throw PlanError("vertical needs at least 2 clients");
      if (extras.feature_widths.size() != num_clients)
        throw PlanError("vertical needs one feature width per client, got " +
                        std::to_string(extras.feature_widths.size()) + " for " +
                        std::to_string(num_clients));
      check_cuts(cuts, net.size(), 1, "vertical");
      require_loss_tail(net, "vertical");
      std::size_t cut = cuts[0];
      if (net[cut].kind != LayerKind::Concat)
        throw PlanError("vertical cut must land on the concat layer, found " +
                        layer_label(net[cut]) + " at position " + std::to_string(cut));
      for (std::size_t i = 0; i < net.size(); ++i)
        if (net[i].kind == LayerKind::Concat && i != cut)
          throw PlanError("vertical network may contain exactly one concat");
      if (sample_shape.size() != 1)
        throw PlanError("vertical expects flat [features] samples, got " +
                        shape_str(sample_shape));
      std::uint32_t total = 0;
      for (auto w : extras.feature_widths) {
        if (w == 0) throw PlanError("feature widths must be positive");
        total += w;
      }
      if (total != sample_shape[0])
        throw PlanError("feature widths sum to " + std::to_string(total) + " but samples have " +
                        std::to_string(sample_shape[0]) + " features");
      std::vector<LayerSpec> tmpl = slice(net, 0, cut);
      if (!tmpl.empty() && tmpl[0].kind == LayerKind::Dense &&
          tmpl[0].in_dim != sample_shape[0])
        throw PlanError("branch template dense expects " + std::to_string(tmpl[0].in_dim) +
                        " features but samples have " + std::to_string(sample_shape[0]));
      std::vector<std::uint32_t> joined;
      for (std::uint32_t i = 0; i < num_clients; ++i) {
        std::string rid = "client_" + std::to_string(i);
        plan.roles.push_back({rid, RoleKind::Client});
        Segment seg{"branch_" + std::to_string(i),
                    plan_detail::instantiate_branch(tmpl, extras.feature_widths[i], i), rid};
        joined.push_back(plan_detail::branch_out_width(seg.layers, extras.feature_widths[i]));
        resolve_segment(seg, {extras.feature_widths[i]});
        plan.segments.push_back(std::move(seg));
      }
      plan.roles.push_back({"server", RoleKind::Server});
      Segment back{"back", slice(net, cut, net.size()), "server"};
      back.layers[0].input_widths = joined;  // concat arity = number of parties
      std::uint32_t joined_total = 0;
      for (auto w : joined) joined_total += w;
      resolve_segment(back, {joined_total});
      plan.segments.push_back(std::move(back));
      for (std::uint32_t i = 0; i < num_clients; ++i)
        plan.edges.push_back({"branch_" + std::to_string(i), "back"});
      plan.label_holder = "server";
      plan.feature_widths = extras.feature_widths;
      break;
    }
    case Topology::MultiTask: {
      if (num_clients < 2) throw PlanError("multi_task needs at least 2 clients");
      if (extras.feature_widths.size() != num_clients)
        throw PlanError("multi_task needs one feature width per client");
      if (extras.heads.size() < 2) throw PlanError("multi_task needs at least 2 task heads");
      check_cuts(cuts, net.size(), 1, "multi_task");
      std::size_t cut = cuts[0];
      if (cut != net.size() - 1 || net[cut].kind != LayerKind::Concat)
        throw PlanError("multi_task network must be branch template + trailing concat; cut at "
                        "the concat");
      if (sample_shape.size() != 1)
        throw PlanError("multi_task expects flat [features] samples, got " +
                        shape_str(sample_shape));
      std::uint32_t total = 0;
      for (auto w : extras.feature_widths) {
        if (w == 0) throw PlanError("feature widths must be positive");
        total += w;
      }
      if (total != sample_shape[0])
        throw PlanError("feature widths sum to " + std::to_string(total) + " but samples have " +
                        std::to_string(sample_shape[0]) + " features");
      std::vector<LayerSpec> tmpl = slice(net, 0, cut);
      std::vector<std::uint32_t> joined;
      for (std::uint32_t i = 0; i < num_clients; ++i) {
        std::string rid = "client_" + std::to_string(i);
        plan.roles.push_back({rid, RoleKind::Client});
        Segment seg{"branch_" + std::to_string(i),
                    plan_detail::instantiate_branch(tmpl, extras.feature_widths[i], i), rid};
        joined.push_back(plan_detail::branch_out_width(seg.layers, extras.feature_widths[i]));
        resolve_segment(seg, {extras.feature_widths[i]});
        plan.segments.push_back(std::move(seg));
      }
      plan.roles.push_back({"coord", RoleKind::Coordinator});
      Segment trunk{"trunk", {net[cut]}, "coord"};
      trunk.layers[0].input_widths = joined;
      std::uint32_t joined_total = 0;
      for (auto w : joined) joined_total += w;
      resolve_segment(trunk, {joined_total});
      plan.segments.push_back(std::move(trunk));
      for (std::uint32_t i = 0; i < num_clients; ++i)
        plan.edges.push_back({"branch_" + std::to_string(i), "trunk"});
      for (std::size_t t = 0; t < extras.heads.size(); ++t) {
        std::string rid = "server_" + std::to_string(t);
        std::string sid = "head_" + std::to_string(t);
        plan.roles.push_back({rid, RoleKind::Server});
        auto head = auto_name_layers(extras.heads[t], "h" + std::to_string(t) + ".");
        plan_detail::require_loss_tail(head, "multi_task head");
        plan_detail::forbid_concat(head, "multi_task head");
        Segment seg{sid, std::move(head), rid};
        resolve_segment(seg, {joined_total});
        plan.segments.push_back(std::move(seg));
        plan.edges.push_back({"trunk", sid});
        plan.task_heads.push_back({rid, sid});
      }
      plan.label_holder.clear();  // each head holds its own labels
      plan.feature_widths = extras.feature_widths;
      break;
    }
  }

  // classes taken from the (first) loss layer
  for (const auto& seg : plan.segments)
    for (const auto& l : seg.layers)
      if (l.kind == LayerKind::SoftmaxCrossEntropy && plan.num_classes == 0)
        plan.num_classes = l.num_classes;

  auto violations = validate_plan(plan);
  if (!violations.empty()) {
    std::string msg = "plan invalid:";
    for (const auto& v : violations) msg += "\n  - " + v;
    throw PlanError(msg);
  }
  return plan;
}

// All invariant violations, not just the first; empty means the plan is well
// formed. Shape compatibility is re-derived with a dummy batch of 1.
inline std::vector<std::string> validate_plan(const PartitionPlan& plan) {
  std::vector<std::string> bad;
  auto complain = [&bad](std::string m) { bad.push_back(std::move(m)); };

  for (std::size_t i = 0; i < plan.roles.size(); ++i)
    for (std::size_t j = i + 1; j < plan.roles.size(); ++j)
      if (plan.roles[i].id == plan.roles[j].id)
        complain("duplicate role id '" + plan.roles[i].id + "'");
  for (std::size_t i = 0; i < plan.segments.size(); ++i)
    for (std::size_t j = i + 1; j < plan.segments.size(); ++j)
      if (plan.segments[i].id == plan.segments[j].id)
        complain("duplicate segment id '" + plan.segments[i].id + "'");
  for (const auto& seg : plan.segments) {
    if (seg.layers.empty()) complain("segment '" + seg.id + "' is empty");
    if (!plan.find_role(seg.owner))
      complain("segment '" + seg.id + "' owned by unknown role '" + seg.owner + "'");
  }
  for (const auto& e : plan.edges) {
    if (!plan.find_segment(e.from)) complain("edge from unknown segment '" + e.from + "'");
    if (!plan.find_segment(e.to)) complain("edge to unknown segment '" + e.to + "'");
  }

  std::size_t client_segments = 0, losses = 0;
  for (const auto& seg : plan.segments) {
    const Role* r = plan.find_role(seg.owner);
    if (r && r->kind == RoleKind::Client) ++client_segments;
    for (const auto& l : seg.layers)
      if (l.kind == LayerKind::SoftmaxCrossEntropy) {
        ++losses;
        if (plan.topology == Topology::MultiTask) {
          bool is_head = false;
          for (const auto& h : plan.task_heads) is_head |= (h.segment == seg.id);
          if (!is_head) complain("loss outside a task head in segment '" + seg.id + "'");
        } else if (seg.owner != plan.label_holder) {
          complain("loss computed by '" + seg.owner + "' but labels are held by '" +
                   plan.label_holder + "'");
        }
      }
  }

  switch (plan.topology) {
    case Topology::Vanilla:
    case Topology::ExtendedVanilla:
    case Topology::MultiHop:
    case Topology::Vertical:
      if (plan.label_holder != "server")
        complain("loss must run on the server for " +
                 std::string(topology_name(plan.topology)));
      break;
    case Topology::UShaped: {
      const Role* holder = plan.find_role(plan.label_holder);
      if (!holder || holder->kind != RoleKind::Client)
        complain("labels must stay at the client in u_shaped");
      if (!plan.segments.empty()) {
        const Segment& first = plan.segments.front();
        const Segment& last = plan.segments.back();
        if (first.owner != plan.label_holder || last.owner != plan.label_holder)
          complain("u_shaped client must own both the first and the last segment");
      }
      break;
    }
    case Topology::MultiTask: {
      if (!plan.label_holder.empty())
        complain("multi_task keeps labels at each task head, not at '" + plan.label_holder +
                 "'");
      if (plan.task_heads.size() < 2) complain("multi_task needs at least 2 task heads");
      if (losses != plan.task_heads.size())
        complain("each task head must own exactly one loss layer");
      break;
    }
  }
  if (plan.topology == Topology::Vertical || plan.topology == Topology::MultiTask) {
    if (client_segments < 2)
      complain(std::string(topology_name(plan.topology)) + " needs at least 2 client segments");
    // the shared concat's arity must match the number of client branches
    for (const auto& seg : plan.segments)
      for (const auto& l : seg.layers)
        if (l.kind == LayerKind::Concat && l.input_widths.size() != client_segments)
          complain("concat '" + layer_label(l) + "' joins " +
                   std::to_string(l.input_widths.size()) + " inputs but the plan has " +
                   std::to_string(client_segments) + " client segments");
  }
  if (plan.topology == Topology::MultiHop && client_segments < 2)
    complain("multi_hop needs at least 2 chained client segments");

  // shape propagation with a dummy batch of 1 along the forward edges
  for (const auto& seg : plan.segments) {
    bool is_entry = true;
    for (const auto& e : plan.edges) is_entry &= (e.to != seg.id);
    if (!is_entry) continue;
    // entry segments consume raw samples; others are checked transitively below
    Shape in = plan.sample_shape;
    if (!plan.feature_widths.empty()) {
      std::size_t idx = 0;
      for (std::size_t i = 0; i < plan.segments.size(); ++i)
        if (plan.segments[i].id == seg.id) idx = i;
      if (idx < plan.feature_widths.size()) in = {plan.feature_widths[idx]};
    }
    std::vector<LayerSpec> copy = seg.layers;
    try {
      resolve_shapes(copy, in);
    } catch (const ShapeError& e) {
      complain("segment '" + seg.id + "': " + e.what());
    }
  }
  for (const auto& e : plan.edges) {
    const Segment* from = plan.find_segment(e.from);
    const Segment* to = plan.find_segment(e.to);
    if (!from || !to || from->layers.empty() || to->layers.empty()) continue;
    // the receiver's resolved input must be reachable from the sender's output
    std::vector<LayerSpec> fcopy = from->layers;
    Shape out;
    try {
      out = resolve_shapes(fcopy, from->layers.front().in_shape);
    } catch (const ShapeError&) {
      continue;  // already reported above
    }
    const LayerSpec& sink = to->layers.front();
    if (sink.kind == LayerKind::Concat) {
      if (out.size() != 1)
        complain("edge " + e.from + "->" + e.to + ": concat expects [batch,features] input");
      continue;  // widths already checked against client segment count
    }
    if (sink.in_shape != out && !(sink.in_shape.empty()))
      complain("edge " + e.from + "->" + e.to + ": output " + shape_str(out) +
               " does not match downstream input " + shape_str(sink.in_shape));
  }
  return bad;
}

// ---- monolithic stitching ----

// One flattened layer list per loss path: a single list for the chain
// topologies (equal to the original network), one per task head for
// multi_task. Vertical returns its branches flattened ahead of the joined
// tail; that list enumerates every runtime layer once but is not a runnable
// chain (use monolithic_graph for execution).
inline std::vector<std::vector<LayerSpec>> monolithic_equivalent(const PartitionPlan& plan) {
  std::vector<std::vector<LayerSpec>> nets;
  switch (plan.topology) {
    case Topology::Vanilla:
    case Topology::UShaped:
    case Topology::ExtendedVanilla:
    case Topology::MultiHop: {
      std::vector<LayerSpec> net;
      for (const auto& seg : plan.segments)
        net.insert(net.end(), seg.layers.begin(), seg.layers.end());
      nets.push_back(std::move(net));
      break;
    }
    case Topology::Vertical: {
      std::vector<LayerSpec> net;
      for (const auto& seg : plan.segments)
        net.insert(net.end(), seg.layers.begin(), seg.layers.end());
      nets.push_back(std::move(net));
      break;
    }
    case Topology::MultiTask: {
      std::vector<LayerSpec> shared;
      for (const auto& seg : plan.segments) {
        bool is_head = false;
        for (const auto& h : plan.task_heads) is_head |= (h.segment == seg.id);
        if (!is_head) shared.insert(shared.end(), seg.layers.begin(), seg.layers.end());
      }
      for (const auto& h : plan.task_heads) {
        std::vector<LayerSpec> net = shared;
        const Segment* seg = plan.find_segment(h.segment);
        net.insert(net.end(), seg->layers.begin(), seg->layers.end());
        nets.push_back(std::move(net));
      }
      break;
    }
  }
  return nets;
}

// Executable single-machine form: either one plain chain, or per-party
// branches joined by a concat and continued by one or more head chains.
struct MonolithicNet {
  std::vector<std::vector<LayerSpec>> branches;  // empty for chain topologies
  LayerSpec junction;                            // concat, meaningful iff branches non-empty
  std::vector<std::vector<LayerSpec>> heads;     // each ends with the loss
};

inline MonolithicNet monolithic_graph(const PartitionPlan& plan) {
  MonolithicNet net;
  switch (plan.topology) {
    case Topology::Vanilla:
    case Topology::UShaped:
    case Topology::ExtendedVanilla:
    case Topology::MultiHop: {
      std::vector<LayerSpec> chain;
      for (const auto& seg : plan.segments)
        chain.insert(chain.end(), seg.layers.begin(), seg.layers.end());
      net.heads.push_back(std::move(chain));
      break;
    }
    case Topology::Vertical: {
      for (std::uint32_t i = 0; i < plan.num_clients; ++i)
        net.branches.push_back(plan.segments[i].layers);
      const Segment& back = plan.segments[plan.num_clients];
      net.junction = back.layers.front();
      net.heads.push_back({back.layers.begin() + 1, back.layers.end()});
      break;
    }
    case Topology::MultiTask: {
      for (std::uint32_t i = 0; i < plan.num_clients; ++i)
        net.branches.push_back(plan.segments[i].layers);
      net.junction = plan.segments[plan.num_clients].layers.front();
      for (const auto& h : plan.task_heads)
        net.heads.push_back(plan.find_segment(h.segment)->layers);
      break;
    }
  }
  return net;
}

}  // namespace splitnn
