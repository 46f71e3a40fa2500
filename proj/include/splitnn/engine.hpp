// SPDX-License-Identifier: Apache-2.0
// Training orchestrator: split learning across six topologies plus federated
// averaging and large-batch synchronous SGD baselines. Roles own layer states;
// every cross-role tensor travels as a wire frame over a transport fabric, so
// the byte ledgers reflect exactly what a distributed deployment would move.
// The whole system is stepped single-threaded in a deterministic interleaving.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "splitnn/dataset.hpp"
#include "splitnn/flops.hpp"
#include "splitnn/layers.hpp"
#include "splitnn/ledger.hpp"
#include "splitnn/topology.hpp"
#include "splitnn/transport.hpp"
#include "splitnn/wire.hpp"

namespace splitnn {

// Seed stream for weight init; split and monolithic runs share it so both
// start from bit-identical parameters.
inline constexpr std::uint64_t kWeightStream = 0x5745;

enum class WeightSyncMode : std::uint8_t { ServerMediated, PeerToPeer, None };

inline const char* sync_mode_name(WeightSyncMode m) {
  switch (m) {
    case WeightSyncMode::ServerMediated: return "server_mediated";
    case WeightSyncMode::PeerToPeer: return "peer_to_peer";
    case WeightSyncMode::None: return "none";
  }
  return "?";
}

inline WeightSyncMode parse_sync_mode(const std::string& s) {
  if (s == "server_mediated") return WeightSyncMode::ServerMediated;
  if (s == "peer_to_peer") return WeightSyncMode::PeerToPeer;
  if (s == "none") return WeightSyncMode::None;
  throw ConfigError("unknown weight sync mode '" + s + "'");
}

struct EngineOptions {
  std::uint32_t batch = 32;
  float lr = 0.05f;
  std::uint32_t epochs = 1;
  std::uint32_t local_epochs = 1;      // federated rounds train this many local passes
  std::uint32_t batches_per_turn = 1;  // horizontal round-robin turn length
  WeightSyncMode sync = WeightSyncMode::ServerMediated;
  bool merge_mean = false;             // multi-task cut-gradient merge: sum (default) or mean
  bool eval_each_epoch = true;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Reports

struct RoleDelta {
  std::uint64_t flops_fwd = 0, flops_bwd = 0, bytes_sent = 0, bytes_recv = 0;
};

// Cumulative per-role ledger counters captured when a report row is emitted.
inline std::map<std::string, RoleDelta> ledger_totals(const LedgerSet& led) {
  std::map<std::string, RoleDelta> out;
  for (const auto& [role, l] : led.by_role)
    out[role] = {l.flops_forward, l.flops_backward, l.bytes_sent, l.bytes_received};
  return out;
}

struct TrainStepReport {
  std::uint32_t epoch = 0;
  std::uint32_t step = 0;      // global training step index
  std::string owner;           // active data client; "joint" when all act together
  std::vector<double> losses;  // one entry per task head
  std::uint32_t correct = 0;   // training-batch argmax hits (all heads summed)
  std::uint32_t rows = 0;      // batch rows
  std::map<std::string, RoleDelta> deltas;  // this step's charges
  std::map<std::string, RoleDelta> totals;  // cumulative ledgers as of this step

  double loss_total() const {
    double s = 0.0;
    for (double l : losses) s += l;
    return s;
  }
};

struct EvalReport {
  std::uint32_t epoch = 0;
  std::uint64_t correct = 0, total = 0;  // total counts head-row pairs for multi-task
  double accuracy = 0.0;
  std::vector<double> per_task;
  std::map<std::string, RoleDelta> totals;  // cumulative ledgers after the sweep
};

struct RunReport {
  std::vector<TrainStepReport> steps;
  std::vector<EvalReport> evals;
  std::vector<std::string> notes;
};

// ---------------------------------------------------------------------------
// Schedule: the global turn list both the engine and the cost predictor walk.

struct BatchRangeRef {
  std::uint32_t start = 0, count = 0;
};

struct ScheduleTurn {
  std::uint32_t owner = 0;  // data-client index (fixed 0 for joint topologies)
  std::uint32_t epoch = 0;
  bool eval = false;
  std::vector<BatchRangeRef> batches;  // offsets into the owner's shard (or aligned rows)
};

struct Schedule {
  bool joint = false;  // vertical / multi_task: every client acts each step
  std::vector<ScheduleTurn> turns;
};

inline bool topology_is_joint(Topology t) {
  return t == Topology::Vertical || t == Topology::MultiTask;
}

// data_sizes: per data-client sample counts. Horizontal replicas pass one entry
// per replica; multi_hop passes the entry shard at index 0 and zeros after it;
// joint topologies pass the aligned row count as a single entry.
inline Schedule build_schedule(Topology topo, const std::vector<std::uint32_t>& data_sizes,
                               const EngineOptions& opt) {
  if (opt.batch == 0) throw ConfigError("batch size must be positive");
  if (opt.batches_per_turn == 0) throw ConfigError("batches_per_turn must be positive");
  Schedule s;
  s.joint = topology_is_joint(topo);

  auto ranges_over = [&](std::uint32_t n) {
    std::vector<BatchRangeRef> out;
    for (std::uint32_t at = 0; at < n; at += opt.batch)
      out.push_back({at, std::min(opt.batch, n - at)});
    return out;
  };

  for (std::uint32_t e = 0; e < opt.epochs; ++e) {
    if (s.joint) {
      for (const auto& br : ranges_over(data_sizes.at(0)))
        s.turns.push_back({0, e, false, {br}});
      if (opt.eval_each_epoch) s.turns.push_back({0, e, true, ranges_over(data_sizes.at(0))});
      continue;
    }
    // Round-robin turns, batches_per_turn batches each, skipping exhausted
    // clients, until every shard is consumed.
    std::vector<std::uint32_t> cursor(data_sizes.size(), 0);
    bool any = true;
    while (any) {
      any = false;
      for (std::uint32_t c = 0; c < data_sizes.size(); ++c) {
        if (cursor[c] >= data_sizes[c]) continue;
        any = true;
        ScheduleTurn turn{c, e, false, {}};
        for (std::uint32_t b = 0; b < opt.batches_per_turn && cursor[c] < data_sizes[c]; ++b) {
          std::uint32_t take = std::min(opt.batch, data_sizes[c] - cursor[c]);
          turn.batches.push_back({cursor[c], take});
          cursor[c] += take;
        }
        s.turns.push_back(std::move(turn));
      }
    }
    if (opt.eval_each_epoch)
      for (std::uint32_t c = 0; c < data_sizes.size(); ++c)
        if (data_sizes[c] > 0) s.turns.push_back({c, e, true, ranges_over(data_sizes[c])});
  }
  return s;
}

// Owner changes between adjacent turns; these are the weight-sync handoffs for
// replicated-client topologies.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> handoff_pairs(const Schedule& s) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (std::size_t i = 1; i < s.turns.size(); ++i)
    if (s.turns[i].owner != s.turns[i - 1].owner)
      out.push_back({s.turns[i - 1].owner, s.turns[i].owner});
  return out;
}

// ---------------------------------------------------------------------------
// Shared helpers (both the split engine and the monolithic oracle use these,
// keeping their arithmetic bit-identical).

namespace engine_detail {

// Forward through chain[from..], stopping before a trailing loss layer.
inline Tensor run_forward(std::vector<LayerState>& chain, const Tensor& x, ResourceLedger& led,
                          bool train, std::size_t from = 0) {
  Tensor cur = x;
  for (std::size_t i = from; i < chain.size(); ++i) {
    auto& st = chain[i];
    if (st.spec.kind == LayerKind::SoftmaxCrossEntropy) break;
    led.flops_forward += layer_flops(st.spec, cur.dim(0), Direction::Forward);
    cur = forward(st, cur, train);
  }
  return cur;
}

// Backward through chain[downto..] in reverse, skipping a trailing loss layer.
inline Tensor run_backward(std::vector<LayerState>& chain, Tensor g, float lr,
                           ResourceLedger& led, std::size_t downto = 0) {
  for (std::size_t i = chain.size(); i-- > downto;) {
    auto& st = chain[i];
    if (st.spec.kind == LayerKind::SoftmaxCrossEntropy) continue;
    led.flops_backward += layer_flops(st.spec, g.dim(0), Direction::Backward);
    g = backward(st, g, lr);
  }
  return g;
}

// As run_backward but collecting parameter gradients instead of updating.
inline Tensor run_backward_collect(std::vector<LayerState>& chain, Tensor g, ResourceLedger& led,
                                   std::vector<Tensor>& sink) {
  // backward_collect appends [dW, db] per layer; walk forward order so the
  // sink lines up with collect_params order.
  std::vector<std::vector<Tensor>> per_layer(chain.size());
  for (std::size_t i = chain.size(); i-- > 0;) {
    auto& st = chain[i];
    if (st.spec.kind == LayerKind::SoftmaxCrossEntropy) continue;
    led.flops_backward += layer_flops(st.spec, g.dim(0), Direction::Backward);
    g = backward_collect(st, g, per_layer[i]);
  }
  for (auto& grads : per_layer)
    for (auto& t : grads) sink.push_back(std::move(t));
  return g;
}

inline LayerState* loss_state(std::vector<LayerState>& chain) {
  if (!chain.empty() && chain.back().spec.kind == LayerKind::SoftmaxCrossEntropy)
    return &chain.back();
  return nullptr;
}

struct LossOut {
  double loss = 0.0;
  Tensor grad;
  std::uint32_t correct = 0;
};

inline LossOut run_loss(LayerState& st, const Tensor& logits, std::span<const std::uint16_t> y,
                        ResourceLedger& led) {
  led.flops_forward += layer_flops(st.spec, logits.dim(0), Direction::Forward);
  led.flops_backward += layer_flops(st.spec, logits.dim(0), Direction::Backward);
  LossResult r = loss_forward_backward(st, logits, y);
  return {r.loss, std::move(r.logits_grad), count_correct(logits, y)};
}

inline void collect_params(const std::vector<LayerState>& chain, std::vector<Tensor>& out) {
  for (const auto& st : chain)
    for (const auto& w : st.weights) out.push_back(w);
}

inline void apply_params(std::vector<LayerState>& chain, const std::vector<Tensor>& in,
                         std::size_t& at) {
  for (auto& st : chain)
    for (auto& w : st.weights) {
      if (at >= in.size())
        throw ProtocolMisuse("weights frame ends early at tensor " + std::to_string(at));
      if (in[at].shape != w.shape)
        throw ShapeError("weights frame tensor " + std::to_string(at) + " is " +
                         shape_str(in[at].shape) + ", expected " + shape_str(w.shape));
      w = in[at++];
    }
}

inline std::vector<Shape> param_shapes(const std::vector<LayerSpec>& chain) {
  std::vector<Shape> out;
  for (const auto& spec : chain) {
    if (spec.kind == LayerKind::Dense) {
      out.push_back({spec.in_dim, spec.out_dim});
      if (spec.has_bias) out.push_back({spec.out_dim});
    } else if (spec.kind == LayerKind::Conv2D) {
      out.push_back({spec.out_ch, spec.in_ch, spec.kernel_h, spec.kernel_w});
      if (spec.has_bias) out.push_back({spec.out_ch});
    }
  }
  return out;
}

// Element-wise gradient merge across task heads, double accumulation in head
// order so split and monolithic runs agree bitwise.
inline Tensor merge_grads(const std::vector<Tensor>& gs, bool mean) {
  Tensor out = Tensor::zeros(gs.at(0).shape);
  for (std::size_t j = 0; j < out.data.size(); ++j) {
    double acc = 0.0;
    for (const auto& g : gs) acc += g.data[j];
    if (mean) acc /= static_cast<double>(gs.size());
    out.data[j] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace engine_detail

// Task t of a multi-task run relabels the base targets by a class offset, so
// heads solve related but distinct problems over the shared trunk.
inline std::vector<std::uint16_t> derived_task_labels(std::span<const std::uint16_t> base,
                                                      std::uint32_t task, std::uint32_t classes) {
  std::vector<std::uint16_t> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i)
    out[i] = static_cast<std::uint16_t>((base[i] + task) % classes);
  return out;
}

// ---------------------------------------------------------------------------
// Split engine

class SplitEngine {
 public:
  // One live participant (a client replica, relay, coordinator, or head
  // server) with its owned layer states and links.
  struct RoleInstance {
    std::string id;
    RoleKind kind = RoleKind::Client;
    std::uint16_t wire_index = 0;
    std::vector<std::string> seg_order;                          // plan order
    std::map<std::string, std::vector<LayerState>> segs;         // by segment id
    const Shard* shard = nullptr;                                // training slice
    std::vector<std::uint16_t> task_labels;                      // multi-task heads
    std::map<std::string, Endpoint*> links;                      // peer role id -> endpoint
  };

  SplitEngine(const PartitionPlan& plan, std::vector<Shard> shards, const EngineOptions& opt,
              Fabric& fabric)
      : plan_(plan), shards_(std::move(shards)), opt_(opt), fabric_(fabric) {
    auto bad = validate_plan(plan_);
    if (!bad.empty()) throw PlanError("invalid plan: " + bad.front());
    build_instances();
    init_weights();
    schedule_ = build_schedule(plan_.topology, data_sizes(), opt_);
  }

  // Full lifecycle: every scheduled turn, weight-sync handoffs at owner
  // changes, one eval report per epoch when enabled.
  RunReport run() {
    RunReport rep;
    std::optional<EvalReport> pending;
    for (std::size_t i = 0; i < schedule_.turns.size(); ++i) {
      const ScheduleTurn& turn = schedule_.turns[i];
      maybe_handoff(turn.owner);
      if (turn.eval) {
        if (!pending) {
          pending.emplace();
          pending->epoch = turn.epoch;
          pending->per_task.assign(num_tasks(), 0.0);
          eval_task_correct_.assign(num_tasks(), 0);
        }
        exec_eval_turn(turn, *pending);
        bool last_of_block = i + 1 == schedule_.turns.size() || !schedule_.turns[i + 1].eval ||
                             schedule_.turns[i + 1].epoch != turn.epoch;
        if (last_of_block) {
          finish_eval(*pending);
          pending->totals = ledger_totals(fabric_.ledgers());
          rep.evals.push_back(*pending);
          pending.reset();
        }
      } else {
        exec_train_turn(turn, rep);
      }
    }
    rep.notes = notes_;
    return rep;
  }

  // One eval sweep right now (weights propagate along the eval turns exactly
  // as they would inside run()).
  double evaluate() {
    EvalReport er;
    er.per_task.assign(num_tasks(), 0.0);
    eval_task_correct_.assign(num_tasks(), 0);
    EngineOptions one = opt_;
    one.epochs = 1;
    one.eval_each_epoch = true;
    Schedule sweep = build_schedule(plan_.topology, data_sizes(), one);
    for (const auto& turn : sweep.turns) {
      if (!turn.eval) continue;
      maybe_handoff(turn.owner);
      exec_eval_turn(turn, er);
    }
    finish_eval(er);
    return er.accuracy;
  }

  const Schedule& schedule() const { return schedule_; }
  const PartitionPlan& plan() const { return plan_; }
  LedgerSet& ledgers() { return fabric_.ledgers(); }

  const std::vector<LayerState>& states(const std::string& role_id,
                                        const std::string& seg_id) const {
    return instances_.at(index_of(role_id))->segs.at(seg_id);
  }

  RoleInstance& instance(const std::string& role_id) { return *instances_.at(index_of(role_id)); }

  std::vector<std::string> data_client_ids() const {
    std::vector<std::string> out;
    for (auto* c : clients_) out.push_back(c->id);
    return out;
  }

  // Current parameters of every role that owns any, in instance order. Each
  // entry is ready to become one weights frame.
  std::vector<std::pair<std::string, std::vector<Tensor>>> parameter_snapshot() const {
    std::vector<std::pair<std::string, std::vector<Tensor>>> out;
    for (const auto& inst : instances_) {
      std::vector<Tensor> p;
      for (const auto& sid : inst->seg_order) engine_detail::collect_params(inst->segs.at(sid), p);
      if (!p.empty()) out.emplace_back(inst->id, std::move(p));
    }
    return out;
  }

 private:
  using RoleDeltaMap = std::map<std::string, RoleDelta>;

  PartitionPlan plan_;
  std::vector<Shard> shards_;
  EngineOptions opt_;
  Fabric& fabric_;

  std::vector<std::unique_ptr<RoleInstance>> instances_;
  std::vector<RoleInstance*> clients_;  // data clients in turn order
  std::vector<EndpointPtr> owned_endpoints_;
  Schedule schedule_;
  std::vector<std::string> notes_;
  std::uint32_t step_ = 0;      // global train step
  std::uint32_t frame_seq_ = 0; // step field stamped on frames
  int last_owner_ = -1;
  std::vector<std::uint64_t> eval_task_correct_;

  std::size_t index_of(const std::string& role_id) const {
    for (std::size_t i = 0; i < instances_.size(); ++i)
      if (instances_[i]->id == role_id) return i;
    throw ProtocolMisuse("unknown role '" + role_id + "'");
  }

  ResourceLedger& led(const RoleInstance& r) { return fabric_.ledgers().at(r.id); }

  std::uint32_t num_tasks() const {
    return plan_.topology == Topology::MultiTask
               ? static_cast<std::uint32_t>(plan_.task_heads.size())
               : 1u;
  }

  std::vector<std::uint32_t> data_sizes() const {
    std::vector<std::uint32_t> out;
    if (topology_is_joint(plan_.topology)) {
      out.push_back(shards_.at(0).size());
    } else if (plan_.topology == Topology::MultiHop) {
      out.push_back(shards_.at(0).size());
      for (std::uint32_t i = 1; i < plan_.num_clients; ++i) out.push_back(0);
    } else {
      for (const auto& sh : shards_) out.push_back(sh.size());
    }
    return out;
  }

  RoleInstance* add_instance(const std::string& id, RoleKind kind) {
    auto inst = std::make_unique<RoleInstance>();
    inst->id = id;
    inst->kind = kind;
    inst->wire_index = static_cast<std::uint16_t>(instances_.size());
    instances_.push_back(std::move(inst));
    return instances_.back().get();
  }

  void connect(RoleInstance& a, RoleInstance& b) {
    if (a.links.count(b.id)) return;
    auto [ea, eb] = fabric_.link(a.id, b.id);
    a.links[b.id] = ea.get();
    b.links[a.id] = eb.get();
    owned_endpoints_.push_back(std::move(ea));
    owned_endpoints_.push_back(std::move(eb));
  }

  void assign_segment(RoleInstance& inst, const Segment& seg) {
    inst.seg_order.push_back(seg.id);
    inst.segs[seg.id] = {};  // states filled by init_weights
  }

  void build_instances() {
    Topology t = plan_.topology;
    bool replicated = t == Topology::Vanilla || t == Topology::UShaped ||
                      t == Topology::ExtendedVanilla;

    if (replicated) {
      if (shards_.size() != plan_.num_clients)
        throw DataError("expected " + std::to_string(plan_.num_clients) + " shards, got " +
                        std::to_string(shards_.size()));
      for (std::uint32_t i = 0; i < plan_.num_clients; ++i) {
        auto* c = add_instance("client_" + std::to_string(i), RoleKind::Client);
        c->shard = &shards_[i];
        for (const auto* seg : plan_.segments_of("client")) assign_segment(*c, *seg);
        clients_.push_back(c);
      }
      RoleInstance* relay = nullptr;
      if (t == Topology::ExtendedVanilla) {
        relay = add_instance("relay", RoleKind::Client);
        for (const auto* seg : plan_.segments_of("relay")) assign_segment(*relay, *seg);
      }
      auto* server = add_instance("server", RoleKind::Server);
      for (const auto* seg : plan_.segments_of("server")) assign_segment(*server, *seg);
      for (auto* c : clients_) {
        if (relay) connect(*c, *relay);
        connect(*c, *server);  // activations (vanilla/u-shaped), labels, weight sync
      }
      if (relay) connect(*relay, *server);
      if (opt_.sync == WeightSyncMode::PeerToPeer)
        for (std::size_t i = 0; i < clients_.size(); ++i)
          for (std::size_t j = i + 1; j < clients_.size(); ++j)
            connect(*clients_[i], *clients_[j]);
      return;
    }

    if (t == Topology::MultiHop) {
      if (shards_.size() != 1 && shards_.size() != plan_.num_clients)
        throw DataError("multi_hop expects the data shard at hop 0");
      for (std::uint32_t i = 0; i < plan_.num_clients; ++i) {
        std::string rid = "client_" + std::to_string(i);
        auto* c = add_instance(rid, RoleKind::Client);
        for (const auto* seg : plan_.segments_of(rid)) assign_segment(*c, *seg);
        clients_.push_back(c);
      }
      clients_[0]->shard = &shards_[0];
      for (std::uint32_t i = 1; i < plan_.num_clients; ++i)
        if (i < shards_.size() && shards_[i].size() > 0)
          throw DataError("multi_hop relays past hop 0 must not hold data");
      auto* server = add_instance("server", RoleKind::Server);
      for (const auto* seg : plan_.segments_of("server")) assign_segment(*server, *seg);
      for (std::size_t i = 0; i + 1 < clients_.size(); ++i)
        connect(*clients_[i], *clients_[i + 1]);
      connect(*clients_.back(), *server);
      connect(*clients_[0], *server);  // labels travel directly to the loss
      return;
    }

    // Vertical / MultiTask: one party per feature slice, aligned rows.
    if (shards_.size() != plan_.num_clients)
      throw DataError("expected " + std::to_string(plan_.num_clients) + " vertical shards, got " +
                      std::to_string(shards_.size()));
    for (std::uint32_t i = 1; i < plan_.num_clients; ++i)
      if (shards_[i].size() != shards_[0].size())
        throw DataError("vertical shards must be row-aligned: shard 0 has " +
                        std::to_string(shards_[0].size()) + " rows, shard " + std::to_string(i) +
                        " has " + std::to_string(shards_[i].size()));
    if (!shards_[0].has_labels()) throw DataError("labels must sit with party 0");
    for (std::uint32_t i = 0; i < plan_.num_clients; ++i) {
      std::string rid = "client_" + std::to_string(i);
      auto* c = add_instance(rid, RoleKind::Client);
      c->shard = &shards_[i];
      for (const auto* seg : plan_.segments_of(rid)) assign_segment(*c, *seg);
      clients_.push_back(c);
    }
    if (t == Topology::Vertical) {
      auto* server = add_instance("server", RoleKind::Server);
      for (const auto* seg : plan_.segments_of("server")) assign_segment(*server, *seg);
      for (auto* c : clients_) connect(*c, *server);
    } else {
      auto* coord = add_instance("coord", RoleKind::Coordinator);
      for (const auto* seg : plan_.segments_of("coord")) assign_segment(*coord, *seg);
      for (auto* c : clients_) connect(*c, *coord);
      for (std::size_t tsk = 0; tsk < plan_.task_heads.size(); ++tsk) {
        const auto& head = plan_.task_heads[tsk];
        auto* srv = add_instance(head.server, RoleKind::Server);
        for (const auto* seg : plan_.segments_of(head.server)) assign_segment(*srv, *seg);
        connect(*coord, *srv);
        const Segment* seg = plan_.find_segment(head.segment);
        std::uint32_t classes = seg->layers.back().num_classes;
        srv->task_labels =
            derived_task_labels(shards_[0].labels, static_cast<std::uint32_t>(tsk), classes);
      }
    }
  }

  // Canonical order: plan.segments. Replicated client segments are
  // initialized once and copied to every replica.
  void init_weights() {
    Rng rng(derive_seed(opt_.seed, kWeightStream));
    for (const auto& seg : plan_.segments) {
      std::vector<LayerState> states = init_chain(seg.layers, rng);
      bool placed = false;
      for (auto& inst : instances_) {
        auto it = inst->segs.find(seg.id);
        if (it != inst->segs.end()) {
          it->second = states;  // copy; replicas start identical
          placed = true;
        }
      }
      if (!placed) throw PlanError("segment '" + seg.id + "' has no owner instance");
    }
  }

  // ---- frame plumbing ----

  Frame expect(RoleInstance& r, const std::string& peer, FrameType want) {
    Frame f = r.links.at(peer)->receive();
    if (f.type != want)
      throw ProtocolMisuse("role " + r.id + ", step " + std::to_string(frame_seq_) +
                           ": expected " + frame_type_name(want) + " from " + peer + ", got " +
                           frame_type_name(f.type));
    return f;
  }

  void send_tensor(RoleInstance& from, const std::string& to, FrameType type, const Tensor& t) {
    from.links.at(to)->send(make_tensor_frame(type, frame_seq_, from.wire_index, t));
  }

  void send_labels(RoleInstance& from, const std::string& to,
                   std::span<const std::uint16_t> y) {
    from.links.at(to)->send(make_labels_frame(frame_seq_, from.wire_index, y));
  }

  void send_range(RoleInstance& from, const std::string& to, const BatchRangeRef& br) {
    ControlMsg m;
    m.op = ControlOp::BatchRange;
    m.start = br.start;
    m.count = br.count;
    from.links.at(to)->send(make_control_frame(frame_seq_, from.wire_index, m));
  }

  // ---- weight sync ----

  std::vector<Tensor> client_params(RoleInstance& c) {
    std::vector<Tensor> out;
    for (const auto& sid : c.seg_order) engine_detail::collect_params(c.segs.at(sid), out);
    return out;
  }

  void apply_client_params(RoleInstance& c, const std::vector<Tensor>& in) {
    std::size_t at = 0;
    for (const auto& sid : c.seg_order) engine_detail::apply_params(c.segs.at(sid), in, at);
    if (at != in.size())
      throw ProtocolMisuse("weights frame has " + std::to_string(in.size()) +
                           " tensors, expected " + std::to_string(at));
  }

  void maybe_handoff(std::uint32_t next_owner) {
    bool replicated = plan_.topology == Topology::Vanilla ||
                      plan_.topology == Topology::UShaped ||
                      plan_.topology == Topology::ExtendedVanilla;
    if (!replicated || opt_.sync == WeightSyncMode::None) {
      last_owner_ = static_cast<int>(next_owner);
      return;
    }
    if (last_owner_ >= 0 && static_cast<std::uint32_t>(last_owner_) != next_owner)
      sync_handoff(static_cast<std::uint32_t>(last_owner_), next_owner);
    last_owner_ = static_cast<int>(next_owner);
  }

  void sync_handoff(std::uint32_t from, std::uint32_t to) {
    RoleInstance& src = *clients_.at(from);
    RoleInstance& dst = *clients_.at(to);
    std::vector<Tensor> params = client_params(src);
    if (opt_.sync == WeightSyncMode::ServerMediated) {
      RoleInstance& hub = instance("server");
      src.links.at(hub.id)->send(make_weights_frame(frame_seq_, src.wire_index, params));
      Frame up = expect(hub, src.id, FrameType::Weights);
      hub.links.at(dst.id)->send(Frame{FrameType::Weights, frame_seq_, hub.wire_index,
                                       std::move(up.payload)});
      Frame down = expect(dst, hub.id, FrameType::Weights);
      apply_client_params(dst, parse_weights_payload(down.payload));
    } else {
      src.links.at(dst.id)->send(make_weights_frame(frame_seq_, src.wire_index, params));
      Frame f = expect(dst, src.id, FrameType::Weights);
      apply_client_params(dst, parse_weights_payload(f.payload));
    }
  }

  // ---- turn execution ----

  void exec_train_turn(const ScheduleTurn& turn, RunReport& rep) {
    for (const auto& br : turn.batches) {
      LedgerSet before = fabric_.ledgers();
      StepOutcome out = dance(turn.owner, br, /*train=*/true);
      TrainStepReport r;
      r.epoch = turn.epoch;
      r.step = step_++;
      r.owner = schedule_.joint ? "joint" : clients_.at(turn.owner)->id;
      r.losses = std::move(out.losses);
      r.correct = out.correct;
      r.rows = br.count;
      r.deltas = diff_ledgers(before, fabric_.ledgers());
      r.totals = ledger_totals(fabric_.ledgers());
      rep.steps.push_back(std::move(r));
      ++frame_seq_;
    }
    if (turn.batches.size() < opt_.batches_per_turn && !schedule_.joint)
      notes_.push_back("turn of " + clients_.at(turn.owner)->id + " in epoch " +
                       std::to_string(turn.epoch) + " ended early: shard exhausted after " +
                       std::to_string(turn.batches.size()) + " of " +
                       std::to_string(opt_.batches_per_turn) + " batches");
  }

  void exec_eval_turn(const ScheduleTurn& turn, EvalReport& er) {
    for (const auto& br : turn.batches) {
      StepOutcome out = dance(turn.owner, br, /*train=*/false);
      er.correct += out.correct;
      er.total += static_cast<std::uint64_t>(br.count) * num_tasks();
      for (std::size_t t = 0; t < out.task_correct.size(); ++t)
        eval_task_correct_[t] += out.task_correct[t];
      ++frame_seq_;
    }
  }

  void finish_eval(EvalReport& er) {
    er.accuracy = er.total ? static_cast<double>(er.correct) / static_cast<double>(er.total) : 0.0;
    std::uint64_t rows = er.total / std::max<std::uint32_t>(1, num_tasks());
    for (std::size_t t = 0; t < er.per_task.size(); ++t)
      er.per_task[t] = rows ? static_cast<double>(eval_task_correct_[t]) / rows : 0.0;
  }

  RoleDeltaMap diff_ledgers(const LedgerSet& before, const LedgerSet& after) {
    RoleDeltaMap out;
    for (const auto& [role, l] : after.by_role) {
      ResourceLedger prev;
      auto it = before.by_role.find(role);
      if (it != before.by_role.end()) prev = it->second;
      out[role] = {l.flops_forward - prev.flops_forward, l.flops_backward - prev.flops_backward,
                   l.bytes_sent - prev.bytes_sent, l.bytes_received - prev.bytes_received};
    }
    return out;
  }

  // ---- the six step dances ----

  struct StepOutcome {
    std::vector<double> losses;
    std::uint32_t correct = 0;
    std::vector<std::uint32_t> task_correct;  // per head (eval bookkeeping)
  };

  StepOutcome dance(std::uint32_t owner, const BatchRangeRef& br, bool train) {
    switch (plan_.topology) {
      case Topology::Vanilla: return vanilla_pass(owner, br, train);
      case Topology::UShaped: return ushaped_pass(owner, br, train);
      case Topology::ExtendedVanilla: return extended_pass(owner, br, train);
      case Topology::MultiHop: return multihop_pass(br, train);
      case Topology::Vertical: return vertical_pass(br, train);
      case Topology::MultiTask: return multitask_pass(br, train);
    }
    throw ProtocolMisuse("unknown topology");
  }

  StepOutcome vanilla_pass(std::uint32_t owner, const BatchRangeRef& br, bool train) {
    using namespace engine_detail;
    RoleInstance& c = *clients_.at(owner);
    RoleInstance& s = instance("server");
    Tensor x = batch_features(*c.shard, br.start, br.count);
    auto y = batch_labels(*c.shard, br.start, br.count);

    Tensor a = run_forward(c.segs.at("front"), x, led(c), train);
    send_tensor(c, s.id, FrameType::Activation, a);
    send_labels(c, s.id, y);

    Frame fa = expect(s, c.id, FrameType::Activation);
    Frame fy = expect(s, c.id, FrameType::Labels);
    Tensor logits = run_forward(s.segs.at("back"), parse_tensor_payload(fa.payload), led(s), train);
    auto ys = parse_labels_payload(fy.payload);
    if (!train) return eval_outcome(count_correct(logits, ys));

    LossOut lo = run_loss(*loss_state(s.segs.at("back")), logits, ys, led(s));
    Tensor g = run_backward(s.segs.at("back"), lo.grad, opt_.lr, led(s));
    send_tensor(s, c.id, FrameType::Gradient, g);

    Frame fg = expect(c, s.id, FrameType::Gradient);
    run_backward(c.segs.at("front"), parse_tensor_payload(fg.payload), opt_.lr, led(c));
    return {{lo.loss}, lo.correct, {lo.correct}};
  }

  StepOutcome ushaped_pass(std::uint32_t owner, const BatchRangeRef& br, bool train) {
    using namespace engine_detail;
    RoleInstance& c = *clients_.at(owner);
    RoleInstance& s = instance("server");
    Tensor x = batch_features(*c.shard, br.start, br.count);
    auto y = batch_labels(*c.shard, br.start, br.count);

    Tensor a = run_forward(c.segs.at("front"), x, led(c), train);
    send_tensor(c, s.id, FrameType::Activation, a);

    Frame fa = expect(s, c.id, FrameType::Activation);
    Tensor mid = run_forward(s.segs.at("middle"), parse_tensor_payload(fa.payload), led(s), train);
    send_tensor(s, c.id, FrameType::Logits, mid);

    Frame fl = expect(c, s.id, FrameType::Logits);
    Tensor logits = run_forward(c.segs.at("tail"), parse_tensor_payload(fl.payload), led(c), train);
    if (!train) return eval_outcome(count_correct(logits, y));

    LossOut lo = run_loss(*loss_state(c.segs.at("tail")), logits, y, led(c));
    Tensor g_tail = run_backward(c.segs.at("tail"), lo.grad, opt_.lr, led(c));
    send_tensor(c, s.id, FrameType::Gradient, g_tail);

    Frame fg = expect(s, c.id, FrameType::Gradient);
    Tensor g_cut = run_backward(s.segs.at("middle"), parse_tensor_payload(fg.payload), opt_.lr,
                                led(s));
    send_tensor(s, c.id, FrameType::Gradient, g_cut);

    Frame fc = expect(c, s.id, FrameType::Gradient);
    run_backward(c.segs.at("front"), parse_tensor_payload(fc.payload), opt_.lr, led(c));
    return {{lo.loss}, lo.correct, {lo.correct}};
  }

  StepOutcome extended_pass(std::uint32_t owner, const BatchRangeRef& br, bool train) {
    using namespace engine_detail;
    RoleInstance& c = *clients_.at(owner);
    RoleInstance& r = instance("relay");
    RoleInstance& s = instance("server");
    Tensor x = batch_features(*c.shard, br.start, br.count);
    auto y = batch_labels(*c.shard, br.start, br.count);

    Tensor a = run_forward(c.segs.at("front"), x, led(c), train);
    send_tensor(c, r.id, FrameType::Activation, a);
    send_labels(c, s.id, y);  // labels go straight to the loss holder

    Frame fa = expect(r, c.id, FrameType::Activation);
    Tensor mid = run_forward(r.segs.at("middle"), parse_tensor_payload(fa.payload), led(r), train);
    send_tensor(r, s.id, FrameType::Activation, mid);

    Frame fm = expect(s, r.id, FrameType::Activation);
    Frame fy = expect(s, c.id, FrameType::Labels);
    Tensor logits = run_forward(s.segs.at("back"), parse_tensor_payload(fm.payload), led(s), train);
    auto ys = parse_labels_payload(fy.payload);
    if (!train) return eval_outcome(count_correct(logits, ys));

    LossOut lo = run_loss(*loss_state(s.segs.at("back")), logits, ys, led(s));
    Tensor g2 = run_backward(s.segs.at("back"), lo.grad, opt_.lr, led(s));
    send_tensor(s, r.id, FrameType::Gradient, g2);

    Frame fg = expect(r, s.id, FrameType::Gradient);
    Tensor g1 = run_backward(r.segs.at("middle"), parse_tensor_payload(fg.payload), opt_.lr,
                             led(r));
    send_tensor(r, c.id, FrameType::Gradient, g1);

    Frame fc = expect(c, r.id, FrameType::Gradient);
    run_backward(c.segs.at("front"), parse_tensor_payload(fc.payload), opt_.lr, led(c));
    return {{lo.loss}, lo.correct, {lo.correct}};
  }

  StepOutcome multihop_pass(const BatchRangeRef& br, bool train) {
    using namespace engine_detail;
    RoleInstance& entry = *clients_.at(0);
    RoleInstance& s = instance("server");
    Tensor x = batch_features(*entry.shard, br.start, br.count);
    auto y = batch_labels(*entry.shard, br.start, br.count);

    std::string hop0 = "hop_0";
    Tensor a = run_forward(entry.segs.at(hop0), x, led(entry), train);
    std::string next = clients_.size() > 1 ? clients_[1]->id : s.id;
    send_tensor(entry, next, FrameType::Activation, a);
    send_labels(entry, s.id, y);

    for (std::size_t i = 1; i < clients_.size(); ++i) {
      RoleInstance& hop = *clients_[i];
      Frame fa = expect(hop, clients_[i - 1]->id, FrameType::Activation);
      Tensor h = run_forward(hop.segs.at("hop_" + std::to_string(i)),
                             parse_tensor_payload(fa.payload), led(hop), train);
      std::string to = i + 1 < clients_.size() ? clients_[i + 1]->id : s.id;
      send_tensor(hop, to, FrameType::Activation, h);
    }

    Frame fa = expect(s, clients_.back()->id, FrameType::Activation);
    Frame fy = expect(s, entry.id, FrameType::Labels);
    Tensor logits = run_forward(s.segs.at("back"), parse_tensor_payload(fa.payload), led(s), train);
    auto ys = parse_labels_payload(fy.payload);
    if (!train) return eval_outcome(count_correct(logits, ys));

    LossOut lo = run_loss(*loss_state(s.segs.at("back")), logits, ys, led(s));
    Tensor g = run_backward(s.segs.at("back"), lo.grad, opt_.lr, led(s));
    send_tensor(s, clients_.back()->id, FrameType::Gradient, g);

    for (std::size_t i = clients_.size(); i-- > 0;) {
      RoleInstance& hop = *clients_[i];
      std::string from = i + 1 < clients_.size() ? clients_[i + 1]->id : s.id;
      Frame fg = expect(hop, from, FrameType::Gradient);
      Tensor gh = run_backward(hop.segs.at("hop_" + std::to_string(i)),
                               parse_tensor_payload(fg.payload), opt_.lr, led(hop));
      if (i > 0) send_tensor(hop, clients_[i - 1]->id, FrameType::Gradient, gh);
    }
    return {{lo.loss}, lo.correct, {lo.correct}};
  }

  StepOutcome vertical_pass(const BatchRangeRef& br, bool train) {
    using namespace engine_detail;
    RoleInstance& s = instance("server");
    for (auto* c : clients_) send_range(s, c->id, br);

    for (std::size_t i = 0; i < clients_.size(); ++i) {
      RoleInstance& c = *clients_[i];
      Frame fr = expect(c, s.id, FrameType::Control);
      ControlMsg m = parse_control_payload(fr.payload);
      Tensor x = batch_features(*c.shard, m.start, m.count);
      Tensor a = run_forward(c.segs.at("branch_" + std::to_string(i)), x, led(c), train);
      send_tensor(c, s.id, FrameType::Activation, a);
      if (i == 0) send_labels(c, s.id, batch_labels(*c.shard, m.start, m.count));
    }

    std::vector<Tensor> acts;
    for (auto* c : clients_)
      acts.push_back(parse_tensor_payload(expect(s, c->id, FrameType::Activation).payload));
    auto ys = parse_labels_payload(expect(s, clients_[0]->id, FrameType::Labels).payload);

    auto& back = s.segs.at("back");
    led(s).flops_forward += layer_flops(back[0].spec, br.count, Direction::Forward);
    Tensor joined = concat_forward(back[0], acts, train);
    Tensor logits = run_forward(back, joined, led(s), train, /*from=*/1);
    if (!train) return eval_outcome(count_correct(logits, ys));

    LossOut lo = run_loss(*loss_state(back), logits, ys, led(s));
    Tensor g_cat = run_backward(back, lo.grad, opt_.lr, led(s), /*downto=*/1);
    led(s).flops_backward += layer_flops(back[0].spec, br.count, Direction::Backward);
    std::vector<Tensor> slices = concat_backward(back[0], g_cat);
    for (std::size_t i = 0; i < clients_.size(); ++i)
      send_tensor(s, clients_[i]->id, FrameType::Gradient, slices[i]);

    for (std::size_t i = 0; i < clients_.size(); ++i) {
      RoleInstance& c = *clients_[i];
      Frame fg = expect(c, s.id, FrameType::Gradient);
      run_backward(c.segs.at("branch_" + std::to_string(i)), parse_tensor_payload(fg.payload),
                   opt_.lr, led(c));
    }
    return {{lo.loss}, lo.correct, {lo.correct}};
  }

  StepOutcome multitask_pass(const BatchRangeRef& br, bool train) {
    using namespace engine_detail;
    RoleInstance& coord = instance("coord");
    for (auto* c : clients_) send_range(coord, c->id, br);

    for (std::size_t i = 0; i < clients_.size(); ++i) {
      RoleInstance& c = *clients_[i];
      ControlMsg m = parse_control_payload(expect(c, coord.id, FrameType::Control).payload);
      Tensor x = batch_features(*c.shard, m.start, m.count);
      Tensor a = run_forward(c.segs.at("branch_" + std::to_string(i)), x, led(c), train);
      send_tensor(c, coord.id, FrameType::Activation, a);
    }

    std::vector<Tensor> acts;
    for (auto* c : clients_)
      acts.push_back(parse_tensor_payload(expect(coord, c->id, FrameType::Activation).payload));
    auto& trunk = coord.segs.at("trunk");
    led(coord).flops_forward += layer_flops(trunk[0].spec, br.count, Direction::Forward);
    Tensor shared = concat_forward(trunk[0], acts, train);

    for (const auto& head : plan_.task_heads) {
      send_tensor(coord, head.server, FrameType::Activation, shared);
      send_range(coord, head.server, br);
    }

    StepOutcome out;
    std::vector<Tensor> head_grads;
    for (std::size_t t = 0; t < plan_.task_heads.size(); ++t) {
      const auto& headref = plan_.task_heads[t];
      RoleInstance& srv = instance(headref.server);
      Tensor act = parse_tensor_payload(expect(srv, coord.id, FrameType::Activation).payload);
      ControlMsg m = parse_control_payload(expect(srv, coord.id, FrameType::Control).payload);
      auto& chain = srv.segs.at(headref.segment);
      Tensor logits = run_forward(chain, act, led(srv), train);
      std::span<const std::uint16_t> y(srv.task_labels.data() + m.start, m.count);
      if (!train) {
        std::uint32_t c = count_correct(logits, y);
        out.correct += c;
        out.task_correct.push_back(c);
        continue;
      }
      LossOut lo = run_loss(*loss_state(chain), logits, y, led(srv));
      Tensor g = run_backward(chain, lo.grad, opt_.lr, led(srv));
      send_tensor(srv, coord.id, FrameType::Gradient, g);
      out.losses.push_back(lo.loss);
      out.correct += lo.correct;
      out.task_correct.push_back(lo.correct);
    }
    if (!train) return out;

    for (const auto& head : plan_.task_heads)
      head_grads.push_back(
          parse_tensor_payload(expect(coord, head.server, FrameType::Gradient).payload));
    Tensor merged = merge_grads(head_grads, opt_.merge_mean);  // copy cost not priced
    led(coord).flops_backward += layer_flops(trunk[0].spec, br.count, Direction::Backward);
    std::vector<Tensor> slices = concat_backward(trunk[0], merged);
    for (std::size_t i = 0; i < clients_.size(); ++i)
      send_tensor(coord, clients_[i]->id, FrameType::Gradient, slices[i]);

    for (std::size_t i = 0; i < clients_.size(); ++i) {
      RoleInstance& c = *clients_[i];
      Frame fg = expect(c, coord.id, FrameType::Gradient);
      run_backward(c.segs.at("branch_" + std::to_string(i)), parse_tensor_payload(fg.payload),
                   opt_.lr, led(c));
    }
    return out;
  }

  StepOutcome eval_outcome(std::uint32_t correct) { return {{}, correct, {correct}}; }
};

// ---------------------------------------------------------------------------
// Monolithic oracle: trains the equivalent un-split network locally over the
// identical schedule, seed and batch order. No transports, no ledgers.

class LocalRunner {
 public:
  LocalRunner(const PartitionPlan& plan, std::vector<Shard> shards, const EngineOptions& opt)
      : plan_(plan), shards_(std::move(shards)), opt_(opt), graph_(monolithic_graph(plan)) {
    Rng rng(derive_seed(opt_.seed, kWeightStream));
    for (const auto& b : graph_.branches) branch_states_.push_back(init_chain(b, rng));
    if (!graph_.branches.empty()) junction_state_ = init_layer(graph_.junction, rng);
    for (const auto& h : graph_.heads) head_states_.push_back(init_chain(h, rng));
    if (plan_.topology == Topology::MultiTask)
      for (std::size_t t = 0; t < graph_.heads.size(); ++t)
        task_labels_.push_back(derived_task_labels(
            shards_.at(0).labels, static_cast<std::uint32_t>(t),
            graph_.heads[t].back().num_classes));
  }

  RunReport run() {
    RunReport rep;
    Schedule sched = build_schedule(plan_.topology, data_sizes(), opt_);
    std::optional<EvalReport> pending;
    for (std::size_t i = 0; i < sched.turns.size(); ++i) {
      const auto& turn = sched.turns[i];
      if (turn.eval) {
        if (!pending) {
          pending.emplace();
          pending->epoch = turn.epoch;
        }
        for (const auto& br : turn.batches) {
          auto [correct, total] = eval_batch(turn.owner, br);
          pending->correct += correct;
          pending->total += total;
        }
        bool last = i + 1 == sched.turns.size() || !sched.turns[i + 1].eval ||
                    sched.turns[i + 1].epoch != turn.epoch;
        if (last) {
          pending->accuracy =
              pending->total ? static_cast<double>(pending->correct) / pending->total : 0.0;
          rep.evals.push_back(*pending);
          pending.reset();
        }
        continue;
      }
      for (const auto& br : turn.batches) {
        TrainStepReport r;
        r.epoch = turn.epoch;
        r.step = step_++;
        r.owner = "local";
        auto [losses, correct] = train_batch(turn.owner, br);
        r.losses = std::move(losses);
        r.correct = correct;
        r.rows = br.count;
        rep.steps.push_back(std::move(r));
      }
    }
    return rep;
  }

  double evaluate() {
    std::uint64_t correct = 0, total = 0;
    EngineOptions one = opt_;
    one.epochs = 1;
    one.eval_each_epoch = true;
    Schedule sweep = build_schedule(plan_.topology, data_sizes(), one);
    for (const auto& turn : sweep.turns) {
      if (!turn.eval) continue;
      for (const auto& br : turn.batches) {
        auto [c, t] = eval_batch(turn.owner, br);
        correct += c;
        total += t;
      }
    }
    return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  }

  const std::vector<LayerState>& head_states(std::size_t t = 0) const { return head_states_.at(t); }
  const std::vector<LayerState>& branch_states(std::size_t i) const { return branch_states_.at(i); }

 private:
  PartitionPlan plan_;
  std::vector<Shard> shards_;
  EngineOptions opt_;
  MonolithicNet graph_;
  std::vector<std::vector<LayerState>> branch_states_;
  std::optional<LayerState> junction_state_;
  std::vector<std::vector<LayerState>> head_states_;
  std::vector<std::vector<std::uint16_t>> task_labels_;
  std::uint32_t step_ = 0;
  ResourceLedger scratch_;  // oracle flops are not under test

  std::vector<std::uint32_t> data_sizes() const {
    std::vector<std::uint32_t> out;
    if (topology_is_joint(plan_.topology)) {
      out.push_back(shards_.at(0).size());
    } else if (plan_.topology == Topology::MultiHop) {
      out.push_back(shards_.at(0).size());
      for (std::uint32_t i = 1; i < plan_.num_clients; ++i) out.push_back(0);
    } else {
      for (const auto& sh : shards_) out.push_back(sh.size());
    }
    return out;
  }

  // Branch inputs + labels for a joint batch; single-shard features otherwise.
  std::pair<std::vector<double>, std::uint32_t> train_batch(std::uint32_t owner,
                                                            const BatchRangeRef& br) {
    using namespace engine_detail;
    if (graph_.branches.empty()) {
      const Shard& sh = shards_.at(owner);
      Tensor x = batch_features(sh, br.start, br.count);
      auto y = batch_labels(sh, br.start, br.count);
      auto& chain = head_states_[0];
      Tensor logits = run_forward(chain, x, scratch_, true);
      LossOut lo = run_loss(*loss_state(chain), logits, y, scratch_);
      run_backward(chain, lo.grad, opt_.lr, scratch_);
      return {{lo.loss}, lo.correct};
    }

    std::vector<Tensor> acts;
    for (std::size_t i = 0; i < branch_states_.size(); ++i)
      acts.push_back(run_forward(branch_states_[i],
                                 batch_features(shards_.at(i), br.start, br.count), scratch_,
                                 true));
    Tensor joined = concat_forward(*junction_state_, acts, true);

    std::vector<double> losses;
    std::uint32_t correct = 0;
    std::vector<Tensor> head_grads;
    for (std::size_t t = 0; t < head_states_.size(); ++t) {
      auto& chain = head_states_[t];
      Tensor logits = run_forward(chain, joined, scratch_, true);
      std::span<const std::uint16_t> y =
          plan_.topology == Topology::MultiTask
              ? std::span<const std::uint16_t>(task_labels_[t].data() + br.start, br.count)
              : std::span<const std::uint16_t>(shards_.at(0).labels.data() + br.start, br.count);
      LossOut lo = run_loss(*loss_state(chain), logits, y, scratch_);
      head_grads.push_back(run_backward(chain, lo.grad, opt_.lr, scratch_));
      losses.push_back(lo.loss);
      correct += lo.correct;
    }
    Tensor merged = head_grads.size() == 1 ? head_grads[0]
                                           : merge_grads(head_grads, opt_.merge_mean);
    std::vector<Tensor> slices = concat_backward(*junction_state_, merged);
    for (std::size_t i = 0; i < branch_states_.size(); ++i)
      run_backward(branch_states_[i], slices[i], opt_.lr, scratch_);
    return {std::move(losses), correct};
  }

  std::pair<std::uint64_t, std::uint64_t> eval_batch(std::uint32_t owner,
                                                     const BatchRangeRef& br) {
    using namespace engine_detail;
    if (graph_.branches.empty()) {
      const Shard& sh = shards_.at(owner);
      Tensor logits =
          run_forward(head_states_[0], batch_features(sh, br.start, br.count), scratch_, false);
      return {count_correct(logits, batch_labels(sh, br.start, br.count)), br.count};
    }
    std::vector<Tensor> acts;
    for (std::size_t i = 0; i < branch_states_.size(); ++i)
      acts.push_back(run_forward(branch_states_[i],
                                 batch_features(shards_.at(i), br.start, br.count), scratch_,
                                 false));
    Tensor joined = concat_forward(*junction_state_, acts, false);
    std::uint64_t correct = 0, total = 0;
    for (std::size_t t = 0; t < head_states_.size(); ++t) {
      Tensor logits = run_forward(head_states_[t], joined, scratch_, false);
      std::span<const std::uint16_t> y =
          plan_.topology == Topology::MultiTask
              ? std::span<const std::uint16_t>(task_labels_[t].data() + br.start, br.count)
              : std::span<const std::uint16_t>(shards_.at(0).labels.data() + br.start, br.count);
      correct += count_correct(logits, y);
      total += br.count;
    }
    return {correct, total};
  }
};

// ---------------------------------------------------------------------------
// Baselines. Both replicate the full network at every client; all weight and
// gradient movement goes over the fabric so the ledgers capture it.

namespace engine_detail {

struct BaselineWorld {
  std::vector<LayerSpec> chain;  // resolved, ends with the loss layer
  std::vector<std::vector<LayerState>> client_states;
  std::vector<LayerState> server_states;
  std::vector<EndpointPtr> owned;
  std::vector<Endpoint*> client_links;  // client side of each pair
  std::vector<Endpoint*> server_links;  // matching server side
  std::vector<std::string> client_ids;
};

inline BaselineWorld setup_baseline(const std::vector<LayerSpec>& network,
                                    const Shape& sample_shape, std::size_t num_clients,
                                    const EngineOptions& opt, Fabric& fabric) {
  BaselineWorld w;
  w.chain = auto_name_layers(network);
  if (w.chain.empty() || w.chain.back().kind != LayerKind::SoftmaxCrossEntropy)
    throw PlanError("baseline network must end with the loss layer");
  for (const auto& l : w.chain)
    if (l.kind == LayerKind::Concat) throw PlanError("baseline network cannot contain concat");
  resolve_shapes(w.chain, sample_shape);
  Rng rng(derive_seed(opt.seed, kWeightStream));
  w.server_states = init_chain(w.chain, rng);
  for (std::size_t i = 0; i < num_clients; ++i) {
    w.client_ids.push_back("client_" + std::to_string(i));
    w.client_states.push_back(w.server_states);  // copies of the global weights
    auto [cs, ss] = fabric.link(w.client_ids.back(), "server");
    w.client_links.push_back(cs.get());
    w.server_links.push_back(ss.get());
    w.owned.push_back(std::move(cs));
    w.owned.push_back(std::move(ss));
  }
  return w;
}

inline std::vector<Tensor> all_params(const std::vector<LayerState>& chain) {
  std::vector<Tensor> out;
  collect_params(chain, out);
  return out;
}

inline void set_params(std::vector<LayerState>& chain, const std::vector<Tensor>& in) {
  std::size_t at = 0;
  apply_params(chain, in, at);
  if (at != in.size())
    throw ProtocolMisuse("weights frame has " + std::to_string(in.size()) +
                         " tensors, expected " + std::to_string(at));
}

// Weighted mean of parameter sets, accumulated in double so the result is
// exact when all inputs agree and reproducible regardless of client count.
inline std::vector<Tensor> weighted_average_params(
    const std::vector<std::vector<Tensor>>& uploads, const std::vector<double>& weights) {
  if (uploads.empty() || uploads.size() != weights.size())
    throw ProtocolMisuse("weighted average needs matching uploads and weights");
  double total = 0.0;
  for (double v : weights) total += v;
  if (total <= 0.0) throw ProtocolMisuse("weighted average needs positive total weight");
  std::vector<Tensor> out;
  for (const auto& t : uploads[0]) out.push_back(Tensor::zeros(t.shape));
  for (std::size_t p = 0; p < out.size(); ++p)
    for (std::size_t j = 0; j < out[p].data.size(); ++j) {
      double acc = 0.0;
      for (std::size_t u = 0; u < uploads.size(); ++u)
        acc += weights[u] * static_cast<double>(uploads[u][p].data[j]);
      out[p].data[j] = static_cast<float>(acc / total);
    }
  return out;
}

}  // namespace engine_detail

// Federated averaging: per round, every client downloads the global weights,
// trains local_epochs over its shard, uploads; the server replaces the global
// weights with the shard-size-weighted average (double accumulation).
inline RunReport run_federated(const std::vector<LayerSpec>& network, const Shape& sample_shape,
                               const std::vector<Shard>& shards, const EngineOptions& opt,
                               Fabric& fabric, std::vector<Tensor>* final_weights = nullptr) {
  using namespace engine_detail;
  BaselineWorld w = setup_baseline(network, sample_shape, shards.size(), opt, fabric);
  RunReport rep;
  std::uint32_t step = 0, seq = 0;

  for (std::size_t i = 0; i < shards.size(); ++i)
    if (shards[i].size() == 0)
      rep.notes.push_back("warning: " + w.client_ids[i] + " has an empty shard and is skipped");

  auto push_weights = [&](std::size_t i) {
    w.server_links[i]->send(make_weights_frame(seq, 0, all_params(w.server_states)));
    Frame f = w.client_links[i]->receive();
    set_params(w.client_states[i], parse_weights_payload(f.payload));
  };

  for (std::uint32_t round = 0; round < opt.epochs; ++round) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < shards.size(); ++i)
      if (shards[i].size() > 0) active.push_back(i);

    for (std::size_t i : active) push_weights(i);

    for (std::size_t i : active) {
      auto& led = fabric.ledgers().at(w.client_ids[i]);
      for (std::uint32_t le = 0; le < opt.local_epochs; ++le) {
        for (std::uint32_t at = 0; at < shards[i].size(); at += opt.batch) {
          std::uint32_t take = std::min(opt.batch, shards[i].size() - at);
          Tensor x = batch_features(shards[i], at, take);
          auto y = batch_labels(shards[i], at, take);
          Tensor logits = run_forward(w.client_states[i], x, led, true);
          LossOut lo = run_loss(*loss_state(w.client_states[i]), logits, y, led);
          run_backward(w.client_states[i], lo.grad, opt.lr, led);
          TrainStepReport r;
          r.epoch = round;
          r.step = step++;
          r.owner = w.client_ids[i];
          r.losses = {lo.loss};
          r.correct = lo.correct;
          r.rows = take;
          r.totals = ledger_totals(fabric.ledgers());
          rep.steps.push_back(std::move(r));
          ++seq;
        }
      }
      w.client_links[i]->send(make_weights_frame(seq, 0, all_params(w.client_states[i])));
    }

    // Shard-size-weighted average replaces the global weights.
    std::vector<std::vector<Tensor>> uploads;
    std::vector<double> weights;
    for (std::size_t i : active) {
      Frame f = w.server_links[i]->receive();
      uploads.push_back(parse_weights_payload(f.payload));
      weights.push_back(static_cast<double>(shards[i].size()));
    }
    if (!uploads.empty())
      set_params(w.server_states, weighted_average_params(uploads, weights));

    if (opt.eval_each_epoch) {
      EvalReport er;
      er.epoch = round;
      for (std::size_t i : active) {
        push_weights(i);
        auto& led = fabric.ledgers().at(w.client_ids[i]);
        for (std::uint32_t at = 0; at < shards[i].size(); at += opt.batch) {
          std::uint32_t take = std::min(opt.batch, shards[i].size() - at);
          Tensor logits =
              run_forward(w.client_states[i], batch_features(shards[i], at, take), led, false);
          er.correct += count_correct(logits, batch_labels(shards[i], at, take));
          er.total += take;
        }
      }
      er.accuracy = er.total ? static_cast<double>(er.correct) / er.total : 0.0;
      er.totals = ledger_totals(fabric.ledgers());
      rep.evals.push_back(er);
    }
  }
  if (final_weights) *final_weights = all_params(w.server_states);
  return rep;
}

// Large-batch synchronous SGD: per round every active client downloads the
// weights, computes gradients on one local batch (no update), uploads them;
// the server applies one SGD step with the batch-size-weighted mean gradient.
inline RunReport run_largebatch(const std::vector<LayerSpec>& network, const Shape& sample_shape,
                                const std::vector<Shard>& shards, const EngineOptions& opt,
                                Fabric& fabric, std::vector<Tensor>* final_weights = nullptr) {
  using namespace engine_detail;
  BaselineWorld w = setup_baseline(network, sample_shape, shards.size(), opt, fabric);
  RunReport rep;
  std::uint32_t step = 0, seq = 0;

  for (std::size_t i = 0; i < shards.size(); ++i)
    if (shards[i].size() == 0)
      rep.notes.push_back("warning: " + w.client_ids[i] + " has an empty shard and is skipped");

  auto push_weights = [&](std::size_t i) {
    w.server_links[i]->send(make_weights_frame(seq, 0, all_params(w.server_states)));
    Frame f = w.client_links[i]->receive();
    set_params(w.client_states[i], parse_weights_payload(f.payload));
  };

  for (std::uint32_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::vector<std::uint32_t> cursor(shards.size(), 0);
    while (true) {
      std::vector<std::size_t> active;
      for (std::size_t i = 0; i < shards.size(); ++i)
        if (cursor[i] < shards[i].size()) active.push_back(i);
      if (active.empty()) break;

      for (std::size_t i : active) push_weights(i);

      std::vector<std::vector<Tensor>> grads;
      std::vector<double> takes;  // per active client, in order
      double loss_acc = 0.0;
      std::uint32_t correct = 0, total_rows = 0;
      for (std::size_t i : active) {
        auto& led = fabric.ledgers().at(w.client_ids[i]);
        std::uint32_t take = std::min(opt.batch, shards[i].size() - cursor[i]);
        Tensor x = batch_features(shards[i], cursor[i], take);
        auto y = batch_labels(shards[i], cursor[i], take);
        cursor[i] += take;
        Tensor logits = run_forward(w.client_states[i], x, led, true);
        LossOut lo = run_loss(*loss_state(w.client_states[i]), logits, y, led);
        std::vector<Tensor> sink;
        run_backward_collect(w.client_states[i], lo.grad, led, sink);
        w.client_links[i]->send(Frame{FrameType::Gradient, seq, 0, weights_payload(sink)});
        takes.push_back(static_cast<double>(take));
        loss_acc += lo.loss * take;
        correct += lo.correct;
        total_rows += take;
      }
      for (std::size_t i : active) {
        Frame f = w.server_links[i]->receive();
        grads.push_back(parse_weights_payload(f.payload));
      }

      // Batch-size-weighted mean gradient, double accumulation; one SGD step
      // in the same float arithmetic a local update would use.
      std::vector<Tensor> global = all_params(w.server_states);
      double denom = static_cast<double>(total_rows);
      for (std::size_t p = 0; p < global.size(); ++p) {
        for (std::size_t j = 0; j < global[p].data.size(); ++j) {
          double acc = 0.0;
          for (std::size_t u = 0; u < grads.size(); ++u)
            acc += takes[u] * static_cast<double>(grads[u][p].data[j]);
          float gbar = static_cast<float>(acc / denom);
          global[p].data[j] -= opt.lr * gbar;
        }
      }
      set_params(w.server_states, global);

      TrainStepReport r;
      r.epoch = epoch;
      r.step = step++;
      r.owner = "joint";
      r.losses = {loss_acc / total_rows};
      r.correct = correct;
      r.rows = total_rows;
      r.totals = ledger_totals(fabric.ledgers());
      rep.steps.push_back(std::move(r));
      ++seq;
    }

    if (opt.eval_each_epoch) {
      EvalReport er;
      er.epoch = epoch;
      for (std::size_t i = 0; i < shards.size(); ++i) {
        if (shards[i].size() == 0) continue;
        push_weights(i);
        auto& led = fabric.ledgers().at(w.client_ids[i]);
        for (std::uint32_t at = 0; at < shards[i].size(); at += opt.batch) {
          std::uint32_t take = std::min(opt.batch, shards[i].size() - at);
          Tensor logits =
              run_forward(w.client_states[i], batch_features(shards[i], at, take), led, false);
          er.correct += count_correct(logits, batch_labels(shards[i], at, take));
          er.total += take;
        }
      }
      er.accuracy = er.total ? static_cast<double>(er.correct) / er.total : 0.0;
      er.totals = ledger_totals(fabric.ledgers());
      rep.evals.push_back(er);
    }
  }
  if (final_weights) *final_weights = all_params(w.server_states);
  return rep;
}

}  // namespace splitnn
