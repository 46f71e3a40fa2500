// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run lifecycle: a validated configuration in, artifacts out. Loads and
// partitions the dataset, builds the transport fabric, executes the
// configured method, proves the measured ledgers equal the closed-form
// prediction (refusing to write artifacts otherwise), and emits
// metrics.csv / run.meta / weights.spln / summary.txt into the output
// directory. Re-running into the same directory rotates the previous
// artifacts to prev.<N>.* so runs stay comparable.

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "splitnn/config.hpp"
#include "splitnn/report.hpp"

namespace splitnn {

struct RunOutcome {
  RunMeta meta;
  MetricsTable metrics;
  Reconciliation reconciliation;
  RunReport report;  // raw engine output (per-step losses, eval sweeps, notes)
  std::vector<std::pair<std::string, std::vector<Tensor>>> weights;  // role -> params
  std::string summary;          // filled by run_experiment
  std::filesystem::path dir;    // empty until artifacts are written
};

namespace run_detail {

// Interleaves step and eval reports into metrics rows. The step column counts
// completed training steps: a train row carries its own 1-based position, an
// eval row the count at the time of the sweep.
inline MetricsTable build_metrics(const RunReport& rep, const std::string& method,
                                  const std::string& topology) {
  MetricsTable table;
  const std::map<std::string, RoleDelta>* any_totals = nullptr;
  if (!rep.steps.empty()) any_totals = &rep.steps.front().totals;
  else if (!rep.evals.empty()) any_totals = &rep.evals.front().totals;
  if (!any_totals) return table;
  for (const auto& [role, _] : *any_totals) table.roles.push_back(role);

  auto counters_of = [&](const std::map<std::string, RoleDelta>& totals) {
    std::vector<RoleDelta> out;
    for (const auto& role : table.roles) {
      auto it = totals.find(role);
      out.push_back(it == totals.end() ? RoleDelta{} : it->second);
    }
    return out;
  };

  std::size_t si = 0;
  auto emit_step = [&] {
    const TrainStepReport& r = rep.steps[si];
    MetricsRow row;
    row.epoch = r.epoch;
    row.step = static_cast<std::uint32_t>(si + 1);
    row.method = method;
    row.topology = topology;
    row.is_eval = false;
    row.loss = r.loss_total();
    row.counters = counters_of(r.totals);
    table.rows.push_back(std::move(row));
    ++si;
  };
  for (const auto& ev : rep.evals) {
    while (si < rep.steps.size() && rep.steps[si].epoch <= ev.epoch) emit_step();
    MetricsRow row;
    row.epoch = ev.epoch;
    row.step = static_cast<std::uint32_t>(si);
    row.method = method;
    row.topology = topology;
    row.is_eval = true;
    row.accuracy = ev.accuracy;
    row.counters = counters_of(ev.totals);
    table.rows.push_back(std::move(row));
  }
  while (si < rep.steps.size()) emit_step();
  return table;
}

inline std::unique_ptr<Fabric> make_fabric(TransportKind kind, LedgerSet& ledgers,
                                           Transcript* transcript) {
  if (kind == TransportKind::Tcp)
    return std::make_unique<TcpFabric>(ledgers, transcript);
  return std::make_unique<InProcFabric>(ledgers, transcript);
}

inline std::string render_role_table(const LedgerSet& ledgers) {
  std::ostringstream os;
  os << "role           flops_fwd      flops_bwd      bytes_sent     bytes_recv\n";
  for (const auto& [role, led] : ledgers.by_role) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-14s %-14llu %-14llu %-14llu %llu\n", role.c_str(),
                  static_cast<unsigned long long>(led.flops_forward),
                  static_cast<unsigned long long>(led.flops_backward),
                  static_cast<unsigned long long>(led.bytes_sent),
                  static_cast<unsigned long long>(led.bytes_received));
    os << buf;
    auto by_type = [&](const char* dir, const std::array<std::uint64_t, 7>& arr) {
      std::string parts;
      for (std::size_t t = 1; t < arr.size(); ++t)
        if (arr[t])
          parts += (parts.empty() ? "" : ", ") +
                   std::string(frame_type_name(static_cast<FrameType>(t))) + " " +
                   std::to_string(arr[t]);
      if (!parts.empty()) os << "  " << dir << " by type: " << parts << "\n";
    };
    by_type("sent", led.sent_by_type);
    by_type("received", led.received_by_type);
  }
  return os.str();
}

}  // namespace run_detail

// Executes the configured method without touching the filesystem (beyond
// reading the dataset). Throws if validation fails or if the measured ledgers
// do not equal the prediction exactly.
inline RunOutcome execute_run(const ExperimentConfig& cfg) {
  auto bad = validate_experiment_config(cfg);
  if (!bad.empty()) {
    std::string msg = "invalid config:";
    for (const auto& b : bad) msg += "\n  - " + b;
    throw ConfigError(msg);
  }

  Dataset ds = load_dataset(cfg.source);
  if (ds.sample_shape() != cfg.input_shape)
    throw ConfigError("model.input is " + shape_str(cfg.input_shape) +
                      " but the dataset provides " + shape_str(ds.sample_shape()));

  // Multi-hop chains hold data only at the first client; the hop count comes
  // from the plan, not the partition.
  PartitionSpec pspec = cfg.partition;
  if (cfg.method == Method::SplitNN && cfg.topology == Topology::MultiHop)
    pspec = PartitionSpec{PartitionKind::HorizontalEqual, 1, 1.0, {}};
  std::vector<Shard> shards = partition_dataset(ds, pspec, cfg.options.seed);

  LedgerSet ledgers;
  std::unique_ptr<Fabric> fabric = run_detail::make_fabric(cfg.transport, ledgers, nullptr);

  RunOutcome out;
  CostPrediction pred;
  std::string topology_label;
  if (cfg.method == Method::SplitNN) {
    topology_label = topology_name(cfg.topology);
    PlanExtras extras;
    extras.feature_widths = cfg.partition.feature_widths;
    extras.heads = cfg.heads;
    PartitionPlan plan = build_plan(cfg.topology, cfg.network, cfg.cuts,
                                    cfg.partition.num_clients, cfg.input_shape, extras);
    SplitEngine engine(plan, shards, cfg.options, *fabric);
    out.report = engine.run();
    out.weights = engine.parameter_snapshot();
    pred = predict_split_run(plan, shard_row_counts(shards), cfg.options);
  } else {
    std::vector<Tensor> server_weights;
    if (cfg.method == Method::Federated)
      out.report = run_federated(cfg.network, cfg.input_shape, shards, cfg.options, *fabric,
                                 &server_weights);
    else
      out.report = run_largebatch(cfg.network, cfg.input_shape, shards, cfg.options, *fabric,
                                  &server_weights);
    out.weights.emplace_back("server", std::move(server_weights));
    pred = cfg.method == Method::Federated
               ? predict_federated_run(cfg.network, cfg.input_shape, shard_row_counts(shards),
                                       cfg.options)
               : predict_largebatch_run(cfg.network, cfg.input_shape, shard_row_counts(shards),
                                        cfg.options);
  }

  out.reconciliation = reconcile(ledgers, pred);
  if (!out.reconciliation.exact)
    throw Error("resource accounting failed: " + out.reconciliation.to_string());

  out.metrics =
      run_detail::build_metrics(out.report, method_name(cfg.method), topology_label);

  out.meta.method = method_name(cfg.method);
  out.meta.topology = topology_label;
  out.meta.dataset = dataset_signature(cfg);
  out.meta.network = config_network_signature(cfg);
  out.meta.transport = transport_name(cfg.transport);
  out.meta.epochs = cfg.options.epochs;
  out.meta.clients = cfg.partition.num_clients;
  out.meta.seed = cfg.options.seed;
  for (const auto& [role, _] : out.weights) out.meta.weight_roles.push_back(role);

  // The summary needs the final ledgers; keep them in the outcome via the
  // last metrics row (identical by construction) plus a rendered table now,
  // while the fabric is still alive.
  out.summary = run_detail::render_role_table(ledgers);
  return out;
}

inline const char* const kOutputDirEnvVar = "SPLITNN_OUTPUT_DIR";

// flag > environment > config file.
inline std::string effective_output_dir(const ExperimentConfig& cfg,
                                        const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv(kOutputDirEnvVar); env && *env) return env;
  return cfg.output_dir;
}

// Moves any existing run artifacts aside as prev.<N>.* (smallest unused N),
// preserving every earlier run in the directory.
inline void rotate_artifacts(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  static const char* kNames[] = {"metrics.csv", "run.meta", "weights.spln", "summary.txt",
                                 "curves.csv"};
  bool any = false;
  for (const char* n : kNames) any = any || fs::exists(dir / n);
  if (!any) return;
  std::size_t gen = 1;
  auto taken = [&](std::size_t g) {
    for (const char* n : kNames)
      if (fs::exists(dir / ("prev." + std::to_string(g) + "." + n))) return true;
    return false;
  };
  while (taken(gen)) ++gen;
  for (const char* n : kNames) {
    fs::path from = dir / n;
    if (fs::exists(from)) fs::rename(from, dir / ("prev." + std::to_string(gen) + "." + n));
  }
}

namespace run_detail {

inline std::string render_summary(const RunOutcome& out, const std::filesystem::path& dir) {
  std::ostringstream os;
  os << "run summary\n===========\n"
     << "method    = " << out.meta.method << "\n";
  if (!out.meta.topology.empty()) os << "topology  = " << out.meta.topology << "\n";
  os << "dataset   = " << out.meta.dataset << "\n"
     << "network   = " << out.meta.network << "\n"
     << "transport = " << out.meta.transport << "\n"
     << "epochs    = " << out.meta.epochs << "\n"
     << "clients   = " << out.meta.clients << "\n"
     << "seed      = " << out.meta.seed << "\n\n"
     << "train steps = " << out.report.steps.size() << "\n";
  if (!out.report.steps.empty())
    os << "final train loss = " << metrics_detail::num(out.report.steps.back().loss_total())
       << "\n";
  if (!out.report.evals.empty())
    os << "final eval accuracy = " << metrics_detail::num(out.report.evals.back().accuracy)
       << "\n";
  for (const auto& n : out.report.notes) os << "note: " << n << "\n";
  os << "\nresource accounting: " << out.reconciliation.to_string() << "\n\n"
     << "per-role totals\n"
     << out.summary;  // role table rendered at run time

  // When the directory already holds other runs, append the comparison block.
  try {
    auto runs = load_runs(dir);
    if (runs.size() >= 2) {
      os << "\ncomparison with prior runs in this directory\n"
         << comparison_for(runs).text;
    }
  } catch (const Error& e) {
    os << "\nprior runs present but not comparable: " << e.what() << "\n";
  }
  return os.str();
}

}  // namespace run_detail

// Full lifecycle: execute, rotate old artifacts, write the new ones.
inline RunOutcome run_experiment(const ExperimentConfig& cfg) {
  RunOutcome out = execute_run(cfg);
  namespace fs = std::filesystem;
  fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  rotate_artifacts(dir);

  write_text_file(dir / "metrics.csv", metrics_to_csv(out.metrics));
  write_text_file(dir / "run.meta", meta_to_string(out.meta));
  std::vector<std::vector<Tensor>> per_role;
  for (const auto& [_, params] : out.weights) per_role.push_back(params);
  write_binary_file(dir / "weights.spln", weights_file_bytes(per_role));

  out.summary = run_detail::render_summary(out, dir);
  write_text_file(dir / "summary.txt", out.summary);
  out.dir = dir;
  return out;
}

}  // namespace splitnn
