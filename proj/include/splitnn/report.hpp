// SPDX-License-Identifier: Apache-2.0
#pragma once

// Post-run analysis over the artifacts a run directory accumulates: pairs of
// metrics CSV + metadata files become accuracy-vs-client-FLOPs curves and a
// per-method cost comparison. Everything here is pure post-processing; table
// values are ledger totals passed through unchanged.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "splitnn/metering.hpp"
#include "splitnn/metrics.hpp"

namespace splitnn {

struct LoadedRun {
  std::string id;  // metrics file name, e.g. "metrics.csv" or "prev.2.metrics.csv"
  RunMeta meta;
  MetricsTable metrics;
};

// "split:<topology>" | "federated" | "largebatch" — the label used in curves
// and comparison rows.
inline std::string run_label(const RunMeta& m) {
  return m.method == "splitnn" ? "split:" + m.topology : m.method;
}

// Reads every (metrics, meta) artifact pair in a run directory: the current
// pair plus rotated prev.<N>.* pairs, oldest first, current last.
inline std::vector<LoadedRun> load_runs(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::exists(dir)) throw DataError("run directory '" + dir.string() + "' does not exist");
  std::vector<LoadedRun> out;
  auto load_pair = [&](const std::string& metrics_name, const std::string& meta_name) {
    fs::path mp = dir / metrics_name, dp = dir / meta_name;
    bool hm = fs::exists(mp), hd = fs::exists(dp);
    if (!hm && !hd) return false;
    if (hm != hd)
      throw DataError("run directory '" + dir.string() + "' has " +
                      (hm ? metrics_name : meta_name) + " without its partner " +
                      (hm ? meta_name : metrics_name));
    LoadedRun run;
    run.id = metrics_name;
    run.meta = parse_run_meta(read_text_file(dp));
    run.metrics = parse_metrics_csv(read_text_file(mp));
    out.push_back(std::move(run));
    return true;
  };
  for (std::size_t n = 1;; ++n) {
    std::string p = "prev." + std::to_string(n) + ".";
    if (!load_pair(p + "metrics.csv", p + "run.meta")) break;
  }
  load_pair("metrics.csv", "run.meta");
  return out;
}

// Comparisons only make sense over runs that trained the same problem.
inline void check_comparable(const std::vector<LoadedRun>& runs) {
  if (runs.empty()) throw DataError("no runs to compare");
  const LoadedRun& ref = runs.front();
  for (const auto& r : runs) {
    if (r.meta.dataset != ref.meta.dataset)
      throw DataError("runs '" + ref.id + "' and '" + r.id + "' trained different datasets: '" +
                      ref.meta.dataset + "' vs '" + r.meta.dataset + "'");
    if (r.meta.network != ref.meta.network)
      throw DataError("runs '" + ref.id + "' and '" + r.id + "' trained different networks: '" +
                      ref.meta.network + "' vs '" + r.meta.network + "'");
    if (r.meta.epochs != ref.meta.epochs)
      throw DataError("runs '" + ref.id + "' and '" + r.id + "' ran different epoch counts: " +
                      std::to_string(ref.meta.epochs) + " vs " + std::to_string(r.meta.epochs));
  }
}

// ---------------------------------------------------------------------------
// Accuracy-vs-client-FLOPs curves: one point per eval row, x = mean cumulative
// FLOPs over client_* roles at that moment.

struct CurvePoint {
  double client_flops = 0.0;  // cumulative, mean over client roles
  double accuracy = 0.0;
  std::string method;  // run_label()
  std::string run_id;

  bool operator==(const CurvePoint&) const = default;
};

namespace report_detail {

// Shortest decimal form that parses back to the identical double.
inline std::string exact_num(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_exact(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw DataError("curves line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

inline double mean_client_flops(const MetricsTable& t, const MetricsRow& row) {
  double sum = 0.0;
  std::size_t clients = 0;
  for (std::size_t i = 0; i < t.roles.size(); ++i) {
    if (t.roles[i].rfind("client", 0) != 0) continue;
    sum += static_cast<double>(row.counters[i].flops_fwd) +
           static_cast<double>(row.counters[i].flops_bwd);
    ++clients;
  }
  if (clients == 0) throw DataError("run has no client roles to chart");
  return sum / static_cast<double>(clients);
}

}  // namespace report_detail

inline std::vector<CurvePoint> curves(const std::vector<LoadedRun>& runs) {
  check_comparable(runs);
  std::vector<CurvePoint> out;
  for (const auto& run : runs) {
    double last_x = -1.0;
    for (const auto& row : run.metrics.rows) {
      if (!row.is_eval) continue;
      CurvePoint p;
      p.client_flops = report_detail::mean_client_flops(run.metrics, row);
      p.accuracy = row.accuracy;
      p.method = run_label(run.meta);
      p.run_id = run.id;
      if (p.client_flops < last_x)
        throw DataError("run '" + run.id + "': client FLOPs not monotone across eval points");
      last_x = p.client_flops;
      out.push_back(std::move(p));
    }
  }
  return out;
}

inline std::string curves_to_csv(const std::vector<CurvePoint>& pts) {
  using report_detail::exact_num;
  std::string out = "method,run,client_flops,accuracy\n";
  for (const auto& p : pts)
    out += p.method + "," + p.run_id + "," + exact_num(p.client_flops) + "," +
           exact_num(p.accuracy) + "\n";
  return out;
}

inline std::vector<CurvePoint> parse_curves_csv(const std::string& content) {
  using namespace report_detail;
  std::istringstream is(content);
  std::string line;
  if (!std::getline(is, line) || line != "method,run,client_flops,accuracy")
    throw DataError("curves csv: bad header");
  std::vector<CurvePoint> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = metrics_detail::split_csv_line(line);
    if (cols.size() != 4)
      throw DataError("curves line " + std::to_string(line_no) + " has " +
                      std::to_string(cols.size()) + " columns, expected 4");
    CurvePoint p;
    p.method = cols[0];
    p.run_id = cols[1];
    p.client_flops = parse_exact(cols[2], line_no);
    p.accuracy = parse_exact(cols[3], line_no);
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cost comparison: the final cumulative counters of each run, fed unchanged
// into the comparison table.

inline RunCost run_cost_from(const LoadedRun& run) {
  if (run.metrics.rows.empty())
    throw DataError("run '" + run.id + "' has no metrics rows");
  RunCost cost;
  cost.method = run_label(run.meta);
  cost.dataset = run.meta.dataset;
  cost.epochs = run.meta.epochs;
  const MetricsRow& last = run.metrics.rows.back();
  for (std::size_t i = 0; i < run.metrics.roles.size(); ++i) {
    ResourceLedger& led = cost.ledgers.at(run.metrics.roles[i]);
    led.flops_forward = last.counters[i].flops_fwd;
    led.flops_backward = last.counters[i].flops_bwd;
    led.bytes_sent = last.counters[i].bytes_sent;
    led.bytes_received = last.counters[i].bytes_recv;
  }
  return cost;
}

inline ComparisonTable comparison_for(const std::vector<LoadedRun>& runs) {
  check_comparable(runs);
  std::vector<RunCost> costs;
  for (const auto& r : runs) costs.push_back(run_cost_from(r));
  return comparison_table(costs);
}

// Full comparison text: one block per run plus the method comparison table.
inline std::string comparison_report(const std::vector<LoadedRun>& runs) {
  check_comparable(runs);
  std::ostringstream os;
  os << "run comparison (" << runs.size() << (runs.size() == 1 ? " run)\n" : " runs)\n")
     << "dataset = " << runs.front().meta.dataset << "\n"
     << "network = " << runs.front().meta.network << "\n"
     << "epochs  = " << runs.front().meta.epochs << "\n\n";
  for (const auto& r : runs) {
    os << r.id << ": " << run_label(r.meta) << ", transport " << r.meta.transport << ", seed "
       << r.meta.seed;
    double best = -1.0;
    for (const auto& row : r.metrics.rows)
      if (row.is_eval && row.accuracy > best) best = row.accuracy;
    if (best >= 0.0) os << ", best accuracy " << metrics_detail::num(best);
    os << "\n";
  }
  os << "\n" << comparison_for(runs).text;
  return os.str();
}

// The `compare <dir>` driver: writes curves.csv and summary.txt, returns the
// summary text.
inline std::string write_comparison(const std::filesystem::path& dir) {
  auto runs = load_runs(dir);
  if (runs.empty()) throw DataError("no runs found in '" + dir.string() + "'");
  write_text_file(dir / "curves.csv", curves_to_csv(curves(runs)));
  std::string text = comparison_report(runs);
  write_text_file(dir / "summary.txt", text);
  return text;
}

}  // namespace splitnn
