// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run artifacts: the step-by-step metrics CSV, the trained-weights file (a
// sequence of ordinary weight frames, so the payloads can go straight back on
// the wire), and the small key=value metadata file that makes runs comparable
// after the fact. All writers are deterministic: the same run produces the
// same bytes.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "splitnn/engine.hpp"

namespace splitnn {

// ---------------------------------------------------------------------------
// Metrics CSV. One row per training step (loss filled, accuracy empty) plus
// one row per evaluation sweep (accuracy filled, loss empty). Counter columns
// are cumulative per-role ledger values at the time the row was written.

struct MetricsRow {
  std::uint32_t epoch = 0;
  std::uint32_t step = 0;  // train steps completed so far
  std::string method;
  std::string topology;  // empty for baselines
  bool is_eval = false;
  double loss = 0.0;      // train rows only
  double accuracy = 0.0;  // eval rows only
  std::vector<RoleDelta> counters;  // parallel to MetricsTable::roles
};

struct MetricsTable {
  std::vector<std::string> roles;
  std::vector<MetricsRow> rows;
};

namespace metrics_detail {

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::uint64_t parse_u64(const std::string& s, std::size_t line_no, const char* what) {
  if (s.empty()) throw DataError("metrics line " + std::to_string(line_no) + ": empty " + what);
  std::uint64_t v = 0;
  for (char ch : s) {
    if (ch < '0' || ch > '9')
      throw DataError("metrics line " + std::to_string(line_no) + ": bad " + what + " '" + s +
                      "'");
    v = v * 10 + static_cast<std::uint64_t>(ch - '0');
  }
  return v;
}

inline double parse_f64(const std::string& s, std::size_t line_no, const char* what) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    throw DataError("metrics line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  return v;
}

}  // namespace metrics_detail

inline std::string metrics_to_csv(const MetricsTable& table) {
  using metrics_detail::num;
  std::ostringstream os;
  os << "epoch,step,method,topology,loss,accuracy";
  for (const auto& r : table.roles)
    os << ',' << r << "_flops_fwd," << r << "_flops_bwd," << r << "_bytes_sent," << r
       << "_bytes_recv";
  os << '\n';
  for (const auto& row : table.rows) {
    if (row.counters.size() != table.roles.size())
      throw DataError("metrics row has " + std::to_string(row.counters.size()) +
                      " counter groups, expected " + std::to_string(table.roles.size()));
    os << row.epoch << ',' << row.step << ',' << row.method << ',' << row.topology << ','
       << (row.is_eval ? "" : num(row.loss)) << ',' << (row.is_eval ? num(row.accuracy) : "");
    for (const auto& c : row.counters)
      os << ',' << c.flops_fwd << ',' << c.flops_bwd << ',' << c.bytes_sent << ','
         << c.bytes_recv;
    os << '\n';
  }
  return os.str();
}

inline MetricsTable parse_metrics_csv(const std::string& content) {
  using namespace metrics_detail;
  MetricsTable table;
  std::istringstream is(content);
  std::string line;
  if (!std::getline(is, line)) throw DataError("metrics csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto cols = split_csv_line(line);
  const std::vector<std::string> fixed = {"epoch", "step", "method", "topology", "loss",
                                          "accuracy"};
  if (cols.size() < fixed.size() || (cols.size() - fixed.size()) % 4 != 0)
    throw DataError("metrics header has " + std::to_string(cols.size()) + " columns");
  for (std::size_t i = 0; i < fixed.size(); ++i)
    if (cols[i] != fixed[i])
      throw DataError("metrics header column " + std::to_string(i + 1) + " is '" + cols[i] +
                      "', expected '" + fixed[i] + "'");
  const char* suffix[4] = {"_flops_fwd", "_flops_bwd", "_bytes_sent", "_bytes_recv"};
  for (std::size_t at = fixed.size(); at < cols.size(); at += 4) {
    std::string role;
    for (int k = 0; k < 4; ++k) {
      const std::string& c = cols[at + k];
      std::string suf = suffix[k];
      if (c.size() <= suf.size() || c.substr(c.size() - suf.size()) != suf)
        throw DataError("metrics header column '" + c + "' does not end in '" + suf + "'");
      std::string r = c.substr(0, c.size() - suf.size());
      if (k == 0)
        role = r;
      else if (r != role)
        throw DataError("metrics header mixes roles '" + role + "' and '" + r + "'");
    }
    table.roles.push_back(role);
  }

  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto vals = split_csv_line(line);
    if (vals.size() != cols.size())
      throw DataError("metrics line " + std::to_string(line_no) + " has " +
                      std::to_string(vals.size()) + " columns, expected " +
                      std::to_string(cols.size()));
    MetricsRow row;
    row.epoch = static_cast<std::uint32_t>(parse_u64(vals[0], line_no, "epoch"));
    row.step = static_cast<std::uint32_t>(parse_u64(vals[1], line_no, "step"));
    row.method = vals[2];
    row.topology = vals[3];
    bool has_loss = !vals[4].empty();
    bool has_acc = !vals[5].empty();
    if (has_loss == has_acc)
      throw DataError("metrics line " + std::to_string(line_no) +
                      ": exactly one of loss/accuracy must be set");
    row.is_eval = has_acc;
    if (has_loss) row.loss = parse_f64(vals[4], line_no, "loss");
    if (has_acc) row.accuracy = parse_f64(vals[5], line_no, "accuracy");
    for (std::size_t at = 6; at < vals.size(); at += 4) {
      RoleDelta d;
      d.flops_fwd = parse_u64(vals[at], line_no, "flops_fwd");
      d.flops_bwd = parse_u64(vals[at + 1], line_no, "flops_bwd");
      d.bytes_sent = parse_u64(vals[at + 2], line_no, "bytes_sent");
      d.bytes_recv = parse_u64(vals[at + 3], line_no, "bytes_recv");
      row.counters.push_back(d);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Run metadata: what a run trained on, so later comparisons can refuse
// incompatible inputs. Plain `key = value` lines.

struct RunMeta {
  std::string method;
  std::string topology;  // empty for baselines
  std::string dataset;   // canonical source+partition description
  std::string network;   // canonical layer-list description
  std::string transport;
  std::uint32_t epochs = 0;
  std::uint32_t clients = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> weight_roles;  // frame order inside weights file
};

inline std::string meta_to_string(const RunMeta& m) {
  std::ostringstream os;
  os << "method = " << m.method << '\n'
     << "topology = " << m.topology << '\n'
     << "dataset = " << m.dataset << '\n'
     << "network = " << m.network << '\n'
     << "transport = " << m.transport << '\n'
     << "epochs = " << m.epochs << '\n'
     << "clients = " << m.clients << '\n'
     << "seed = " << m.seed << '\n'
     << "weight_roles = ";
  for (std::size_t i = 0; i < m.weight_roles.size(); ++i)
    os << (i ? "," : "") << m.weight_roles[i];
  os << '\n';
  return os.str();
}

inline RunMeta parse_run_meta(const std::string& content) {
  RunMeta m;
  std::istringstream is(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("run meta line " + std::to_string(line_no) + ": expected key = value");
    auto trim = [](std::string s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
      return s;
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key == "method") m.method = val;
    else if (key == "topology") m.topology = val;
    else if (key == "dataset") m.dataset = val;
    else if (key == "network") m.network = val;
    else if (key == "transport") m.transport = val;
    else if (key == "epochs") m.epochs = static_cast<std::uint32_t>(std::stoull(val));
    else if (key == "clients") m.clients = static_cast<std::uint32_t>(std::stoull(val));
    else if (key == "seed") m.seed = std::stoull(val);
    else if (key == "weight_roles") {
      std::string cur;
      for (char ch : val) {
        if (ch == ',') {
          if (!cur.empty()) m.weight_roles.push_back(cur);
          cur.clear();
        } else {
          cur += ch;
        }
      }
      if (!cur.empty()) m.weight_roles.push_back(cur);
    } else {
      throw DataError("run meta line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Weights file: a flat sequence of weight frames, one per role, in the order
// listed by RunMeta::weight_roles. Each frame is byte-identical to what the
// role would put on the wire.

inline std::vector<std::uint8_t> weights_file_bytes(
    const std::vector<std::vector<Tensor>>& per_role) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < per_role.size(); ++i) {
    Frame f = make_weights_frame(0, static_cast<std::uint16_t>(i), per_role[i]);
    auto bytes = encode_frame(f);
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

inline std::vector<std::vector<Tensor>> parse_weights_file(
    std::span<const std::uint8_t> bytes) {
  std::vector<std::vector<Tensor>> out;
  std::size_t at = 0;
  while (at < bytes.size()) {
    if (bytes.size() - at < kHeaderSize)
      throw DecodeError(DecodeError::Kind::LengthMismatch, at,
                        "weights file truncated inside a frame header");
    std::size_t off = at + 12;  // payload length field of the frame header
    std::uint32_t payload_len = wire_detail::get_u32(bytes, off);
    std::size_t total = kHeaderSize + payload_len;
    if (bytes.size() - at < total)
      throw DecodeError(DecodeError::Kind::LengthMismatch, at,
                        "weights file truncated inside a frame payload");
    Frame f = decode_frame(bytes.subspan(at, total));
    if (f.type != FrameType::Weights)
      throw DecodeError(DecodeError::Kind::UnknownFrameType, at,
                        std::string("weights file frame has type ") + frame_type_name(f.type));
    out.push_back(parse_weights_payload(f.payload));
    at += total;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Small file helpers shared by the run lifecycle.

inline void write_text_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot open '" + p.string() + "' for writing");
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!os) throw DataError("failed writing '" + p.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw DataError("cannot open '" + p.string() + "'");
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

inline void write_binary_file(const std::filesystem::path& p,
                              std::span<const std::uint8_t> bytes) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot open '" + p.string() + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("failed writing '" + p.string() + "'");
}

inline std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw DataError("cannot open '" + p.string() + "'");
  std::vector<std::uint8_t> out((std::istreambuf_iterator<char>(is)),
                                std::istreambuf_iterator<char>());
  return out;
}

}  // namespace splitnn
