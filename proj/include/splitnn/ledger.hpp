// SPDX-License-Identifier: Apache-2.0
#pragma once

// Per-role resource ledgers: cumulative FLOPs by direction and bytes by frame
// type. Counters only ever increase; the run-level exactness check compares
// measured ledgers against predicted ones field by field.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "splitnn/wire.hpp"

namespace splitnn {

struct ResourceLedger {
  std::string role;
  std::uint64_t flops_forward = 0;
  std::uint64_t flops_backward = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  // indexed by FrameType value 1..6; slot 0 unused
  std::array<std::uint64_t, 7> sent_by_type{};
  std::array<std::uint64_t, 7> received_by_type{};

  void add_sent(FrameType t, std::uint64_t n) {
    bytes_sent += n;
    sent_by_type[static_cast<std::size_t>(t)] += n;
  }
  void add_received(FrameType t, std::uint64_t n) {
    bytes_received += n;
    received_by_type[static_cast<std::size_t>(t)] += n;
  }
  std::uint64_t flops_total() const { return flops_forward + flops_backward; }
  std::uint64_t bytes_total() const { return bytes_sent + bytes_received; }

  // totals must equal the sum of their per-type breakdowns
  bool internally_consistent() const {
    std::uint64_t s = 0, r = 0;
    for (auto v : sent_by_type) s += v;
    for (auto v : received_by_type) r += v;
    return s == bytes_sent && r == bytes_received;
  }

  bool operator==(const ResourceLedger&) const = default;
};

struct LedgerSet {
  std::map<std::string, ResourceLedger> by_role;

  ResourceLedger& at(const std::string& role) {
    auto it = by_role.find(role);
    if (it == by_role.end()) {
      ResourceLedger l;
      l.role = role;
      it = by_role.emplace(role, std::move(l)).first;
    }
    return it->second;
  }
  const ResourceLedger* find(const std::string& role) const {
    auto it = by_role.find(role);
    return it == by_role.end() ? nullptr : &it->second;
  }

  bool operator==(const LedgerSet&) const = default;
};

// Field-by-field comparison; each line names role, counter, and both values.
inline std::vector<std::string> ledger_diff(const LedgerSet& measured,
                                            const LedgerSet& predicted) {
  std::vector<std::string> out;
  auto cmp = [&out](const std::string& role, const char* counter, std::uint64_t m,
                    std::uint64_t p) {
    if (m != p)
      out.push_back(role + "." + counter + ": measured " + std::to_string(m) +
                    " vs predicted " + std::to_string(p));
  };
  auto roles = [](const LedgerSet& a, const LedgerSet& b) {
    std::map<std::string, int> ids;
    for (const auto& [k, v] : a.by_role) ids[k];
    for (const auto& [k, v] : b.by_role) ids[k];
    return ids;
  };
  static const char* type_names[7] = {"?",      "activation", "gradient", "weights",
                                      "logits", "labels",     "control"};
  for (const auto& [role, _] : roles(measured, predicted)) {
    ResourceLedger m = measured.find(role) ? *measured.find(role) : ResourceLedger{};
    ResourceLedger p = predicted.find(role) ? *predicted.find(role) : ResourceLedger{};
    cmp(role, "flops_forward", m.flops_forward, p.flops_forward);
    cmp(role, "flops_backward", m.flops_backward, p.flops_backward);
    cmp(role, "bytes_sent", m.bytes_sent, p.bytes_sent);
    cmp(role, "bytes_received", m.bytes_received, p.bytes_received);
    for (std::size_t t = 1; t <= 6; ++t) {
      cmp(role, (std::string("sent.") + type_names[t]).c_str(), m.sent_by_type[t],
          p.sent_by_type[t]);
      cmp(role, (std::string("received.") + type_names[t]).c_str(), m.received_by_type[t],
          p.received_by_type[t]);
    }
  }
  return out;
}

}  // namespace splitnn
