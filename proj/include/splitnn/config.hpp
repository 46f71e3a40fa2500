// SPDX-License-Identifier: Apache-2.0
#pragma once

// Experiment configuration: a flat `[section]` / `key = value` text format,
// parsed without external dependencies. Parsing throws on malformed syntax,
// unknown keys, or bad literals; validate_experiment_config() then returns
// every semantic violation at once so a user can fix a file in one pass.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "splitnn/dataset.hpp"
#include "splitnn/engine.hpp"

namespace splitnn {

enum class Method : std::uint8_t { SplitNN, Federated, LargeBatch };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::SplitNN: return "splitnn";
    case Method::Federated: return "federated";
    case Method::LargeBatch: return "largebatch";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "splitnn") return Method::SplitNN;
  if (s == "federated") return Method::Federated;
  if (s == "largebatch") return Method::LargeBatch;
  throw ConfigError("unknown method '" + s + "' (splitnn | federated | largebatch)");
}

enum class TransportKind : std::uint8_t { InProcess, Tcp };

inline const char* transport_name(TransportKind t) {
  return t == TransportKind::InProcess ? "inprocess" : "tcp";
}

inline TransportKind parse_transport(const std::string& s) {
  if (s == "inprocess") return TransportKind::InProcess;
  if (s == "tcp") return TransportKind::Tcp;
  throw ConfigError("unknown transport '" + s + "' (inprocess | tcp)");
}

struct ExperimentConfig {
  Method method = Method::SplitNN;
  Topology topology = Topology::Vanilla;
  std::vector<LayerSpec> network;
  std::vector<std::size_t> cuts;
  std::vector<std::vector<LayerSpec>> heads;  // multi_task only
  Shape input_shape;                          // per-sample feature shape
  DataSource source;
  PartitionSpec partition;
  EngineOptions options;
  TransportKind transport = TransportKind::InProcess;
  std::string output_dir = "out";

  // which optional keys the file actually set (for cross-field checks)
  bool topology_given = false;
  bool cuts_given = false;
  bool heads_given = false;
  bool alpha_given = false;
  bool widths_given = false;
};

// ---------------------------------------------------------------------------
// Layer list grammar: whitespace-separated tokens, each `name` or
// `name(arg,...)`.
//   dense(in,out[,nobias])   relu   conv2d(in_ch,out_ch,kh,kw[,stride])
//   maxpool2d(window[,stride])   flatten   concat   softmax_ce(classes)

namespace config_detail {

inline std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(cur), cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::uint32_t arg_u32(const std::string& tok, const std::vector<std::string>& args,
                             std::size_t i) {
  const std::string& s = args.at(i);
  if (s.empty()) throw ConfigError("layer '" + tok + "': empty argument");
  std::uint64_t v = 0;
  for (char ch : s) {
    if (ch < '0' || ch > '9')
      throw ConfigError("layer '" + tok + "': expected a number, got '" + s + "'");
    v = v * 10 + static_cast<std::uint64_t>(ch - '0');
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace config_detail

inline LayerSpec parse_layer_token(const std::string& tok) {
  using config_detail::arg_u32;
  std::string name = tok;
  std::vector<std::string> args;
  auto open = tok.find('(');
  if (open != std::string::npos) {
    if (tok.back() != ')') throw ConfigError("layer '" + tok + "': missing ')'");
    name = tok.substr(0, open);
    std::string inner = tok.substr(open + 1, tok.size() - open - 2);
    std::string cur;
    for (char ch : inner) {
      if (ch == ',') {
        args.push_back(cur);
        cur.clear();
      } else if (!std::isspace(static_cast<unsigned char>(ch))) {
        cur += ch;
      }
    }
    if (!cur.empty() || !args.empty()) args.push_back(cur);
  }
  auto want = [&](std::size_t lo, std::size_t hi) {
    if (args.size() < lo || args.size() > hi)
      throw ConfigError("layer '" + tok + "': wrong number of arguments");
  };
  if (name == "dense") {
    want(2, 3);
    bool bias = true;
    if (args.size() == 3) {
      if (args[2] != "nobias")
        throw ConfigError("layer '" + tok + "': third argument must be 'nobias'");
      bias = false;
    }
    return dense(arg_u32(tok, args, 0), arg_u32(tok, args, 1), bias);
  }
  if (name == "relu") {
    want(0, 0);
    return relu();
  }
  if (name == "conv2d") {
    want(4, 5);
    return conv2d(arg_u32(tok, args, 0), arg_u32(tok, args, 1), arg_u32(tok, args, 2),
                  arg_u32(tok, args, 3), args.size() == 5 ? arg_u32(tok, args, 4) : 1);
  }
  if (name == "maxpool2d") {
    want(1, 2);
    std::uint32_t w = arg_u32(tok, args, 0);
    return maxpool2d(w, args.size() == 2 ? arg_u32(tok, args, 1) : w);
  }
  if (name == "flatten") {
    want(0, 0);
    return flatten();
  }
  if (name == "concat") {
    want(0, 0);  // widths come from the partition plan
    return concat({});
  }
  if (name == "softmax_ce") {
    want(1, 1);
    return softmax_ce(arg_u32(tok, args, 0));
  }
  throw ConfigError("unknown layer '" + name + "' in '" + tok + "'");
}

inline std::vector<LayerSpec> parse_layer_list(const std::string& s) {
  std::vector<LayerSpec> out;
  for (const auto& tok : config_detail::split_tokens(s)) out.push_back(parse_layer_token(tok));
  if (out.empty()) throw ConfigError("layer list is empty");
  return out;
}

// `heads = <layers> | <layers> | ...`
inline std::vector<std::vector<LayerSpec>> parse_head_lists(const std::string& s) {
  std::vector<std::vector<LayerSpec>> out;
  std::string cur;
  auto flush = [&] {
    out.push_back(parse_layer_list(cur));
    cur.clear();
  };
  for (char ch : s) {
    if (ch == '|')
      flush();
    else
      cur += ch;
  }
  flush();
  return out;
}

inline std::string layer_signature(const LayerSpec& s) {
  auto u = [](std::uint32_t v) { return std::to_string(v); };
  switch (s.kind) {
    case LayerKind::Dense:
      return "dense(" + u(s.in_dim) + "," + u(s.out_dim) + (s.has_bias ? "" : ",nobias") + ")";
    case LayerKind::ReLU: return "relu";
    case LayerKind::Conv2D:
      return "conv2d(" + u(s.in_ch) + "," + u(s.out_ch) + "," + u(s.kernel_h) + "," +
             u(s.kernel_w) + (s.stride != 1 ? "," + u(s.stride) : "") + ")";
    case LayerKind::MaxPool2D:
      return "maxpool2d(" + u(s.window) + (s.stride != s.window ? "," + u(s.stride) : "") + ")";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Concat: return "concat";
    case LayerKind::SoftmaxCrossEntropy: return "softmax_ce(" + u(s.num_classes) + ")";
  }
  return "?";
}

inline std::string network_signature(const std::vector<LayerSpec>& net) {
  std::string out;
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (i) out += ' ';
    out += layer_signature(net[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// INI-style reader.

namespace config_detail {

struct IniEntry {
  std::string value;
  std::size_t line = 0;
  bool used = false;
};

using IniMap = std::map<std::string, IniEntry>;  // "section.key" -> entry

inline std::string trim(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

inline IniMap parse_ini(const std::string& text) {
  IniMap map;
  std::istringstream is(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) + ": unclosed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty())
        throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    if (section.empty())
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": key outside of any [section]");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    std::string full = section + "." + key;
    if (map.count(full))
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + full +
                        "' (first at line " + std::to_string(map[full].line) + ")");
    map[full] = {value, line_no, false};
  }
  return map;
}

struct IniReader {
  IniMap& map;

  const IniEntry* find(const std::string& key) {
    auto it = map.find(key);
    if (it == map.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }
  bool has(const std::string& key) const { return map.count(key) != 0; }

  std::string str(const std::string& key, const std::string& fallback) {
    const IniEntry* e = find(key);
    return e ? e->value : fallback;
  }
  std::string required(const std::string& key) {
    const IniEntry* e = find(key);
    if (!e) throw ConfigError("config is missing required key '" + key + "'");
    return e->value;
  }
  std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
    const IniEntry* e = find(key);
    if (!e) return fallback;
    try {
      std::size_t pos = 0;
      std::uint64_t v = std::stoull(e->value, &pos);
      if (pos != e->value.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config line " + std::to_string(e->line) + ": '" + key +
                        "' expects an unsigned integer, got '" + e->value + "'");
    }
  }
  std::uint32_t u32(const std::string& key, std::uint32_t fallback) {
    return static_cast<std::uint32_t>(u64(key, fallback));
  }
  float f32(const std::string& key, float fallback) {
    const IniEntry* e = find(key);
    if (!e) return fallback;
    try {
      std::size_t pos = 0;
      float v = std::stof(e->value, &pos);
      if (pos != e->value.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config line " + std::to_string(e->line) + ": '" + key +
                        "' expects a number, got '" + e->value + "'");
    }
  }
  double f64(const std::string& key, double fallback) {
    return static_cast<double>(f32(key, static_cast<float>(fallback)));
  }
  bool boolean(const std::string& key, bool fallback) {
    const IniEntry* e = find(key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
    if (e->value == "false" || e->value == "0" || e->value == "no") return false;
    throw ConfigError("config line " + std::to_string(e->line) + ": '" + key +
                      "' expects true or false, got '" + e->value + "'");
  }
  std::vector<std::uint32_t> u32_list(const std::string& key) {
    const IniEntry* e = find(key);
    std::vector<std::uint32_t> out;
    if (!e) return out;
    std::string cur;
    auto push = [&] {
      cur = trim(cur);
      if (cur.empty()) return;
      try {
        std::size_t pos = 0;
        out.push_back(static_cast<std::uint32_t>(std::stoul(cur, &pos)));
        if (pos != cur.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(e->line) + ": '" + key +
                          "' expects comma-separated numbers, got '" + cur + "'");
      }
      cur.clear();
    };
    for (char ch : e->value) {
      if (ch == ',')
        push();
      else
        cur += ch;
    }
    push();
    return out;
  }
};

}  // namespace config_detail

inline ExperimentConfig parse_experiment_config(const std::string& text) {
  using namespace config_detail;
  IniMap map = parse_ini(text);
  IniReader ini{map};
  ExperimentConfig cfg;

  cfg.method = parse_method(ini.required("run.method"));
  cfg.topology_given = ini.has("run.topology");
  if (cfg.topology_given) cfg.topology = parse_topology(ini.required("run.topology"));
  cfg.options.epochs = ini.u32("run.epochs", 10);
  cfg.options.batch = ini.u32("run.batch", 32);
  cfg.options.lr = ini.f32("run.lr", 0.05f);
  cfg.options.local_epochs = ini.u32("run.local_epochs", 1);
  cfg.options.batches_per_turn = ini.u32("run.batches_per_turn", 1);
  cfg.options.sync = parse_sync_mode(ini.str("run.sync", "server_mediated"));
  std::string merge = ini.str("run.merge", "sum");
  if (merge != "sum" && merge != "mean")
    throw ConfigError("run.merge must be 'sum' or 'mean', got '" + merge + "'");
  cfg.options.merge_mean = merge == "mean";
  cfg.options.eval_each_epoch = ini.boolean("run.eval_each_epoch", true);
  cfg.options.seed = ini.u64("run.seed", 0);
  cfg.output_dir = ini.str("run.output_dir", "out");

  std::string source = ini.str("data.source", "synthetic");
  if (source == "synthetic") cfg.source.kind = SourceKind::Synthetic;
  else if (source == "mnist_idx") cfg.source.kind = SourceKind::MnistIdx;
  else if (source == "csv") cfg.source.kind = SourceKind::Csv;
  else if (source == "cifar_bin") cfg.source.kind = SourceKind::CifarBin;
  else
    throw ConfigError("unknown data source '" + source +
                      "' (synthetic | mnist_idx | csv | cifar_bin)");
  // Read every source key regardless of kind so mixing sources is reported by
  // validation (with every other violation) rather than as an unknown key.
  cfg.source.n = ini.u32("data.samples", 0);
  cfg.source.dims = ini.u32("data.dims", 0);
  cfg.source.classes = ini.u32("data.classes", 0);
  cfg.source.seed = ini.u64("data.data_seed", 1);
  cfg.source.images_path = ini.str("data.images", "");
  cfg.source.labels_path = ini.str("data.labels", "");
  cfg.source.path = ini.str("data.path", "");

  std::string part = ini.str("data.partition", "equal");
  if (part == "equal") cfg.partition.kind = PartitionKind::HorizontalEqual;
  else if (part == "dirichlet") cfg.partition.kind = PartitionKind::HorizontalDirichlet;
  else if (part == "vertical") cfg.partition.kind = PartitionKind::VerticalColumns;
  else
    throw ConfigError("unknown partition '" + part + "' (equal | dirichlet | vertical)");
  cfg.partition.num_clients = ini.u32("data.clients", 1);
  cfg.alpha_given = ini.has("data.alpha");
  cfg.partition.alpha = ini.f64("data.alpha", 1.0);
  cfg.widths_given = ini.has("data.feature_widths");
  cfg.partition.feature_widths = ini.u32_list("data.feature_widths");

  for (auto v : ini.u32_list("model.input")) cfg.input_shape.push_back(v);
  cfg.network = parse_layer_list(ini.required("model.layers"));
  cfg.cuts_given = ini.has("model.cuts");
  for (auto v : ini.u32_list("model.cuts")) cfg.cuts.push_back(v);
  cfg.heads_given = ini.has("model.heads");
  if (cfg.heads_given) cfg.heads = parse_head_lists(ini.required("model.heads"));

  cfg.transport = parse_transport(ini.str("transport.kind", "inprocess"));

  for (const auto& [key, entry] : map)
    if (!entry.used)
      throw ConfigError("config line " + std::to_string(entry.line) + ": unknown key '" + key +
                        "'");
  return cfg;
}

// Canonical identity strings stored in run metadata; comparisons refuse runs
// whose strings differ.
inline std::string dataset_signature(const ExperimentConfig& cfg) {
  std::ostringstream os;
  switch (cfg.source.kind) {
    case SourceKind::Synthetic:
      os << "synthetic(n=" << cfg.source.n << ",dims=" << cfg.source.dims
         << ",classes=" << cfg.source.classes << ",seed=" << cfg.source.seed << ")";
      break;
    case SourceKind::MnistIdx:
      os << "mnist_idx(" << cfg.source.images_path << ";" << cfg.source.labels_path << ")";
      break;
    case SourceKind::Csv: os << "csv(" << cfg.source.path << ")"; break;
    case SourceKind::CifarBin: os << "cifar_bin(" << cfg.source.path << ")"; break;
  }
  os << "/";
  switch (cfg.partition.kind) {
    case PartitionKind::HorizontalEqual: os << "equal(clients=" << cfg.partition.num_clients << ")"; break;
    case PartitionKind::HorizontalDirichlet:
      os << "dirichlet(clients=" << cfg.partition.num_clients << ",alpha=" << cfg.partition.alpha
         << ")";
      break;
    case PartitionKind::VerticalColumns: {
      os << "vertical(widths=";
      for (std::size_t i = 0; i < cfg.partition.feature_widths.size(); ++i)
        os << (i ? "," : "") << cfg.partition.feature_widths[i];
      os << ")";
      break;
    }
  }
  return os.str();
}

inline std::string config_network_signature(const ExperimentConfig& cfg) {
  std::string out = network_signature(cfg.network);
  for (const auto& h : cfg.heads) out += " | " + network_signature(h);
  return out;
}

// Every semantic violation, one message each. An empty result means the
// configuration can run.
inline std::vector<std::string> validate_experiment_config(const ExperimentConfig& cfg) {
  std::vector<std::string> bad;
  auto complain = [&](std::string m) { bad.push_back(std::move(m)); };

  if (cfg.options.batch == 0) complain("run.batch must be positive");
  if (cfg.options.epochs == 0) complain("run.epochs must be positive");
  if (cfg.options.local_epochs == 0) complain("run.local_epochs must be positive");
  if (cfg.options.batches_per_turn == 0) complain("run.batches_per_turn must be positive");
  if (!(cfg.options.lr >= 0.0f) || !std::isfinite(cfg.options.lr))
    complain("run.lr must be a finite non-negative number");
  if (cfg.output_dir.empty()) complain("run.output_dir must not be empty");
  if (cfg.partition.num_clients == 0) complain("data.clients must be at least 1");

  bool vertical_topo =
      cfg.topology == Topology::Vertical || cfg.topology == Topology::MultiTask;
  bool vertical_part = cfg.partition.kind == PartitionKind::VerticalColumns;

  if (cfg.method == Method::SplitNN) {
    if (!cfg.cuts_given) complain("model.cuts is required for method = splitnn");
    if (vertical_topo && !vertical_part)
      complain(std::string(topology_name(cfg.topology)) +
               " topology requires data.partition = vertical");
    if (!vertical_topo && vertical_part)
      complain("data.partition = vertical requires a vertically partitioned topology "
               "(vertical or multi_task)");
    if (cfg.heads_given && cfg.topology != Topology::MultiTask)
      complain("model.heads is only meaningful for topology = multi_task");
    if (cfg.topology == Topology::MultiTask && !cfg.heads_given)
      complain("topology = multi_task requires model.heads");
  } else {
    if (cfg.topology_given) complain("run.topology is only meaningful for method = splitnn");
    if (cfg.cuts_given) complain("model.cuts is only meaningful for method = splitnn");
    if (cfg.heads_given) complain("model.heads is only meaningful for method = splitnn");
    if (vertical_part)
      complain("data.partition = vertical is only meaningful for method = splitnn");
  }

  if (cfg.partition.kind == PartitionKind::HorizontalDirichlet && !(cfg.partition.alpha > 0.0))
    complain("data.alpha must be positive for dirichlet partitioning");
  if (cfg.alpha_given && cfg.partition.kind != PartitionKind::HorizontalDirichlet)
    complain("data.alpha is only meaningful for data.partition = dirichlet");
  if (vertical_part) {
    if (cfg.partition.feature_widths.size() != cfg.partition.num_clients)
      complain("data.feature_widths must list one width per client");
  } else if (cfg.widths_given) {
    complain("data.feature_widths is only meaningful for data.partition = vertical");
  }

  switch (cfg.source.kind) {
    case SourceKind::Synthetic: {
      if (cfg.source.n == 0) complain("data.samples must be positive for synthetic data");
      if (cfg.source.dims == 0) complain("data.dims must be positive for synthetic data");
      if (cfg.source.classes < 2) complain("data.classes must be at least 2 for synthetic data");
      if (cfg.source.n > 0 && cfg.partition.num_clients > cfg.source.n &&
          cfg.partition.kind != PartitionKind::VerticalColumns)
        complain("more clients than samples");
      if (vertical_part && cfg.source.dims > 0) {
        std::uint32_t sum = 0;
        for (auto w : cfg.partition.feature_widths) sum += w;
        if (sum != cfg.source.dims)
          complain("data.feature_widths sum to " + std::to_string(sum) + " but data.dims is " +
                   std::to_string(cfg.source.dims));
      }
      if (!cfg.source.images_path.empty() || !cfg.source.labels_path.empty() ||
          !cfg.source.path.empty())
        complain("exactly one dataset source: synthetic data takes no file paths");
      break;
    }
    case SourceKind::MnistIdx:
      if (cfg.source.images_path.empty()) complain("data.images is required for mnist_idx");
      if (cfg.source.labels_path.empty()) complain("data.labels is required for mnist_idx");
      if (!cfg.source.path.empty())
        complain("exactly one dataset source: mnist_idx does not take data.path");
      if (cfg.source.n || cfg.source.dims || cfg.source.classes)
        complain("exactly one dataset source: mnist_idx does not take synthetic parameters");
      break;
    case SourceKind::Csv:
    case SourceKind::CifarBin:
      if (cfg.source.path.empty()) complain("data.path is required for this source");
      if (!cfg.source.images_path.empty() || !cfg.source.labels_path.empty())
        complain("exactly one dataset source: this source does not take data.images/data.labels");
      if (cfg.source.n || cfg.source.dims || cfg.source.classes)
        complain("exactly one dataset source: this source does not take synthetic parameters");
      break;
  }

  if (cfg.input_shape.empty()) complain("model.input must list the per-sample shape");
  if (cfg.network.empty()) complain("model.layers must not be empty");

  // Dry-build the plan (split) or the baseline chain so structural errors
  // (bad cuts, shape mismatches, missing loss tail) surface here too.
  if (bad.empty()) {
    try {
      if (cfg.method == Method::SplitNN) {
        PlanExtras extras;
        extras.feature_widths = cfg.partition.feature_widths;
        extras.heads = cfg.heads;
        build_plan(cfg.topology, cfg.network, cfg.cuts, cfg.partition.num_clients,
                   cfg.input_shape, extras);
      } else {
        auto chain = auto_name_layers(cfg.network);
        if (chain.empty() || chain.back().kind != LayerKind::SoftmaxCrossEntropy)
          throw PlanError("baseline network must end with the loss layer");
        for (const auto& l : chain)
          if (l.kind == LayerKind::Concat)
            throw PlanError("baseline network cannot contain concat");
        resolve_shapes(chain, cfg.input_shape);
      }
    } catch (const Error& e) {
      complain(e.what());
    }
  }
  return bad;
}

}  // namespace splitnn
