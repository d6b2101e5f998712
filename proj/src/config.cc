/**
 * Copyright 2026 The FDML Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fdml/config.h"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "fdml/errors.h"

namespace fdml {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw ConfigError("bad value '" + value + "' for " + key);
  }
  return out;
}

double parse_nonneg(const std::string& key, const std::string& value) {
  const double v = parse_number<double>(key, value);
  if (!(v >= 0.0)) throw ConfigError(key + " must be non-negative");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") {
    return true;
  }
  if (value == "false" || value == "0" || value == "no" || value == "off") {
    return false;
  }
  throw ConfigError("bad boolean '" + value + "' for " + key);
}

std::vector<std::size_t> parse_sizes(const std::string& key,
                                     const std::string& value) {
  std::vector<std::size_t> sizes;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    sizes.push_back(parse_number<std::size_t>(key, trim(item)));
  }
  return sizes;
}

SubModelSpec::Kind parse_model(const std::string& value) {
  if (value == "lr") return SubModelSpec::Kind::kLinear;
  if (value == "nn") return SubModelSpec::Kind::kFeedForward;
  throw ConfigError("unknown model '" + value + "' (expected lr or nn)");
}

CarrierKind parse_carrier(const std::string& value) {
  if (value == "inprocess") return CarrierKind::kInProcess;
  if (value == "socket") return CarrierKind::kSocket;
  throw ConfigError("unknown carrier '" + value + "'");
}

const std::vector<std::string> kModes = {
    "local", "centralized", "fdml", "serve-coordinator", "serve-worker"};

using Setter = std::function<void(RunConfig&, const std::string&,
                                  const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  std::string name;
  Setter set;
  Getter get;
};

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"mode",
       [](RunConfig& c, const std::string&, const std::string& v) {
         if (std::find(kModes.begin(), kModes.end(), v) == kModes.end()) {
           throw ConfigError("unknown mode '" + v + "'");
         }
         c.mode = v;
       },
       [](const RunConfig& c) { return c.mode; }},
      {"data",
       [](RunConfig& c, const std::string&, const std::string& v) { c.data = v; },
       [](const RunConfig& c) { return c.data; }},
      {"data_dir",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.data_dir = v;
       },
       [](const RunConfig& c) { return c.data_dir; }},
      {"train",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.train_path = v;
       },
       [](const RunConfig& c) { return c.train_path; }},
      {"test",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.test_path = v;
       },
       [](const RunConfig& c) { return c.test_path; }},
      {"dim",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.dim = parse_number<std::size_t>(k, v);
       },
       [](const RunConfig& c) { return std::to_string(c.dim); }},
      {"model",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.training.model = parse_model(v);
       },
       [](const RunConfig& c) {
         return std::string(c.training.model == SubModelSpec::Kind::kLinear
                                ? "lr"
                                : "nn");
       }},
      {"parties",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.parties = parse_number<std::size_t>(k, v);
         if (c.training.parties == 0) throw ConfigError("parties must be >= 1");
       },
       [](const RunConfig& c) { return std::to_string(c.training.parties); }},
      {"partition_sizes",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.partition_sizes = parse_sizes(k, v);
       },
       [](const RunConfig& c) { return join(c.training.partition_sizes); }},
      {"partition_file",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.training.partition_file = v;
       },
       [](const RunConfig& c) { return c.training.partition_file; }},
      {"tau",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.tau = parse_number<std::uint64_t>(k, v);
       },
       [](const RunConfig& c) { return std::to_string(c.training.tau); }},
      {"eta",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.eta = parse_number<double>(k, v);
         if (!(c.training.eta > 0.0)) throw ConfigError("eta must be positive");
       },
       [](const RunConfig& c) { return fmt(c.training.eta); }},
      {"lambda",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.lambda = parse_nonneg(k, v);
       },
       [](const RunConfig& c) { return fmt(c.training.lambda); }},
      {"batch",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.batch = parse_number<std::size_t>(k, v);
         if (c.training.batch == 0) throw ConfigError("batch must be >= 1");
       },
       [](const RunConfig& c) { return std::to_string(c.training.batch); }},
      {"epochs",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.epochs = parse_number<std::size_t>(k, v);
       },
       [](const RunConfig& c) { return std::to_string(c.training.epochs); }},
      {"seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.seed = parse_number<std::uint64_t>(k, v);
       },
       [](const RunConfig& c) { return std::to_string(c.training.seed); }},
      {"reduction",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.training.reduction = parse_reduction(v);
       },
       [](const RunConfig& c) { return to_string(c.training.reduction); }},
      {"deterministic",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.deterministic = parse_bool(k, v);
       },
       [](const RunConfig& c) {
         return std::string(c.training.deterministic ? "true" : "false");
       }},
      {"use_bias",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.use_bias = parse_bool(k, v);
       },
       [](const RunConfig& c) {
         return std::string(c.training.use_bias ? "true" : "false");
       }},
      {"hidden",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.hidden = parse_number<std::size_t>(k, v);
         if (c.training.hidden == 0) throw ConfigError("hidden must be >= 1");
       },
       [](const RunConfig& c) { return std::to_string(c.training.hidden); }},
      {"activation",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.training.activation = parse_activation(v);
       },
       [](const RunConfig& c) { return to_string(c.training.activation); }},
      {"noise_mechanism",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.training.noise.mechanism = parse_noise_mechanism(v);
       },
       [](const RunConfig& c) { return to_string(c.training.noise.mechanism); }},
      {"noise_level",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.noise.level = parse_nonneg(k, v);
       },
       [](const RunConfig& c) { return fmt(c.training.noise.level); }},
      {"noise_seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.noise.seed = parse_number<std::uint64_t>(k, v);
       },
       [](const RunConfig& c) { return std::to_string(c.training.noise.seed); }},
      {"carrier",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.training.carrier = parse_carrier(v);
       },
       [](const RunConfig& c) {
         return std::string(c.training.carrier == CarrierKind::kSocket
                                ? "socket"
                                : "inprocess");
       }},
      {"max_rejections",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.training.retry.max_rejections = parse_number<std::uint64_t>(k, v);
       },
       [](const RunConfig& c) {
         return std::to_string(c.training.retry.max_rejections);
       }},
      {"out",
       [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; },
       [](const RunConfig& c) { return c.out; }},
      {"listen",
       [](RunConfig& c, const std::string&, const std::string& v) {
         parse_endpoint(v);
         c.listen = v;
       },
       [](const RunConfig& c) { return c.listen; }},
      {"coordinator",
       [](RunConfig& c, const std::string&, const std::string& v) {
         parse_endpoint(v);
         c.coordinator = v;
       },
       [](const RunConfig& c) { return c.coordinator; }},
      {"status_listen",
       [](RunConfig& c, const std::string&, const std::string& v) {
         if (!v.empty()) parse_endpoint(v);
         c.status_listen = v;
       },
       [](const RunConfig& c) { return c.status_listen; }},
      {"party_id",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.party_id = parse_number<int>(k, v);
         if (c.party_id < 0) throw ConfigError("party_id must be >= 0");
       },
       [](const RunConfig& c) { return std::to_string(c.party_id); }},
  };
  return table;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected key = value", number);
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw ParseError("empty key", number);
    out[std::move(key)] = trim(std::string_view(body).substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_key_values(in);
}

void apply_setting(RunConfig& config, const std::string& key,
                   const std::string& value) {
  for (const Key& k : keys()) {
    if (k.name == key) {
      k.set(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const Key& k : keys()) v.push_back(k.name);
    return v;
  }();
  return names;
}

void finalize(RunConfig& config) {
  TrainingConfig& t = config.training;
  if (config.mode == "local") t.scheme = Scheme::kLocal;
  if (config.mode == "centralized") t.scheme = Scheme::kCentralized;
  if (config.mode == "fdml" || config.mode.rfind("serve-", 0) == 0) {
    t.scheme = Scheme::kFdml;
  }
  if (config.data.empty() && config.train_path.empty() &&
      config.test_path.empty()) {
    config.data = "a9a";
  }
  if (config.data == "a9a") {
    const std::filesystem::path dir = config.data_dir;
    if (config.train_path.empty()) config.train_path = (dir / "a9a").string();
    if (config.test_path.empty()) config.test_path = (dir / "a9a.t").string();
    if (config.dim == 0) config.dim = 124;
    if (t.partition_sizes.empty() && t.partition_file.empty() &&
        t.parties == 2) {
      t.partition_sizes = {67, 57};
    }
  } else if (!config.data.empty()) {
    throw ConfigError("unknown data preset '" + config.data +
                      "' (set train and test paths instead)");
  }
  if (!t.partition_sizes.empty()) t.parties = t.partition_sizes.size();
}

DatasetSplit load_data(const RunConfig& config) {
  if (config.train_path.empty() || config.test_path.empty()) {
    throw ConfigError("no data: set --data a9a or train/test paths");
  }
  return load_split(config.train_path, config.test_path, config.dim);
}

std::string dump(const RunConfig& config) {
  std::string out;
  for (const Key& k : keys()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

}  // namespace fdml
