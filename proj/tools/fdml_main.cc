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

// fdml: runs the local / centralized / FDML training schemes, the
// distributed coordinator and worker processes, and the verify suites.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fdml/config.h"
#include "fdml/errors.h"
#include "fdml/verify.h"

#ifndef FDML_DATA_DIR
#define FDML_DATA_DIR "data"
#endif

namespace {

using fdml::RunConfig;

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("fdml");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  const char* env = std::getenv("FDML_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    if (level != "info") {
      spdlog::warn("FDML_LOG={} not recognised, using info", level);
    }
    spdlog::set_level(spdlog::level::info);
  }
}

// Flag values, applied over the config file as key = value settings.
struct Flags {
  std::string config_path;
  std::vector<std::pair<std::string, std::optional<std::string>>> values;
  std::vector<std::string> sets;
  bool deterministic = false;

  std::optional<std::string>& slot(const std::string& key) {
    values.emplace_back(key, std::nullopt);
    return values.back().second;
  }
};

void add_config_flags(CLI::App& app, Flags& flags) {
  // Reserve first: options hold pointers into `values`.
  flags.values.reserve(32);
  struct Spec {
    const char* flag;
    const char* key;
    const char* help;
  };
  static const Spec specs[] = {
      {"--mode", "mode", "local | centralized | fdml | serve-coordinator | serve-worker"},
      {"--data", "data", "dataset preset (a9a)"},
      {"--train", "train", "training svmlight file"},
      {"--test", "test", "test svmlight file"},
      {"--dim", "dim", "feature dimension (0: infer)"},
      {"--model", "model", "lr | nn"},
      {"--parties", "parties", "number of parties m"},
      {"--partition", "partition_file", "partition JSON file"},
      {"--partition-sizes", "partition_sizes", "contiguous slice sizes, e.g. 67,57"},
      {"--tau", "tau", "staleness bound"},
      {"--eta", "eta", "base learning rate (eta_t = eta / sqrt(t))"},
      {"--lambda", "lambda", "L2 regularization"},
      {"--batch", "batch", "mini-batch size"},
      {"--epochs", "epochs", "epochs"},
      {"--seed", "seed", "shared seed"},
      {"--noise-level", "noise_level", "noise scale b"},
      {"--noise-mechanism", "noise_mechanism", "laplace | gaussian | none"},
      {"--noise-seed", "noise_seed", "noise seed"},
      {"--reduction", "reduction", "sum | mean"},
      {"--hidden", "hidden", "hidden units of the nn sub-model"},
      {"--activation", "activation", "relu | tanh"},
      {"--carrier", "carrier", "inprocess | socket (fdml mode)"},
      {"--out", "out", "output path"},
      {"--listen", "listen", "coordinator HOST:PORT"},
      {"--coordinator", "coordinator", "coordinator HOST:PORT for workers"},
      {"--status-listen", "status_listen", "HOST:PORT for the HTTP status endpoint"},
      {"--party-id", "party_id", "this worker's party index"},
  };
  for (const Spec& s : specs) {
    auto& slot = flags.slot(s.key);
    app.add_option_function<std::string>(
        s.flag, [&slot](const std::string& v) { slot = v; }, s.help);
  }
  app.add_flag("--deterministic", flags.deterministic,
               "round-robin single-context execution");
  app.add_option("--config", flags.config_path, "key = value config file");
  app.add_option("--set", flags.sets, "extra KEY=VALUE settings");
}

RunConfig assemble(const Flags& flags) {
  RunConfig config;
  config.data_dir = FDML_DATA_DIR;
  if (!flags.config_path.empty()) {
    for (const auto& [k, v] : fdml::load_key_values(flags.config_path)) {
      fdml::apply_setting(config, k, v);
    }
  }
  for (const auto& [k, v] : flags.values) {
    if (v) fdml::apply_setting(config, k, *v);
  }
  if (flags.deterministic) fdml::apply_setting(config, "deterministic", "true");
  for (const std::string& kv : flags.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw fdml::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    }
    fdml::apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  fdml::finalize(config);
  return config;
}

void write_rows(const RunConfig& config,
                const std::vector<fdml::ReportRow>& rows) {
  if (!config.out.empty()) {
    std::ofstream out(config.out);
    if (!out) throw fdml::Error("cannot write " + config.out);
    fdml::write_report_csv(out, rows);
    spdlog::info("wrote {} rows to {}", rows.size(), config.out);
  }
  std::cout << fdml::summary_table(rows);
}

int run_training_mode(const RunConfig& config) {
  const fdml::DatasetSplit data = fdml::load_data(config);
  spdlog::info("{}: {} train / {} test rows, dim {}", config.mode,
               data.train.size(), data.test.size(), data.dim);
  const fdml::TrainingResult result = fdml::run_training(config.training, data);
  if (!result.coordinator_status.empty()) {
    spdlog::debug("coordinator status:\n{}", result.coordinator_status);
  }
  spdlog::info("finished in {:.2f} s, {} pull rejections", result.seconds,
               result.rejections);
  write_rows(config, fdml::report_rows(config.training, result));
  return 0;
}

std::shared_ptr<const fdml::SampleSchedule> make_schedule(
    const RunConfig& config, std::size_t samples) {
  return std::make_shared<const fdml::SampleSchedule>(
      fdml::SampleSchedule::generate(config.training.seed, samples,
                                     config.training.batch,
                                     config.training.epochs));
}

int serve_coordinator(const RunConfig& config) {
  const fdml::DatasetSplit data = fdml::load_data(config);
  const fdml::TrainingConfig& t = config.training;
  const std::size_t m = fdml::make_partition(t, data.dim).parties();
  fdml::SspCoordinator coordinator(data.train.size(), m,
                                   t.deterministic ? 0 : t.tau);
  coordinator.set_schedule(make_schedule(config, data.train.size()));
  fdml::CoordinatorService service(coordinator);

  const auto [host, port] = fdml::parse_endpoint(config.listen);
  fdml::SocketServer server(service, host, port);
  spdlog::info("coordinator for m={} n={} tau={} listening on {}:{}", m,
               data.train.size(), coordinator.tau(), host, server.port());

  std::unique_ptr<httplib::Server> status;
  std::thread status_thread;
  if (!config.status_listen.empty()) {
    const auto [shost, sport] = fdml::parse_endpoint(config.status_listen);
    status = std::make_unique<httplib::Server>();
    status->Get("/status", [&coordinator](const httplib::Request&,
                                          httplib::Response& res) {
      res.set_content(coordinator.status_text(), "text/plain");
    });
    if (!status->bind_to_port(shost.c_str(), sport)) {
      throw fdml::TransportError("cannot bind status endpoint " +
                                 config.status_listen);
    }
    status_thread = std::thread([&] { status->listen_after_bind(); });
    spdlog::info("status endpoint on http://{}/status", config.status_listen);
  }

  coordinator.wait_until_finished();
  // Let the workers read their final replies and hang up.
  if (!server.drain(std::chrono::seconds(30))) {
    spdlog::warn("workers still connected after training finished");
  }
  server.stop();
  if (status) {
    status->stop();
    status_thread.join();
  }
  std::cout << coordinator.status_text();
  return 0;
}

nlohmann::json block_json(const fdml::SubModelSpec& spec,
                          const fdml::ParameterBlock& block) {
  return {{"party", block.party},
          {"model", fdml::to_string(spec.kind)},
          {"input_dim", spec.input_dim},
          {"use_bias", spec.use_bias},
          {"hidden", spec.hidden_units},
          {"activation", fdml::to_string(spec.activation)},
          {"values", block.values}};
}

int serve_worker(const RunConfig& config) {
  const fdml::DatasetSplit data = fdml::load_data(config);
  const fdml::TrainingConfig& t = config.training;
  const fdml::VerticalPartition partition = fdml::make_partition(t, data.dim);
  const auto party = static_cast<std::size_t>(config.party_id);
  if (party >= partition.parties()) {
    throw fdml::ConfigError("party id " + std::to_string(party) +
                            " but the partition has " +
                            std::to_string(partition.parties()) + " parties");
  }
  const fdml::SubModelSpec spec = fdml::model_specs(t, partition)[party];
  const fdml::Dataset store =
      fdml::project_dataset(data.train, partition, party);

  const auto [host, port] = fdml::parse_endpoint(config.coordinator);
  fdml::SocketCarrier carrier(host, port);
  fdml::WorkerOptions options;
  options.eta = t.eta;
  options.lambda = t.lambda;
  options.reduction = t.reduction;
  options.noise = t.noise;
  options.retry = t.retry;
  fdml::Worker worker(static_cast<std::uint16_t>(party), spec, store,
                      make_schedule(config, data.train.size()), options,
                      carrier, fdml::init_block(spec, config.party_id, t.seed));
  worker.handshake(t.parties);
  spdlog::info("worker {} joined coordinator {}", party, config.coordinator);
  worker.run();
  spdlog::info("worker {} done, {} pull rejections", party, worker.rejections());

  if (!config.out.empty()) {
    std::ofstream out(config.out);
    if (!out) throw fdml::Error("cannot write " + config.out);
    out << block_json(spec, worker.block()).dump() << "\n";
  }
  return 0;
}

int evaluate_blocks(const RunConfig& config,
                    const std::vector<std::string>& paths) {
  const fdml::DatasetSplit data = fdml::load_data(config);
  const fdml::VerticalPartition partition =
      fdml::make_partition(config.training, data.dim);
  if (paths.size() != partition.parties()) {
    throw fdml::ConfigError("expected one block file per party (" +
                            std::to_string(partition.parties()) + ")");
  }
  fdml::CompositeModel model;
  model.blocks.resize(paths.size());
  model.specs = fdml::model_specs(config.training, partition);
  for (const std::string& path : paths) {
    std::ifstream in(path);
    if (!in) throw fdml::Error("cannot read " + path);
    const nlohmann::json j = nlohmann::json::parse(in);
    const auto party = j.at("party").get<std::size_t>();
    if (party >= model.blocks.size()) {
      throw fdml::ConfigError(path + ": party " + std::to_string(party) +
                              " out of range");
    }
    model.blocks[party].party = static_cast<int>(party);
    model.blocks[party].values = j.at("values").get<std::vector<double>>();
    if (model.blocks[party].values.size() !=
        model.specs[party].parameter_dim()) {
      throw fdml::ConfigError(path + ": parameter count does not match config");
    }
  }
  std::vector<fdml::Dataset> stores;
  for (std::size_t j = 0; j < partition.parties(); ++j) {
    stores.push_back(fdml::project_dataset(data.test, partition, j));
  }
  const fdml::Evaluation eval = fdml::evaluate(model, stores);
  std::cout << "test_logloss=" << eval.logloss << "\n"
            << "test_auc=" << eval.auc << "\n";
  return 0;
}

int verify(const std::string& suites, std::uint64_t seed) {
  std::vector<std::string> names;
  std::stringstream ss(suites);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) names.push_back(item);
  }
  bool ok = true;
  for (const fdml::SuiteOutcome& s : fdml::run_suites(names, seed)) {
    std::cout << (s.passed ? "PASS " : "FAIL ") << s.name << ": " << s.detail
              << "\n";
    ok = ok && s.passed;
  }
  return ok ? 0 : kRuntimeError;
}

int dispatch(const RunConfig& config) {
  if (config.mode == "serve-coordinator") return serve_coordinator(config);
  if (config.mode == "serve-worker") return serve_worker(config);
  return run_training_mode(config);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Feature-distributed machine learning"};
  app.require_subcommand(1);

  Flags run_flags;
  CLI::App* run = app.add_subcommand("run", "train one scheme, or serve one role");
  add_config_flags(*run, run_flags);

  Flags serve_flags;
  std::string role;
  CLI::App* serve = app.add_subcommand("serve", "run a coordinator or worker process");
  serve->add_option("role", role, "coordinator | worker")
      ->required()
      ->check(CLI::IsMember({"coordinator", "worker"}));
  add_config_flags(*serve, serve_flags);

  Flags eval_flags;
  std::vector<std::string> block_paths;
  CLI::App* evaluate = app.add_subcommand("evaluate", "score worker block files on the test set");
  evaluate->add_option("blocks", block_paths, "block JSON files")->required();
  add_config_flags(*evaluate, eval_flags);

  std::string suites = "gradients,lemma1,protocol";
  std::string verify_config;
  std::uint64_t verify_seed = 1;
  CLI::App* verify_cmd = app.add_subcommand("verify", "run built-in synthetic suites");
  verify_cmd->add_option("--suite", suites, "comma-separated: gradients,lemma1,protocol");
  verify_cmd->add_option("--seed", verify_seed, "suite seed");
  verify_cmd->add_option("--config", verify_config, "ignored beyond validation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  RunConfig config;
  try {
    if (*verify_cmd) {
      if (!verify_config.empty()) fdml::load_key_values(verify_config);
    } else if (*run) {
      config = assemble(run_flags);
    } else if (*serve) {
      Flags flags = serve_flags;
      config = assemble(flags);
      fdml::apply_setting(config, "mode", "serve-" + role);
      fdml::finalize(config);
    } else {
      config = assemble(eval_flags);
    }
  } catch (const fdml::Error& e) {
    std::cerr << "fdml: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    if (*verify_cmd) {
      try {
        return verify(suites, verify_seed);
      } catch (const fdml::ConfigError& e) {
        std::cerr << "fdml: " << e.what() << "\n";
        return kUsageError;
      }
    }
    if (*evaluate) return evaluate_blocks(config, block_paths);
    return dispatch(config);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntimeError;
  }
}
