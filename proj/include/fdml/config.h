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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "fdml/trainer.h"

namespace fdml {

// Everything a `fdml` invocation needs: the training config plus data
// locations and endpoints. Populated from a key=value file, then flags.
struct RunConfig {
  std::string mode = "fdml";
  TrainingConfig training;
  std::string data;        // preset name; a9a when no paths are given
  std::string data_dir;    // where presets live
  std::string train_path;
  std::string test_path;
  std::size_t dim = 0;     // 0: infer from the files
  std::string out;         // metrics CSV; empty: none
  std::string listen = "127.0.0.1:7070";
  std::string coordinator = "127.0.0.1:7070";
  std::string status_listen;  // coordinator HTTP status endpoint; empty: off
  int party_id = 0;
};

// Lines of `key = value`; '#' starts a comment. Later keys win.
std::map<std::string, std::string> parse_key_values(std::istream& in);
std::map<std::string, std::string> load_key_values(const std::string& path);

// Applies one setting. Unknown keys and malformed values throw ConfigError.
void apply_setting(RunConfig& config, const std::string& key,
                   const std::string& value);

// Names accepted by apply_setting.
const std::vector<std::string>& config_keys();

// Resolves presets and per-model defaults; call once all settings are in.
void finalize(RunConfig& config);

// Loads the train/test split the config names.
DatasetSplit load_data(const RunConfig& config);

// The config as key=value lines, in config_keys() order.
std::string dump(const RunConfig& config);

}  // namespace fdml
