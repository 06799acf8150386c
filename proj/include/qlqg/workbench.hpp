// Copyright 2026 The qlqg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qlqg/optimizer.hpp"
#include "qlqg/simulator.hpp"

namespace qlqg {

inline constexpr std::string_view kToolVersion = "0.3.1";

enum class Command { validate, moments, filter, optimize, markovian, simulate, example };
enum class OutputFormat { json, csv };

std::string_view command_name(Command c);
std::optional<Command> parse_command(std::string_view name);

struct RunManifest {
  Command command = Command::validate;
  std::string system_path;
  std::string control_path;
  std::string unravelling_path;
  std::uint64_t seed = 0;
  OutputFormat output_format = OutputFormat::json;
  std::string tool_version{kToolVersion};
  double dt = 1e-3;
  double t_final = 50.0;
  int trajectories = 2000;
  double phi_resolution = 1e-3 * 3.14159265358979323846;

  std::vector<std::string> input_paths() const;
  nlohmann::json to_json() const;
};

struct LoadedProblem {
  SystemSpec system;
  std::optional<ControlProblem> control;
  std::optional<UnravellingMatrix> unravelling;
};

// Parsers for the file formats. Errors carry the offending field path.
SystemSpec parse_system(const nlohmann::json& doc);
ControlProblem parse_control(const nlohmann::json& doc, const SystemSpec& spec);
UnravellingMatrix parse_unravelling(const nlohmann::json& doc);

/// Reads and validates the problem files. Empty paths are skipped. Missing
/// files throw IoError; malformed JSON throws ValidationError with line and
/// column.
LoadedProblem load_problem(const std::string& system_path, const std::string& control_path,
                           const std::string& unravelling_path);

/// The bundled worked-example fixture (system + control, Q -> 0).
LoadedProblem example_problem();
const nlohmann::json& example_expectations();

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct Report {
  nlohmann::json body;
  std::vector<Table> tables;
  bool certificates_pass = true;
  int exit_code = 0;
};

/// Runs one command. Domain errors propagate as exceptions; certificate
/// failures are recorded in the report and its exit code.
Report run_command(const RunManifest& manifest);

/// Exit status for an exception escaping run_command: 1 validation,
/// 2 numerical failure, 3 I/O.
int exit_code_for(const std::exception& error);

std::string serialize_json(const Report& report);

/// json: one file at `path` (stdout when empty). csv: one file per table,
/// named <path stem>_<table>.csv next to `path`.
void write_report(const Report& report, OutputFormat format, const std::string& path);

}  // namespace qlqg
