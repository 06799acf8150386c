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

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qlqg/errors.hpp"
#include "qlqg/workbench.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Unravelling optimisation and feedback workbench for linear quantum systems"};
  app.set_version_flag("--version", std::string(qlqg::kToolVersion));
  app.require_subcommand(1, 1);

  qlqg::RunManifest manifest;
  std::string format = "json";
  std::string out_path;

  const std::pair<qlqg::Command, const char*> commands[] = {
      {qlqg::Command::validate, "Check a system definition and its detectability"},
      {qlqg::Command::moments, "Drift, diffusion and unconditional moment evolution"},
      {qlqg::Command::filter, "Conditional covariance for a given unravelling"},
      {qlqg::Command::optimize, "Optimal unravelling, cost and controllers"},
      {qlqg::Command::markovian, "Markovian feedback gain for a given unravelling"},
      {qlqg::Command::simulate, "Monte Carlo simulation of conditional trajectories"},
      {qlqg::Command::example, "Run the bundled example and compare with stored values"},
  };
  for (const auto& [cmd, help] : commands) {
    CLI::App* sub = app.add_subcommand(std::string(qlqg::command_name(cmd)), help);
    if (cmd != qlqg::Command::example) {
      sub->add_option("--system", manifest.system_path, "System definition (json)")->required();
      sub->add_option("--control", manifest.control_path, "Control problem (json)");
      sub->add_option("--unravelling", manifest.unravelling_path, "Unravelling (json)");
    }
    sub->add_option("--out", out_path, "Report path; json goes to stdout when omitted");
    sub->add_option("--format", format, "Report format")
        ->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--seed", manifest.seed, "Random seed");
    sub->add_option("--dt", manifest.dt, "Integration step");
    sub->add_option("--t-final", manifest.t_final, "Final simulation time");
    sub->add_option("--trajectories", manifest.trajectories, "Number of trajectories");
    sub->add_option("--phi-resolution", manifest.phi_resolution,
                    "Homodyne phase grid spacing for the oracle sweep (rad)");
    sub->callback([&manifest, cmd = cmd] { manifest.command = cmd; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  manifest.output_format = format == "csv" ? qlqg::OutputFormat::csv : qlqg::OutputFormat::json;

  try {
    const qlqg::Report report = qlqg::run_command(manifest);
    qlqg::write_report(report, manifest.output_format, out_path);
    if (!report.certificates_pass) std::cerr << "qlqg: one or more certificates failed\n";
    return report.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "qlqg: " << e.what() << "\n";
    return qlqg::exit_code_for(e);
  }
}
