#pragma once

#include <iosfwd>
#include <string>

#include "config.hpp"

namespace amlpf::cli {

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsage = 2 };

// Full command line, argv[0] included. Errors go to `err` as one line:
//   error <module>.<kind>: <message>
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Budget ladder and reference settings of the bench command.
SweepSpec sweep_spec(const RunConfig& cfg);
GroundTruthOptions reference_options(const RunConfig& cfg, const SweepSpec& spec);

int cmd_simulate(const RunConfig& cfg, std::ostream& out);
int cmd_filter(const RunConfig& cfg, std::ostream& out);
int cmd_bench(const RunConfig& cfg, std::ostream& out);
int cmd_rates(const RunConfig& cfg, std::ostream& out);

}  // namespace amlpf::cli
