#pragma once

#include <string>

#include "idql/config.hpp"

namespace idql {

struct RunResult {
  std::string dir;           // run directory containing all artifacts
  std::string manifest_path;
};

// Output root: $IDQL_OUT_ROOT when set, otherwise "runs".
std::string default_out_root();

// Executes one experiment. Creates <out_root>/<experiment>-s<seed>-<hash8>/
// with a copy of the effective config, all experiment outputs, and a
// manifest.json listing every artifact with its content hash. Runs are
// deterministic: the same config and seed reproduce every byte.
RunResult run(const ExperimentConfig& config, const std::string& out_root);

}  // namespace idql
