#pragma once

// Command-line front end: gen-data, train, predict, eval, bench, dump-simmaps.

#include <iosfwd>
#include <string>

#include "gebd/trainer.hpp"

namespace gebd {

/// Applies a JSON config document on top of `base`. Unknown keys are rejected.
TrainConfig train_config_from_json(const std::string& json, TrainConfig base = {});
std::string train_config_to_json(const TrainConfig& cfg);

/// Exit codes: 0 success, 1 usage or validation error, 2 runtime or numeric failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace gebd
