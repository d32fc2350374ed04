#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "eli/dataio/config.hpp"
#include "gradcheck.hpp"

namespace eli::cli {

enum ExitCode : int { kOk = 0, kStageFailure = 1, kConfigError = 2 };

struct CliHooks {
  BackwardFn gradcheck_backward;  // empty: the real backward pass
};

/// Entry point behind the `eli` executable. Results go to out, progress and
/// diagnostics to err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const CliHooks& hooks = {});

// Config key a sweep axis edits; throws ConfigError for an unknown axis.
std::string sweep_axis_key(const std::string& axis);

// Seed for point `index` of a sweep started from `seed`.
std::uint64_t sweep_point_seed(std::uint64_t seed, std::size_t index);

}  // namespace eli::cli
