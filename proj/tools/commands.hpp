#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace siv1::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,
    exit_config = 2,
    exit_fit = 3,
    exit_io = 4,
};

struct RunConfig {
    /// simulate, fit, derive or sweep.
    std::string command;
    /// Protocol for simulate and sweep, fit kind for fit; empty reads the config.
    std::string mode;
    std::string config_path;
    std::vector<std::string> data_paths;
    /// Empty reads "output" from the config, then falls back to siv1_out.
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
};

inline constexpr std::uint64_t default_seed = 1;

/// Runs one command, writes its outputs and the manifest, and returns the exit code.
int run(const RunConfig& rc, std::ostream& log);

}  // namespace siv1::cli
