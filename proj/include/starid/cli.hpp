#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace starid::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Environment variable naming the default catalog directory.
inline constexpr const char *kCatalogEnv = "STARID_CATALOG";

/**
 * Run one subcommand. args excludes the program name.
 * A `--config FILE` of key=value lines supplies flags not given on the command line.
 */
int dispatch(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);
int dispatch(int argc, char **argv);

}  // namespace starid::cli
