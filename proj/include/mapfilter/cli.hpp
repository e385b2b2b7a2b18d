#pragma once

#include <string>
#include <vector>

namespace mapfilter::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitDataError = 2;

// Entry point for `mapfilter <calibrate|match|eval|synth|pool> ...`.
int run(int argc, char** argv);

// Same, with argv[0] omitted. Used by the tests.
int run(const std::vector<std::string>& args);

}  // namespace mapfilter::cli
