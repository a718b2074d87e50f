#pragma once

namespace crmort::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitSampler = 3;
inline constexpr int kExitMissingSamples = 4;
inline constexpr int kExitTruncation = 5;
inline constexpr int kExitConfig = 6;

int run(int argc, char** argv);

} // namespace crmort::cli
