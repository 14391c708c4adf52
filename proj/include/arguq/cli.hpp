#pragma once

// Command-line front end. Subcommands map onto the pipeline phases:
//
//   run        execute an experiment and write run-<hash>.{json,csv}
//   evaluate   score one or more run files and emit the report trio
//   compare    paired bootstrap interval for two run files
//   summarize  best-method counts from published accuracy/interval CSVs
//   replay     recompute predictions from a run file's raw scores
//
// Streams are injected so tests can drive the whole surface in-process.

#include <iosfwd>

namespace arguq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;       // bad flags, config, or inputs
inline constexpr int kExitUnavailable = 3;  // method needs a missing capability
inline constexpr int kExitRunError = 4;     // backend or data failure mid-run
inline constexpr int kExitReplayDrift = 5;  // stored and recomputed outputs differ

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace arguq::cli
