// Command-line driver: check / map / sim / dot / report with stable exit
// codes and machine-readable outputs.
#pragma once

#include <iostream>
#include <optional>
#include <string>

#include <json.hpp>

namespace datoc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitParse = 1;
inline constexpr int kExitType = 2;
inline constexpr int kExitNoMapping = 3;
inline constexpr int kExitMismatch = 4;
inline constexpr int kExitDeadlock = 5;
inline constexpr int kExitUsage = 64;

inline const char* kVersion = "datoc 0.1.0";

struct CommonOptions {
  std::string file;
  int rows = 4;
  int cols = 5;
  int budget = 0;      // 0 = tile count
  int candidates = 16;  // search early-stop threshold
};

struct CheckOptions {
  std::string file;
  bool json = false;
};

struct MapOptions : CommonOptions {
  std::string dot_dir;  // write initial/selected DOT files here
  bool json = false;
};

struct SimOptions : CommonOptions {
  std::string inputs_file;
  std::uint64_t seed = 0;
  bool timed = false;
  std::string report_file;
  bool unsafe_skip_check = false;  // test hook
  bool json = false;
};

struct DotOptions : CommonOptions {
  std::string out_file;  // empty = stdout
};

struct ReportOptions : CommonOptions {
  std::string out_file = "report.json";
  std::uint64_t seed = 0;
  std::string replay_manifest;  // re-run a stored manifest
};

int cmd_check(const CheckOptions& o, std::ostream& out = std::cout,
              std::ostream& err = std::cerr);
int cmd_map(const MapOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr);
int cmd_sim(const SimOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr);
int cmd_dot(const DotOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr);
int cmd_report(const ReportOptions& o, std::ostream& out = std::cout,
               std::ostream& err = std::cerr);

// DATOC_LOG=error|warn|info|debug; default warn.
void log(int level, const std::string& msg);

}  // namespace datoc::cli
