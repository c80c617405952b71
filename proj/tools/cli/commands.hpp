#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace cylising::cli {

#ifndef CYLISING_VERSION
#define CYLISING_VERSION "0.0.0"
#endif

inline constexpr const char* program_version = CYLISING_VERSION;

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_verification = 2, exit_numerical = 3 };

// Invalid configuration; each entry of `fields` reads "<field>: <problem>".
struct ConfigError : std::invalid_argument {
  explicit ConfigError(std::vector<std::string> f);
  std::vector<std::string> fields;
};

struct RunConfig {
  std::string command;
  std::optional<int> L, M;
  // Parameters: either (t1 [, t2]) or (beta, J1, J2). Without t2 or beta the point is critical.
  std::optional<double> t1, t2, beta;
  std::optional<double> J1, J2;  // default 1 when beta is given
  bool critical = false;
  std::string output;  // empty: stdout
  std::string format = "json";
  bool verify = false;
  std::optional<double> tol;  // verification tolerance override
  double inf_tol = 1e-10;     // convergence tolerance of infinite-volume kernels
  std::uint64_t seed = 0;

  std::string field = "phi";                           // propagator
  std::string edges;                                   // correlate
  std::string points = "(0.25,0.375),(0.75,0.625)";   // scaling
  int halvings = 4;
  double a0 = 1.0 / 16.0;
  double ell1 = 1.0, ell2 = 1.0;
  std::string scales = "0,-1";                         // multiscale
  std::string demo = "all";                            // kernels
  int samples = 10;
  double Z = 1.0;
  int s_max = 2;
  int rg_L = 4, rg_M = 3;  // the RG-step demo runs on its own small cylinder
  std::string criteria;                                // selftest
};

// Tabular data shared by the JSON and CSV writers.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;
};

struct Check {
  std::string name;
  double value = 0;
  double limit = 0;
  bool at_least = false;
  bool ok() const { return at_least ? value >= limit : value <= limit; }
};

struct CommandOutput {
  nlohmann::json config;      // resolved configuration (hashed into the metadata)
  nlohmann::json tolerances;
  nlohmann::json results;
  std::optional<Table> table;  // CSV payload
  std::vector<Check> checks;   // verification checks (reported only in verify mode)
  bool always_checked = false; // checks decide the exit status even without --verify
  std::vector<std::string> log;  // progress lines for stderr
};

CommandOutput run_command(const RunConfig& cfg);

// Serialized document (JSON or CSV) with the metadata header.
std::string render(const RunConfig& cfg, const CommandOutput& out);

std::string config_hash(const nlohmann::json& config);

}  // namespace cylising::cli
