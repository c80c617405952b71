#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cylising::verify {

struct Measurement {
  std::string name;
  double value = 0;
  double limit = 0;  // pass requires value <= limit unless `at_least`
  bool at_least = false;
  bool ok() const { return at_least ? value >= limit : value <= limit; }
};

struct CriterionResult {
  int id = 0;
  std::string title;
  std::vector<Measurement> measurements;
  double seconds = 0;
  double time_limit = 0;  // 0: no runtime bound
  std::vector<std::string> notes;
  bool passed() const;
};

struct AcceptanceOptions {
  std::uint64_t seed = 0;
};

inline constexpr int acceptance_criterion_count = 11;

CriterionResult run_criterion(int id, const AcceptanceOptions& opts = {});
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts = {});

struct BatteryOptions {
  int L = 12;
  int M = 5;
  int samples = 50;
  std::uint64_t seed = 0;
};

// Localization cancellations and decompositions on random kernels (4 x samples for the
// cancellations, samples for each decomposition).
std::vector<Measurement> cancellation_battery(const BatteryOptions& b);
// Worst relative excess of the R_B / R_E norm inequalities over `samples` kernels each.
std::vector<Measurement> norm_battery(const BatteryOptions& b);

// "[PASS] 8 kernel-calculus cancellations: worst ... (12.3 s)"
std::string summary_line(const CriterionResult& r);

}  // namespace cylising::verify
