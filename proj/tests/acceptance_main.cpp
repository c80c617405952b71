#include <cstdio>
#include <cstdlib>
#include <string>

#include "cylising/verify/acceptance.hpp"

// Usage: cylising_acceptance [seed] [criterion ...]
int main(int argc, char** argv) {
  cylising::verify::AcceptanceOptions opts;
  if (argc > 1) opts.seed = std::strtoull(argv[1], nullptr, 10);
  int failures = 0;
  auto report = [&](const cylising::verify::CriterionResult& r) {
    std::printf("%s\n", cylising::verify::summary_line(r).c_str());
    for (const auto& n : r.notes) std::printf("       %s\n", n.c_str());
    std::fflush(stdout);
    if (!r.passed()) ++failures;
  };
  if (argc > 2) {
    for (int i = 2; i < argc; ++i) report(cylising::verify::run_criterion(std::stoi(argv[i]), opts));
  } else {
    for (int id = 1; id <= cylising::verify::acceptance_criterion_count; ++id)
      report(cylising::verify::run_criterion(id, opts));
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
