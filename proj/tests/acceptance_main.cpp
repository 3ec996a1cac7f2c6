// Release gate: runs every numbered acceptance criterion and prints one
// verdict line each, with the failing checks spelled out when a criterion
// misses. Exits nonzero unless all of them pass.
//
// Usage: acceptance_tests [jobs]

#include <cstdio>
#include <cstdlib>
#include <vector>

#include "qflux/acceptance.hpp"

int main(int argc, char** argv) {
  qflux::RunOptions opt;
  opt.jobs = argc > 1 ? std::atoi(argv[1]) : 4;
  if (opt.jobs < 1) opt.jobs = 1;

  std::vector<qflux::CriterionResult> results;
  try {
    results = qflux::run_acceptance(opt);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance suite aborted: %s\n", e.what());
    return 2;
  }

  int failed = 0;
  for (const auto& c : results) {
    std::printf("criterion %2d %-26s %s\n", c.number, c.name.c_str(),
                c.pass() ? "PASS" : "FAIL");
    if (c.pass()) continue;
    ++failed;
    for (const auto& r : c.bundle.rows)
      for (const auto& ck : r.checks)
        if (!ck.pass)
          std::printf("    %s: %s = %s (%s %s)\n", r.label.c_str(), ck.term.c_str(),
                      qflux::format_double(r.get(ck.term)).c_str(),
                      ck.at_least ? "needs at least" : "allowed up to",
                      qflux::format_double(ck.bound).c_str());
  }
  std::printf("%d/%d criteria passed\n", static_cast<int>(results.size()) - failed,
              static_cast<int>(results.size()));
  return failed == 0 ? 0 : 1;
}
