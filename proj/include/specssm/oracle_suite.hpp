#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace specssm {

// The acceptance/property suite shared by the acceptance test binary and the
// `oracle-check` CLI command. Each check prints one pass/fail line.
struct oracle_options {
    bool quick = false;     // reduced iteration counts for CI-style runs
    uint64_t seed = 2026;
    std::vector<std::string> only;   // run just these checks when non-empty
};

struct oracle_outcome {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

std::vector<oracle_outcome> run_oracle_suite(const oracle_options & opts, std::ostream & log);

bool all_passed(const std::vector<oracle_outcome> & outcomes);

} // namespace specssm
