#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nst {

struct GradSuiteEntry {
    std::string name;
    double max_rel_err = 0.0;  // max over seeds
    bool ok = false;
};

// Finite-difference verification of every differentiable primitive, the
// composite normalization/loss operators and the end-to-end objective
// through the transfer and prediction networks, across `seeds` seeded
// instances per entry. Composite checks run in a smooth regime (relu inputs
// held away from the kink) so central differences are valid; relu's own
// subgradient behavior is checked directly at the primitive level.
std::vector<GradSuiteEntry> run_gradient_suite(std::size_t seeds, double tolerance);

}  // namespace nst
