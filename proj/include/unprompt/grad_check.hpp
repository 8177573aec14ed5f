#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "unprompt/rng.hpp"
#include "unprompt/types.hpp"

namespace unprompt {

struct GradCheckReport {
    std::string parameter;
    double max_relative_error = 0.0;
    double max_absolute_error = 0.0;
    bool pass = true;
};

// A tensor the checker may perturb in place, and its analytic gradient.
struct ParameterProbe {
    std::string name;
    Matrix* value;
    Matrix analytic_grad;
};

struct GradCheckOptions {
    int probe_count = 8;
    double step = 1e-5;
    double relative_tolerance = 1e-4;
    double absolute_tolerance = 1e-7;
};

// Central differences at `probe_count` random coordinates of every probe. A
// coordinate passes when its relative error is below tolerance or, near zero,
// its absolute error is. Each tensor is restored before returning. Throws
// Probe when the loss is not finite at a perturbed point.
std::vector<GradCheckReport> grad_check(const std::function<double()>& loss, std::span<ParameterProbe> params,
                                        Rng& rng, const GradCheckOptions& options = {});

inline bool all_pass(const std::vector<GradCheckReport>& reports) {
    for (const auto& r : reports)
        if (!r.pass) return false;
    return true;
}

}  // namespace unprompt
