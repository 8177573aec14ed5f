#include "unprompt/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "unprompt/error.hpp"

namespace unprompt {

std::vector<GradCheckReport> grad_check(const std::function<double()>& loss, std::span<ParameterProbe> params,
                                        Rng& rng, const GradCheckOptions& options) {
    std::vector<GradCheckReport> reports;
    reports.reserve(params.size());
    for (auto& probe : params) {
        Matrix& value = *probe.value;
        if (probe.analytic_grad.rows() != value.rows() || probe.analytic_grad.cols() != value.cols())
            throw Error(ErrorKind::Shape, "grad_check: gradient shape mismatch for " + probe.name);

        GradCheckReport report{probe.name};
        const auto size = static_cast<std::uint64_t>(value.size());
        for (int p = 0; p < options.probe_count && size > 0; ++p) {
            const auto flat = static_cast<Index>(rng.below(size));
            const double original = value.data()[flat];

            value.data()[flat] = original + options.step;
            const double plus = loss();
            value.data()[flat] = original - options.step;
            const double minus = loss();
            value.data()[flat] = original;
            if (!std::isfinite(plus) || !std::isfinite(minus))
                throw Error(ErrorKind::Probe, "grad_check: non-finite loss while probing " + probe.name);

            const double numeric = (plus - minus) / (2.0 * options.step);
            const double analytic = probe.analytic_grad.data()[flat];
            const double abs_err = std::abs(numeric - analytic);
            const double scale = std::max(std::abs(numeric), std::abs(analytic));
            const double rel_err = scale > 0.0 ? abs_err / scale : 0.0;

            report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
            report.max_relative_error = std::max(report.max_relative_error, rel_err);
            if (rel_err >= options.relative_tolerance && abs_err >= options.absolute_tolerance)
                report.pass = false;
        }
        reports.push_back(std::move(report));
    }
    return reports;
}

}  // namespace unprompt
