#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

namespace greenbp {

struct QuadratureNonconvergent : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Composite Gauss-Legendre of order 16 over [a, b] (a <= b) with uniform
// panel doubling: panel counts 1, 2, 4, ... until two successive estimates
// agree to rel_tol (absolute when the value is near zero).  Throws
// QuadratureNonconvergent once a refinement would exceed max_panels.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-10, int max_panels = 4096);

// Same, but the interval is first split at the interior breakpoints and each
// smooth cell converges independently (integrands here are piecewise smooth
// with kinks at kernel breakpoints and at the diagonal).
double integrate_cells(const std::function<double(double)>& f, double a, double b,
                       std::vector<double> breakpoints, double rel_tol = 1e-10,
                       int max_panels = 4096);

} // namespace greenbp
