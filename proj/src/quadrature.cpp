#include "greenbp/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace greenbp {

namespace {

// 16-point Gauss-Legendre nodes/weights on [-1, 1] (positive half; the rule
// is symmetric)
constexpr double GL_X[8] = {
    0.0950125098376374401853193, 0.2816035507792589132304605,
    0.4580167776572273863424194, 0.6178762444026437484466718,
    0.7554044083550030338951012, 0.8656312023878317438804679,
    0.9445750230732325760779884, 0.9894009349916499325961542,
};
constexpr double GL_W[8] = {
    0.1894506104550684962853967, 0.1826034150449235888667637,
    0.1691565193950025381893121, 0.1495959888165767320815017,
    0.1246289712555338720524763, 0.0951585116824927848099251,
    0.0622535239386478928628438, 0.0271524594117540948517806,
};

double gauss16(const std::function<double(double)>& f, double a, double b) {
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 8; ++i)
        s += GL_W[i] * (f(mid + half * GL_X[i]) + f(mid - half * GL_X[i]));
    return s * half;
}

double composite(const std::function<double(double)>& f, double a, double b, int panels) {
    double h = (b - a) / panels;
    double s = 0.0;
    for (int i = 0; i < panels; ++i) s += gauss16(f, a + i * h, a + (i + 1) * h);
    return s;
}

} // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol,
                 int max_panels) {
    if (a == b) return 0.0;
    double prev = composite(f, a, b, 1);
    for (int panels = 2; panels <= max_panels; panels *= 2) {
        double cur = composite(f, a, b, panels);
        double scale = std::max({std::fabs(cur), std::fabs(prev), 1e-30});
        if (std::fabs(cur - prev) <= rel_tol * scale || std::fabs(cur - prev) < 1e-300)
            return cur;
        prev = cur;
    }
    throw QuadratureNonconvergent("integral did not stabilize within the panel budget");
}

double integrate_cells(const std::function<double(double)>& f, double a, double b,
                       std::vector<double> breakpoints, double rel_tol, int max_panels) {
    breakpoints.push_back(a);
    breakpoints.push_back(b);
    std::sort(breakpoints.begin(), breakpoints.end());
    double s = 0.0;
    for (size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        double lo = std::max(a, breakpoints[i]), hi = std::min(b, breakpoints[i + 1]);
        if (hi > lo) s += integrate(f, lo, hi, rel_tol, max_panels);
    }
    return s;
}

} // namespace greenbp
