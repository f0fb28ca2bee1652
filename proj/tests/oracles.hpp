#pragma once

// Reference integrals for the volume-rendering quadrature, evaluated independently of the
// library's discretization.

#include <cmath>
#include <functional>
#include <vector>

#include "voxelfield/volume_renderer.hpp"

namespace testing {

// Ray through a medium on [0, length] with density sigma(t), optical depth tau(t) = int_0^t sigma
// and scalar color c(t), finishing with a constant sky color.
struct Medium {
    double length = 1.0;
    std::function<double(double)> sigma;
    std::function<double(double)> tau;
    std::function<double(double)> color;
    double sky = 0.0;
};

// int_0^L sigma c exp(-tau) dt + sky exp(-tau(L)) by composite Simpson.
inline double continuous_integral(const Medium& m, int intervals = 20000) {
    const double h = m.length / intervals;
    auto f = [&](double t) { return m.sigma(t) * m.color(t) * std::exp(-m.tau(t)); };
    double s = f(0.0) + f(m.length);
    for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
    return s * h / 3.0 + m.sky * std::exp(-m.tau(m.length));
}

// Library quadrature with n bins, each sampled at fraction `jitter` of the bin.
inline double discrete_integral(const Medium& m, int n, double jitter = 0.5) {
    const double delta = m.length / n;
    std::vector<double> sigma(n), deltas(n, delta), t_hat(n);
    voxelfield::Matrix colors(n, 1);
    for (int i = 0; i < n; ++i) {
        t_hat[i] = (i + jitter) * delta;
        sigma[i] = m.sigma(t_hat[i]);
        colors(i, 0) = m.color(t_hat[i]);
    }
    const double sky[] = {m.sky};
    return voxelfield::integrate_ray(sigma, deltas, t_hat, colors, sky).color[0];
}

// Least-squares slope of -log(error) against log(n).
inline double convergence_order(const Medium& m, const std::vector<int>& ns) {
    const double exact = continuous_integral(m);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int n : ns) {
        const double x = std::log(static_cast<double>(n));
        const double y = -std::log(std::abs(discrete_integral(m, n) - exact));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double k = static_cast<double>(ns.size());
    return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

inline Medium varying_medium(double scale) {
    Medium m;
    m.length = 3.0;
    m.sigma = [scale](double t) { return scale * (1.0 + 0.5 * std::sin(3.0 * t)); };
    m.tau = [scale](double t) { return scale * (t + (1.0 - std::cos(3.0 * t)) / 6.0); };
    m.color = [](double t) { return 0.2 + 0.6 * t / 3.0 + 0.1 * std::cos(5.0 * t); };
    m.sky = 0.7;
    return m;
}

inline Medium homogeneous_medium(double sigma, double length, double color, double sky) {
    Medium m;
    m.length = length;
    m.sigma = [sigma](double) { return sigma; };
    m.tau = [sigma](double t) { return sigma * t; };
    m.color = [color](double) { return color; };
    m.sky = sky;
    return m;
}

} // namespace testing
