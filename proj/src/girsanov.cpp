#include "sgns/girsanov.hpp"

#include <cmath>
#include <stdexcept>

namespace sgns {

void advance_weight(GirsanovWeight& w, std::span<const double> drift_white,
                    std::span<const double> dw_white, double dt) {
    if (w.stopped) return;
    double h2 = 0.0;
    double hdw = 0.0;
    for (std::size_t j = 0; j < drift_white.size(); ++j) {
        h2 += drift_white[j] * drift_white[j];
        hdw += drift_white[j] * dw_white[j];
    }
    // The reduced chain carries +h dt of extra drift relative to the full
    // chain (after whitening), so the transition-density ratio contributes
    // exp(-<h,dW> - |h|^2 dt / 2) per step.
    w.log_g += -hdw - 0.5 * h2 * dt;
    w.stopping_integral += h2 * dt;
    if (w.stopping_integral >= w.n_threshold) w.stopped = true;
}

MeanStderr martingale_diagnostic(std::span<const double> log_g_at_t) {
    if (log_g_at_t.empty()) throw std::invalid_argument("martingale_diagnostic: empty ensemble");
    double sum = 0.0, comp = 0.0;
    for (double lg : log_g_at_t) {
        double y = std::exp(lg) - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    const double n = double(log_g_at_t.size());
    const double mean = sum / n;
    double var = 0.0;
    for (double lg : log_g_at_t) {
        double d = std::exp(lg) - mean;
        var += d * d;
    }
    var /= (n - 1.0);
    return {mean, std::sqrt(var / n)};
}

LogMomentReport log_moment_diagnostic(std::span<const double> log_g_s,
                                      std::span<const double> log_g_t, double s, double t,
                                      double x0_norm) {
    if (log_g_s.size() != log_g_t.size() || log_g_s.empty())
        throw std::invalid_argument("log_moment_diagnostic: bad ensemble");
    if (s > t) throw std::invalid_argument("log_moment_diagnostic: requires s <= t");
    const std::size_t n = log_g_s.size();
    double sum = 0.0;
    std::vector<double> vals(n);
    for (std::size_t i = 0; i < n; ++i) {
        vals[i] = std::exp(log_g_t[i]) * std::abs(log_g_t[i] - log_g_s[i]);
        sum += vals[i];
    }
    LogMomentReport r;
    r.lhs = sum / double(n);
    double var = 0.0;
    for (double v : vals) var += (v - r.lhs) * (v - r.lhs);
    r.stderr_ = std::sqrt(var / (double(n) - 1.0) / double(n));
    const double amp = 1.0 + x0_norm * x0_norm;
    r.rhs_shape = std::sqrt(t - s) * amp * amp;
    r.fitted_constant = r.rhs_shape > 0.0 ? r.lhs / r.rhs_shape : 0.0;
    return r;
}

IncrementReport increment_diagnostic(std::span<const double> log_g_s,
                                     std::span<const double> log_g_t,
                                     const std::function<double(double, double)>& x_of_path) {
    if (log_g_s.size() != log_g_t.size() || log_g_s.empty())
        throw std::invalid_argument("increment_diagnostic: bad ensemble");
    const std::size_t n = log_g_s.size();
    double sum_x = 0.0, sum_m = 0.0, sum_b = 0.0;
    std::vector<double> vx(n), vm(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double gs = std::exp(log_g_s[i]);
        const double gt = std::exp(log_g_t[i]);
        const double x = x_of_path(log_g_s[i], log_g_t[i]);
        vx[i] = (gt - gs) * x;
        vm[i] = gt - gs;
        sum_x += vx[i];
        sum_m += vm[i];
        sum_b += gt * std::abs(log_g_t[i] - log_g_s[i]);
    }
    IncrementReport r;
    const double mean_x = sum_x / double(n);
    const double mean_m = sum_m / double(n);
    double var_x = 0.0, var_m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        var_x += (vx[i] - mean_x) * (vx[i] - mean_x);
        var_m += (vm[i] - mean_m) * (vm[i] - mean_m);
    }
    r.value = std::abs(mean_x);
    r.stderr_ = std::sqrt(var_x / (double(n) - 1.0) / double(n));
    r.martingale_gap = std::abs(mean_m);
    r.martingale_stderr = std::sqrt(var_m / (double(n) - 1.0) / double(n));
    r.bound = 2.0 * sum_b / double(n);
    return r;
}

std::vector<double> stopping_probability(std::span<const double> stop_integral_at_t,
                                         std::span<const double> n_values) {
    if (stop_integral_at_t.empty())
        throw std::invalid_argument("stopping_probability: empty ensemble");
    std::vector<double> probs(n_values.size(), 0.0);
    for (std::size_t j = 0; j < n_values.size(); ++j) {
        std::size_t hits = 0;
        for (double v : stop_integral_at_t)
            if (v >= n_values[j]) ++hits;
        probs[j] = double(hits) / double(stop_integral_at_t.size());
    }
    return probs;
}

bool elementary_inequality_holds(double x, double y, double eps) {
    return x * y <= eps * std::exp(y / eps) + eps * x * std::log(x);
}

}  // namespace sgns
