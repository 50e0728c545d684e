#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "otvq/ot/discrete.hpp"

namespace otvq::ot {

struct SinkhornOptions {
    double eps = 0.1;
    std::size_t max_iters = 100000;
    double tol = 1e-9;
};

struct SinkhornResult {
    TransportPlan plan;
    // <plan, cost> + eps * KL(plan || mu (x) nu)
    double entropic_value = 0.0;
    double kl = 0.0;
    std::vector<double> f;  // dual potential on mu's atoms
    std::vector<double> g;  // dual potential on nu's atoms
    std::size_t iterations = 0;
    double marginal_error = 0.0;
    bool converged = false;
};

/// Log-domain Sinkhorn for the entropic problem regularized by the KL
/// divergence to the product coupling mu (x) nu:
///
///   min_P <P, C> + eps * KL(P || mu (x) nu)
///
/// The optimum has the form P_ij = mu_i nu_j exp((f_i + g_j - C_ij) / eps).
/// Atoms with zero weight carry no mass and are skipped. Non-convergence is
/// reported through `converged`, not thrown.
inline SinkhornResult sinkhorn(std::span<const double> mu, std::span<const double> nu, const Matrix& cost,
                               const SinkhornOptions& opts = {}) {
    if (!(opts.eps > 0.0)) throw ValueError("sinkhorn: eps must be positive");
    if (cost.rows != mu.size() || cost.cols != nu.size()) throw ShapeError("sinkhorn: cost/marginal shape mismatch");
    const std::size_t n = mu.size(), k = nu.size();
    const double eps = opts.eps;
    const double neg_inf = -std::numeric_limits<double>::infinity();

    std::vector<double> log_mu(n), log_nu(k);
    for (std::size_t i = 0; i < n; ++i) log_mu[i] = mu[i] > 0.0 ? std::log(mu[i]) : neg_inf;
    for (std::size_t j = 0; j < k; ++j) log_nu[j] = nu[j] > 0.0 ? std::log(nu[j]) : neg_inf;

    SinkhornResult r;
    r.f.assign(n, 0.0);
    r.g.assign(k, 0.0);
    std::vector<double> buf(std::max(n, k));

    auto lse = [](std::span<const double> v) {
        double mx = -std::numeric_limits<double>::infinity();
        for (double x : v) mx = std::max(mx, x);
        if (!std::isfinite(mx)) return mx;
        double s = 0.0;
        for (double x : v) s += std::exp(x - mx);
        return mx + std::log(s);
    };

    auto row_error = [&] {
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mu[i] <= 0.0) continue;
            double s = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                if (nu[j] <= 0.0) continue;
                s += std::exp(log_mu[i] + log_nu[j] + (r.f[i] + r.g[j] - cost(i, j)) / eps);
            }
            worst = std::max(worst, std::abs(s - mu[i]));
        }
        return worst;
    };

    for (r.iterations = 0; r.iterations < opts.max_iters;) {
        for (std::size_t i = 0; i < n; ++i) {
            if (mu[i] <= 0.0) continue;
            for (std::size_t j = 0; j < k; ++j) buf[j] = log_nu[j] + (r.g[j] - cost(i, j)) / eps;
            r.f[i] = -eps * lse(std::span<const double>(buf.data(), k));
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (nu[j] <= 0.0) continue;
            for (std::size_t i = 0; i < n; ++i) buf[i] = log_mu[i] + (r.f[i] - cost(i, j)) / eps;
            r.g[j] = -eps * lse(std::span<const double>(buf.data(), n));
        }
        ++r.iterations;
        r.marginal_error = row_error();
        if (r.marginal_error < opts.tol) {
            r.converged = true;
            break;
        }
    }

    Matrix plan(n, k);
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (mu[i] <= 0.0) continue;
        for (std::size_t j = 0; j < k; ++j) {
            if (nu[j] <= 0.0) continue;
            const double log_ratio = (r.f[i] + r.g[j] - cost(i, j)) / eps;
            const double p = std::exp(log_mu[i] + log_nu[j] + log_ratio);
            plan(i, j) = p;
            kl += p * log_ratio;
        }
    }
    r.plan = finalize_plan(std::move(plan), cost);
    r.kl = kl;
    r.entropic_value = r.plan.value + eps * kl;
    return r;
}

inline SinkhornResult sinkhorn(const DiscreteDist& mu, const DiscreteDist& nu, const Matrix& cost,
                               const SinkhornOptions& opts = {}) {
    mu.validate();
    nu.validate();
    return sinkhorn(mu.weights, nu.weights, cost, opts);
}

}  // namespace otvq::ot
