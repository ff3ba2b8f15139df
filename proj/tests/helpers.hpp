#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "esrnn/autodiff.hpp"
#include "esrnn/data.hpp"
#include "esrnn/matrix.hpp"

namespace testutil {

inline double rel_err(double analytic, double reference) {
    const double denom = std::max(std::abs(analytic), std::abs(reference));
    if (denom < 1e-10) return std::abs(analytic - reference);
    return std::abs(analytic - reference) / denom;
}

/// Central finite difference of a re-evaluating functional with respect to
/// one external parameter.
inline double central_diff(const std::function<double()>& eval, double& param, double step = 1e-5) {
    const double saved = param;
    param = saved + step;
    const double up = eval();
    param = saved - step;
    const double down = eval();
    param = saved;
    return (up - down) / (2.0 * step);
}

/// A computation rebuilt from external parameter storage: the scalar loss
/// plus the leaves whose gradients are under test, aligned with the caller's
/// parameter matrices.
struct BuiltGraph {
    esrnn::ad::DiffArray loss;
    std::vector<esrnn::ad::DiffArray> leaves;
};

/// Central differences carry roundoff of order eps * |f| / step per element;
/// disagreements below that floor are measurement noise, not gradient error.
inline double fd_noise_floor(double f0, double step) {
    return 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f0)) / step;
}

inline double grad_err(double analytic, double fd, double floor) {
    if (std::abs(analytic - fd) <= floor) return 0.0;
    return rel_err(analytic, fd);
}

/// Worst error between the tape gradient and central finite differences,
/// across every element of every listed parameter. `build` must reconstruct
/// the computation from the current parameter values each call.
inline double max_grad_rel_err(const std::function<BuiltGraph(esrnn::ad::Tape&)>& build,
                               const std::vector<esrnn::Matrix*>& params, double step = 1e-5) {
    esrnn::ad::Tape tape;
    BuiltGraph g = build(tape);
    esrnn::ad::backward(g.loss);
    const double floor = fd_noise_floor(g.loss.value()(0, 0), step);
    std::vector<esrnn::Matrix> grads;
    grads.reserve(g.leaves.size());
    for (const auto& l : g.leaves) grads.push_back(l.grad());

    auto eval = [&]() {
        esrnn::ad::Tape scratch;
        return build(scratch).loss.value()(0, 0);
    };
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t e = 0; e < params[p]->size(); ++e) {
            const double fd = central_diff(eval, params[p]->data()[e], step);
            worst = std::max(worst, grad_err(grads[p].data()[e], fd, floor));
        }
    }
    return worst;
}

/// Same check over a random sample of parameter elements, for large models.
inline double sampled_grad_rel_err(const std::function<BuiltGraph(esrnn::ad::Tape&)>& build,
                                   const std::vector<esrnn::Matrix*>& params, std::size_t samples,
                                   esrnn::Rng& rng, double step = 1e-5) {
    esrnn::ad::Tape tape;
    BuiltGraph g = build(tape);
    esrnn::ad::backward(g.loss);
    const double floor = fd_noise_floor(g.loss.value()(0, 0), step);
    std::vector<esrnn::Matrix> grads;
    grads.reserve(g.leaves.size());
    for (const auto& l : g.leaves) grads.push_back(l.grad());

    auto eval = [&]() {
        esrnn::ad::Tape scratch;
        return build(scratch).loss.value()(0, 0);
    };
    std::size_t total = 0;
    for (const auto* p : params) total += p->size();
    double worst = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        std::size_t pick = rng.below(total);
        std::size_t p = 0;
        while (pick >= params[p]->size()) pick -= params[p]->size(), ++p;
        const double fd = central_diff(eval, params[p]->data()[pick], step);
        worst = std::max(worst, grad_err(grads[p].data()[pick], fd, floor));
    }
    return worst;
}

/// Literal transcription of the multiplicative Holt-Winters recursions
///   l_t = alpha (y_t / s_{t-m}) + (1 - alpha) l_{t-1} b_{t-1}
///   b_t = beta (l_t / l_{t-1}) + (1 - beta) b_{t-1}
///   s_t = gamma y_t / (l_{t-1} b_{t-1}) + (1 - gamma) s_{t-m}
///   yhat_{T+h} = l_T b_T^h s_{T-m+((h-1) mod m)+1}
/// using 1-based time arrays. Kept independent of the library so
/// it can serve as an oracle.
inline std::vector<double> hw_reference_forecast(const std::vector<double>& y, double alpha,
                                                 double beta, double gamma, double l0, double b0,
                                                 const std::vector<double>& season_init, int h) {
    const int m = static_cast<int>(season_init.size());
    const int t_max = static_cast<int>(y.size());
    std::vector<double> s_store(static_cast<std::size_t>(t_max + m));
    for (int j = 0; j < m; ++j) s_store[static_cast<std::size_t>(j)] = season_init[static_cast<std::size_t>(j)];
    auto s_at = [&](int t) -> double& { return s_store[static_cast<std::size_t>(t + m - 1)]; };

    std::vector<double> l(static_cast<std::size_t>(t_max + 1)), b(static_cast<std::size_t>(t_max + 1));
    l[0] = l0;
    b[0] = b0;
    for (int t = 1; t <= t_max; ++t) {
        const double yt = y[static_cast<std::size_t>(t - 1)];
        l[static_cast<std::size_t>(t)] =
            alpha * (yt / s_at(t - m)) + (1.0 - alpha) * l[static_cast<std::size_t>(t - 1)] * b[static_cast<std::size_t>(t - 1)];
        b[static_cast<std::size_t>(t)] =
            beta * (l[static_cast<std::size_t>(t)] / l[static_cast<std::size_t>(t - 1)]) +
            (1.0 - beta) * b[static_cast<std::size_t>(t - 1)];
        s_at(t) = gamma * yt / (l[static_cast<std::size_t>(t - 1)] * b[static_cast<std::size_t>(t - 1)]) +
                  (1.0 - gamma) * s_at(t - m);
    }

    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(h));
    for (int step = 1; step <= h; ++step) {
        const int hp = ((step - 1) % m) + 1;
        out.push_back(l[static_cast<std::size_t>(t_max)] *
                      std::pow(b[static_cast<std::size_t>(t_max)], static_cast<double>(step)) *
                      s_at(t_max - m + hp));
    }
    return out;
}

/// y_t = level * (1 + trend)^t * season_{t mod S} * exp(sigma * z_t)
inline esrnn::SeriesRecord make_multiplicative_series(esrnn::Rng& rng, const std::string& id,
                                                      int length, int season_length,
                                                      double noise_sigma, double trend_lo = 0.005,
                                                      double trend_hi = 0.02) {
    esrnn::SeriesRecord rec;
    rec.id = id;
    rec.category = static_cast<esrnn::Category>(rng.below(6));
    const double level = rng.uniform(50.0, 150.0);
    const double trend = rng.uniform(trend_lo, trend_hi);
    std::vector<double> season(static_cast<std::size_t>(season_length));
    double log_mean = 0.0;
    for (double& s : season) {
        s = rng.uniform(0.6, 1.4);
        log_mean += std::log(s);
    }
    log_mean /= static_cast<double>(season_length);
    for (double& s : season) s = std::exp(std::log(s) - log_mean);  // geometric mean 1
    rec.values.reserve(static_cast<std::size_t>(length));
    for (int t = 0; t < length; ++t) {
        const double noise = noise_sigma > 0.0 ? std::exp(noise_sigma * rng.normal()) : 1.0;
        rec.values.push_back(level * std::pow(1.0 + trend, static_cast<double>(t)) *
                             season[static_cast<std::size_t>(t % season_length)] * noise);
    }
    return rec;
}

} // namespace testutil
