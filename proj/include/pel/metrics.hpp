#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pel/batch.hpp"

namespace pel {

// Histogram domain for the grid divergences, d <= 2. Every use checks that
// the analytic reference leaves at most 1e-6 mass outside the box.
struct GridSpec {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<int> bins;

    int dims() const { return static_cast<int>(bins.size()); }
    void validate(int expected_d) const;
};

using LogDensityFn = std::function<double(std::span<const double>)>;
using ScoreFn = std::function<void(std::span<const double>, std::span<double>)>;

double mse(const SampleBatch& x, const SampleBatch& y);

// 10*log10(peak^2/mse); mse 0 maps to the +infinity sentinel.
double psnr(double mse_value, double peak);

struct KlGridResult {
    double value = 0.0;
    double out_of_grid_fraction = 0.0;
    bool out_of_grid_warning = false;  // more than 1% of samples fell outside
};

// Histogram KL of samples against an analytic density: bins mass-normalized,
// smoothing mass added then renormalized, reference integrated per bin by the
// midpoint rule. The self-distance bias of this estimator is pinned by a
// calibration test; kKlNoise* below are those pinned values.
KlGridResult kl_grid(const SampleBatch& samples_p, const LogDensityFn& log_q, const GridSpec& grid,
                     double smoothing = 1e-12);

// Pinned grid-KL estimator noise: self-distance of the histogram estimator at
// the standard settings (n = 2e5..1e6, 512 bins 1D / 96x96 2D). Inequality
// checks use multiples of these.
inline constexpr double kKlNoise1d = 0.003;
inline constexpr double kKlNoise2d = 0.012;

struct KlMcResult {
    double value = 0.0;
    double std_error = 0.0;
};

// Monte-Carlo KL between two analytic densities using samples from p.
KlMcResult kl_monte_carlo(const LogDensityFn& log_p, const LogDensityFn& log_q, const SampleBatch& samples_from_p,
                          int workers = 0);

// Frechet distance between Gaussian fits of two sample sets (identity-feature
// FID analog): ||mu_a-mu_b||^2 + tr(Sa + Sb - 2(Sa Sb)^(1/2)).
double frechet_gaussian(const SampleBatch& a, const SampleBatch& b, bool* regularized = nullptr);

// Same formula on caller-supplied moments (closed-form test cases).
double frechet_from_moments(std::span<const double> mu_a, std::span<const double> cov_a,
                            std::span<const double> mu_b, std::span<const double> cov_b, int d,
                            bool* regularized = nullptr);

// Integral of p * ||score_p - score_q||^2 over the grid (midpoint rule).
double fisher_divergence_grid(const ScoreFn& p_score, const ScoreFn& q_score, const LogDensityFn& p_log_density,
                              const GridSpec& grid);

struct RatePoint {
    double rate = 0.0;    // bits per sample-dimension
    double metric = 0.0;  // PSNR dB or Frechet
};
using RateCurve = std::vector<RatePoint>;

// Bjontegaard delta: cubic fits of metric against log10(rate) (centered
// abscissa), integrated over the overlapping log-rate range; returns the
// average metric difference test - anchor.
double bd_delta(const RateCurve& anchor, const RateCurve& test);

struct MetricsReport {
    double mse = 0.0;
    double psnr_db = 0.0;
    double kl_grid = 0.0;
    double frechet = 0.0;
    std::optional<double> fisher;
    int64_t nfe = 0;
    double rate_bits = 0.0;

    std::string to_json() const;
};

}  // namespace pel
