#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pel/batch.hpp"

namespace pel {

// Reverse integration targets this floor instead of 0 to avoid score blow-up
// for near-degenerate mixtures.
inline constexpr double kSigmaFloor = 1e-4;

struct GmmComponent {
    double weight = 1.0;
    std::vector<double> mean;
    std::vector<double> variance;  // diagonal covariance
};

// Diagonal-covariance Gaussian mixture. Plays the data prior and, through
// closed forms on the noisy marginal p_sigma (variances shifted by sigma^2),
// the exact score network. Immutable after construction, shareable across
// workers.
class GmmModel {
  public:
    GmmModel(int d, std::vector<GmmComponent> components);

    // "std-normal-1d", "bimodal-1d", "grid-gmm-2d".
    static GmmModel builtin(std::string_view name);

    int d() const { return d_; }
    const std::vector<GmmComponent>& components() const { return components_; }

    // log p_sigma(x) of the noisy marginal, log-sum-exp stabilized.
    double log_density(double sigma_t, std::span<const double> x) const;

    // grad_x log p_sigma(x): responsibility-weighted sum of component scores.
    void score(double sigma_t, std::span<const double> x, std::span<double> out) const;

    // Tweedie estimate E[X0|X_t = x_t] = x_t + sigma_t^2 * score. Computed by
    // exactly that expression so the identity holds bit-for-bit.
    void posterior_mean(double sigma_t, std::span<const double> x_t, std::span<double> out) const;

    // Hessian of log p_sigma at x, row-major d*d. Feeds the analytic
    // constraint gradient of the DPS solver (Jacobian of the Tweedie map is
    // I + sigma^2 H).
    void log_density_hessian(double sigma_t, std::span<const double> x, double* out) const;

    // Solution map of the probability-flow ODE from sigma_t down to the
    // floor: the stand-in for a distilled one-call network. Closed form for a
    // single component, internal Heun integration with oracle_steps steps
    // (>= 64 required) for mixtures.
    void consistency_map(double sigma_t, std::span<const double> x_t, std::span<double> out,
                         int oracle_steps) const;

    // i.i.d. draws; row i is a pure function of (seed, i).
    SampleBatch sample_data(int64_t n, uint64_t seed) const;

    // PSNR peak: (max mean - min mean) + 8 * max std, a fixed span covering
    // essentially all mass of an unbounded support.
    double peak() const;

  private:
    int d_;
    std::vector<GmmComponent> components_;
    // responsibilities and per-component scores at (sigma, x); workspace
    // passed by caller to stay allocation-free in row loops
    friend struct GmmWork;
};

// Exact score plus a*sin(omega*x_j) on coordinate j: a smooth, bounded,
// deterministic stand-in for score-network approximation error.
struct PerturbedScore {
    const GmmModel* base = nullptr;
    double amplitude = 0.0;
    double omega = 1.0;
};

// Row-level score interface consumed by the solvers.
class ScoreField {
  public:
    virtual ~ScoreField() = default;
    virtual int d() const = 0;
    virtual void score(double sigma_t, std::span<const double> x, std::span<double> out) const = 0;
    // Hessian of log p_sigma, row-major d*d; false when the field cannot
    // provide it (DPS analytic mode then rejects).
    virtual bool log_density_hessian(double sigma_t, std::span<const double> x, double* out) const {
        (void)sigma_t;
        (void)x;
        (void)out;
        return false;
    }
};

class GmmScoreField : public ScoreField {
  public:
    explicit GmmScoreField(const GmmModel& model) : model_(&model) {}
    int d() const override { return model_->d(); }
    void score(double sigma_t, std::span<const double> x, std::span<double> out) const override {
        model_->score(sigma_t, x, out);
    }
    bool log_density_hessian(double sigma_t, std::span<const double> x, double* out) const override {
        model_->log_density_hessian(sigma_t, x, out);
        return true;
    }

  private:
    const GmmModel* model_;
};

class PerturbedScoreField : public ScoreField {
  public:
    PerturbedScoreField(const GmmModel& model, double amplitude, double omega);
    int d() const override;
    void score(double sigma_t, std::span<const double> x, std::span<double> out) const override;
    bool log_density_hessian(double sigma_t, std::span<const double> x, double* out) const override;

  private:
    const GmmModel* model_;
    double amplitude_;
    double omega_;
};

}  // namespace pel
