#include "pel/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "pel/parallel.hpp"

namespace pel {

void GridSpec::validate(int expected_d) const {
    const size_t d = bins.size();
    if (d < 1 || d > 2) throw std::invalid_argument("GridSpec: only d <= 2 grids supported");
    if (lo.size() != d || hi.size() != d) throw std::invalid_argument("GridSpec: lo/hi/bins size mismatch");
    if (expected_d > 0 && static_cast<int>(d) != expected_d)
        throw std::invalid_argument("GridSpec: dimension does not match the data");
    for (size_t j = 0; j < d; ++j) {
        if (!(lo[j] < hi[j])) throw std::invalid_argument("GridSpec: need lo < hi");
        if (bins[j] < 64) throw std::invalid_argument("GridSpec: need >= 64 bins per dimension");
    }
}

double mse(const SampleBatch& x, const SampleBatch& y) {
    require_same_shape(x, y, "mse");
    double acc = 0.0;
    for (size_t i = 0; i < x.values.size(); ++i) {
        const double r = x.values[i] - y.values[i];
        acc += r * r;
    }
    return x.values.empty() ? 0.0 : acc / static_cast<double>(x.values.size());
}

double psnr(double mse_value, double peak) {
    if (mse_value < 0.0 || !(peak > 0.0)) throw std::invalid_argument("psnr: mse >= 0 and peak > 0 required");
    if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse_value);
}

namespace {

// Per-bin Simpson mass of the reference, used for the coverage invariant
// (midpoint alone would make the coverage test depend on its own bias).
double reference_coverage(const LogDensityFn& log_q, const GridSpec& grid) {
    const int d = grid.dims();
    if (d == 1) {
        const double w = (grid.hi[0] - grid.lo[0]) / grid.bins[0];
        double mass = 0.0;
        double x_prev = grid.lo[0];
        double f_prev = std::exp(log_q(std::span<const double>(&x_prev, 1)));
        for (int b = 0; b < grid.bins[0]; ++b) {
            const double xm = grid.lo[0] + (b + 0.5) * w;
            const double xr = grid.lo[0] + (b + 1.0) * w;
            const double fm = std::exp(log_q(std::span<const double>(&xm, 1)));
            const double fr = std::exp(log_q(std::span<const double>(&xr, 1)));
            mass += w / 6.0 * (f_prev + 4.0 * fm + fr);
            f_prev = fr;
        }
        return mass;
    }
    const double wx = (grid.hi[0] - grid.lo[0]) / grid.bins[0];
    const double wy = (grid.hi[1] - grid.lo[1]) / grid.bins[1];
    // tensor Simpson on each cell: weights 1,4,1 per axis
    double mass = 0.0;
    for (int bx = 0; bx < grid.bins[0]; ++bx) {
        const double x0 = grid.lo[0] + bx * wx;
        const double xs[3] = {x0, x0 + 0.5 * wx, x0 + wx};
        for (int by = 0; by < grid.bins[1]; ++by) {
            const double y0 = grid.lo[1] + by * wy;
            const double ys[3] = {y0, y0 + 0.5 * wy, y0 + wy};
            static constexpr double kw[3] = {1.0, 4.0, 1.0};
            double cell = 0.0;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    const double pt[2] = {xs[i], ys[j]};
                    cell += kw[i] * kw[j] * std::exp(log_q(std::span<const double>(pt, 2)));
                }
            mass += cell * wx * wy / 36.0;
        }
    }
    return mass;
}

void check_coverage(const LogDensityFn& log_q, const GridSpec& grid, const char* what) {
    const double inside = reference_coverage(log_q, grid);
    if (1.0 - inside > 1e-6)
        throw NumericalError(std::string(what) + ": reference density leaves more than 1e-6 mass outside the grid");
}

}  // namespace

KlGridResult kl_grid(const SampleBatch& samples_p, const LogDensityFn& log_q, const GridSpec& grid, double smoothing) {
    grid.validate(static_cast<int>(samples_p.d));
    if (samples_p.n < 1) throw std::invalid_argument("kl_grid: empty sample set");
    if (!(smoothing > 0.0)) throw std::invalid_argument("kl_grid: smoothing must be > 0");
    check_coverage(log_q, grid, "kl_grid");

    const int d = grid.dims();
    const int bx = grid.bins[0];
    const int by = d == 2 ? grid.bins[1] : 1;
    const int64_t nbins = static_cast<int64_t>(bx) * by;
    std::vector<int64_t> counts(nbins, 0);
    int64_t outside = 0;
    const double wx = (grid.hi[0] - grid.lo[0]) / bx;
    const double wy = d == 2 ? (grid.hi[1] - grid.lo[1]) / by : 1.0;
    for (int64_t i = 0; i < samples_p.n; ++i) {
        const double* row = samples_p.row(i);
        const int ix = static_cast<int>(std::floor((row[0] - grid.lo[0]) / wx));
        if (ix < 0 || ix >= bx) {
            ++outside;
            continue;
        }
        int iy = 0;
        if (d == 2) {
            iy = static_cast<int>(std::floor((row[1] - grid.lo[1]) / wy));
            if (iy < 0 || iy >= by) {
                ++outside;
                continue;
            }
        }
        ++counts[static_cast<int64_t>(ix) * by + iy];
    }
    const int64_t inside_n = samples_p.n - outside;
    if (inside_n < 1) throw NumericalError("kl_grid: all samples fell outside the grid");

    const double cell_vol = wx * (d == 2 ? wy : 1.0);
    const double renorm = 1.0 + static_cast<double>(nbins) * smoothing;
    double kl = 0.0;
    for (int64_t b = 0; b < nbins; ++b) {
        const double phat = (static_cast<double>(counts[b]) / inside_n + smoothing) / renorm;
        const int ix = static_cast<int>(b / by);
        const int iy = static_cast<int>(b % by);
        double mid[2] = {grid.lo[0] + (ix + 0.5) * wx, d == 2 ? grid.lo[1] + (iy + 0.5) * wy : 0.0};
        const double qmass = std::exp(log_q(std::span<const double>(mid, static_cast<size_t>(d)))) * cell_vol;
        kl += phat * (std::log(phat) - std::log(qmass));
    }
    KlGridResult res;
    res.value = kl;
    res.out_of_grid_fraction = static_cast<double>(outside) / static_cast<double>(samples_p.n);
    res.out_of_grid_warning = res.out_of_grid_fraction > 0.01;
    return res;
}

KlMcResult kl_monte_carlo(const LogDensityFn& log_p, const LogDensityFn& log_q, const SampleBatch& samples_from_p,
                          int workers) {
    if (samples_from_p.n < 1) throw std::invalid_argument("kl_monte_carlo: empty sample set");
    const int64_t n = samples_from_p.n;
    // per-sample terms materialized so the reduction order (and therefore the
    // result) does not depend on the worker count
    std::vector<double> terms(static_cast<size_t>(n));
    parallel_for_rows(n, workers, [&](int64_t i) {
        const auto row = samples_from_p.row_span(i);
        terms[static_cast<size_t>(i)] = log_p(row) - log_q(row);
    });
    double sum = 0.0;
    for (double t : terms) sum += t;
    const double mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (double t : terms) {
        const double r = t - mean;
        var += r * r;
    }
    var = n > 1 ? var / static_cast<double>(n - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

namespace {

double frechet_impl(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& cov_a, const Eigen::VectorXd& mu_b,
                    const Eigen::MatrixXd& cov_b, bool* regularized) {
    if (regularized) *regularized = false;
    if (mu_a == mu_b && cov_a == cov_b) return 0.0;  // identical inputs: exactly zero

    Eigen::MatrixXd a = 0.5 * (cov_a + cov_a.transpose());
    Eigen::MatrixXd b = 0.5 * (cov_b + cov_b.transpose());
    const auto near_singular = [](const Eigen::MatrixXd& m) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff() < 1e-12;
    };
    if (near_singular(a) || near_singular(b)) {
        const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(a.rows(), a.cols());
        a += 1e-10 * eye;
        b += 1e-10 * eye;
        if (regularized) *regularized = true;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(a);
    Eigen::VectorXd la = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd sqrt_a = ea.eigenvectors() * la.asDiagonal() * ea.eigenvectors().transpose();
    Eigen::MatrixXd m = sqrt_a * b * sqrt_a;
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(m, Eigen::EigenvaluesOnly);
    // tiny negative eigenvalues are estimator noise; clamp before the root
    const double tr_sqrt = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    const double val = (mu_a - mu_b).squaredNorm() + a.trace() + b.trace() - 2.0 * tr_sqrt;
    return std::max(val, 0.0);
}

}  // namespace

double frechet_from_moments(std::span<const double> mu_a, std::span<const double> cov_a, std::span<const double> mu_b,
                            std::span<const double> cov_b, int d, bool* regularized) {
    if (d < 1 || d > 16) throw std::invalid_argument("frechet: d must be in [1,16]");
    const size_t dd = static_cast<size_t>(d) * d;
    if (mu_a.size() != static_cast<size_t>(d) || mu_b.size() != static_cast<size_t>(d) || cov_a.size() != dd ||
        cov_b.size() != dd)
        throw std::invalid_argument("frechet: moment shape mismatch");
    Eigen::VectorXd ma = Eigen::Map<const Eigen::VectorXd>(mu_a.data(), d);
    Eigen::VectorXd mb = Eigen::Map<const Eigen::VectorXd>(mu_b.data(), d);
    Eigen::MatrixXd ca = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        cov_a.data(), d, d);
    Eigen::MatrixXd cb = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        cov_b.data(), d, d);
    return frechet_impl(ma, ca, mb, cb, regularized);
}

double frechet_gaussian(const SampleBatch& a, const SampleBatch& b, bool* regularized) {
    if (a.d != b.d) throw std::invalid_argument("frechet_gaussian: dimension mismatch");
    if (a.n < 1000 || b.n < 1000) throw std::invalid_argument("frechet_gaussian: need n >= 1000 per set");
    if (a.d > 16) throw std::invalid_argument("frechet_gaussian: d must be <= 16");
    const int d = static_cast<int>(a.d);
    const auto moments = [d](const SampleBatch& s, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
        mu = Eigen::VectorXd::Zero(d);
        for (int64_t i = 0; i < s.n; ++i)
            for (int j = 0; j < d; ++j) mu[j] += s.row(i)[j];
        mu /= static_cast<double>(s.n);
        cov = Eigen::MatrixXd::Zero(d, d);
        for (int64_t i = 0; i < s.n; ++i) {
            const double* row = s.row(i);
            for (int p = 0; p < d; ++p)
                for (int q = 0; q < d; ++q) cov(p, q) += (row[p] - mu[p]) * (row[q] - mu[q]);
        }
        cov /= static_cast<double>(s.n - 1);
    };
    Eigen::VectorXd mu_a, mu_b;
    Eigen::MatrixXd cov_a, cov_b;
    moments(a, mu_a, cov_a);
    moments(b, mu_b, cov_b);
    if (a.n == b.n && a.values == b.values) return 0.0;  // identical sets: exactly zero
    return frechet_impl(mu_a, cov_a, mu_b, cov_b, regularized);
}

double fisher_divergence_grid(const ScoreFn& p_score, const ScoreFn& q_score, const LogDensityFn& p_log_density,
                              const GridSpec& grid) {
    grid.validate(0);
    check_coverage(p_log_density, grid, "fisher_divergence_grid");
    const int d = grid.dims();
    const int bx = grid.bins[0];
    const int by = d == 2 ? grid.bins[1] : 1;
    const double wx = (grid.hi[0] - grid.lo[0]) / bx;
    const double wy = d == 2 ? (grid.hi[1] - grid.lo[1]) / by : 1.0;
    const double vol = wx * (d == 2 ? wy : 1.0);
    double acc = 0.0;
    double sp[2], sq[2], mid[2];
    for (int ix = 0; ix < bx; ++ix) {
        mid[0] = grid.lo[0] + (ix + 0.5) * wx;
        for (int iy = 0; iy < by; ++iy) {
            if (d == 2) mid[1] = grid.lo[1] + (iy + 0.5) * wy;
            const std::span<const double> x(mid, static_cast<size_t>(d));
            p_score(x, std::span<double>(sp, static_cast<size_t>(d)));
            q_score(x, std::span<double>(sq, static_cast<size_t>(d)));
            double diff2 = 0.0;
            for (int j = 0; j < d; ++j) {
                const double r = sp[j] - sq[j];
                diff2 += r * r;
            }
            acc += std::exp(p_log_density(x)) * diff2 * vol;
        }
    }
    return acc;
}

namespace {

struct CubicFit {
    double center = 0.0;
    Eigen::Vector4d coef;  // metric ~ c0 + c1 t + c2 t^2 + c3 t^3, t = log10(rate) - center

    double integral(double lo, double hi) const {
        const auto anti = [&](double x) {
            const double t = x - center;
            return coef[0] * t + coef[1] * t * t / 2.0 + coef[2] * t * t * t / 3.0 + coef[3] * t * t * t * t / 4.0;
        };
        return anti(hi) - anti(lo);
    }
};

CubicFit fit_cubic(const RateCurve& curve, const char* what) {
    if (curve.size() < 4) throw std::invalid_argument(std::string(what) + ": need >= 4 rate points");
    const int n = static_cast<int>(curve.size());
    Eigen::VectorXd lx(n), y(n);
    for (int i = 0; i < n; ++i) {
        if (!(curve[i].rate > 0.0)) throw std::invalid_argument(std::string(what) + ": rates must be positive");
        if (i > 0 && !(curve[i].rate > curve[i - 1].rate))
            throw std::invalid_argument(std::string(what) + ": rates must be strictly increasing");
        if (!std::isfinite(curve[i].metric)) throw std::invalid_argument(std::string(what) + ": non-finite metric");
        lx[i] = std::log10(curve[i].rate);
        y[i] = curve[i].metric;
    }
    CubicFit fit;
    fit.center = lx.mean();
    Eigen::MatrixXd v(n, 4);
    for (int i = 0; i < n; ++i) {
        const double t = lx[i] - fit.center;
        v(i, 0) = 1.0;
        v(i, 1) = t;
        v(i, 2) = t * t;
        v(i, 3) = t * t * t;
    }
    fit.coef = v.colPivHouseholderQr().solve(y);
    return fit;
}

}  // namespace

double bd_delta(const RateCurve& anchor, const RateCurve& test) {
    const CubicFit fa = fit_cubic(anchor, "bd_delta anchor");
    const CubicFit ft = fit_cubic(test, "bd_delta test");
    const double lo = std::max(std::log10(anchor.front().rate), std::log10(test.front().rate));
    const double hi = std::min(std::log10(anchor.back().rate), std::log10(test.back().rate));
    if (!(hi > lo)) throw std::invalid_argument("bd_delta: log-rate ranges do not overlap");
    return (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
}

std::string MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["mse"] = mse;
    if (std::isinf(psnr_db)) {
        j["psnr_db"] = "inf";  // JSON has no infinity literal; keep the sentinel visible
    } else {
        j["psnr_db"] = psnr_db;
    }
    j["kl_grid"] = kl_grid;
    j["frechet"] = frechet;
    if (fisher) j["fisher"] = *fisher;
    j["nfe"] = nfe;
    j["rate_bits"] = rate_bits;
    return j.dump(2) + "\n";
}

}  // namespace pel
