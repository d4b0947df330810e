#include "pel/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pel/rng.hpp"

namespace pel {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

void check_dim(const GmmModel& m, std::span<const double> x, const char* what) {
    if (static_cast<int>(x.size()) != m.d())
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

}  // namespace

GmmModel::GmmModel(int d, std::vector<GmmComponent> components) : d_(d), components_(std::move(components)) {
    if (d_ < 1) throw std::invalid_argument("GmmModel: d must be >= 1");
    if (components_.empty()) throw std::invalid_argument("GmmModel: at least one component required");
    double wsum = 0.0;
    for (const auto& c : components_) {
        if (!(c.weight > 0.0) || !std::isfinite(c.weight))
            throw std::invalid_argument("GmmModel: weights must be strictly positive");
        if (static_cast<int>(c.mean.size()) != d_ || static_cast<int>(c.variance.size()) != d_)
            throw std::invalid_argument("GmmModel: component dimension mismatch");
        for (double m : c.mean)
            if (!std::isfinite(m)) throw std::invalid_argument("GmmModel: non-finite mean");
        for (double v : c.variance)
            if (!(v > 0.0) || !std::isfinite(v))
                throw std::invalid_argument("GmmModel: variances must be strictly positive");
        wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-12) throw std::invalid_argument("GmmModel: weights must sum to 1 within 1e-12");
}

GmmModel GmmModel::builtin(std::string_view name) {
    if (name == "std-normal-1d") {
        return GmmModel(1, {{1.0, {0.0}, {1.0}}});
    }
    if (name == "bimodal-1d") {
        return GmmModel(1, {{0.5, {-2.0}, {0.25}}, {0.5, {2.0}, {0.25}}});
    }
    if (name == "grid-gmm-2d") {
        std::vector<GmmComponent> comps;
        const double w = 1.0 / 9.0;
        for (double mx : {-4.0, 0.0, 4.0})
            for (double my : {-4.0, 0.0, 4.0}) comps.push_back({w, {mx, my}, {0.25, 0.25}});
        return GmmModel(2, std::move(comps));
    }
    throw ConfigError("unknown built-in model: " + std::string(name));
}

double GmmModel::log_density(double sigma_t, std::span<const double> x) const {
    check_dim(*this, x, "log_density");
    const double s2 = sigma_t * sigma_t;
    double best = -std::numeric_limits<double>::infinity();
    // two passes: component log terms, then log-sum-exp
    double terms[64];
    std::vector<double> heap_terms;
    double* a = components_.size() <= 64 ? terms : (heap_terms.resize(components_.size()), heap_terms.data());
    for (size_t k = 0; k < components_.size(); ++k) {
        const auto& c = components_[k];
        double t = std::log(c.weight);
        for (int j = 0; j < d_; ++j) {
            const double v = c.variance[j] + s2;
            const double r = x[j] - c.mean[j];
            t -= 0.5 * (kLog2Pi + std::log(v) + r * r / v);
        }
        a[k] = t;
        best = std::max(best, t);
    }
    double sum = 0.0;
    for (size_t k = 0; k < components_.size(); ++k) sum += std::exp(a[k] - best);
    return best + std::log(sum);
}

void GmmModel::score(double sigma_t, std::span<const double> x, std::span<double> out) const {
    check_dim(*this, x, "score");
    if (static_cast<int>(out.size()) != d_) throw std::invalid_argument("score: output dimension mismatch");
    const double s2 = sigma_t * sigma_t;
    const size_t K = components_.size();
    double terms_buf[64];
    std::vector<double> heap_terms;
    double* a = K <= 64 ? terms_buf : (heap_terms.resize(K), heap_terms.data());
    double best = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < K; ++k) {
        const auto& c = components_[k];
        double t = std::log(c.weight);
        for (int j = 0; j < d_; ++j) {
            const double v = c.variance[j] + s2;
            const double r = x[j] - c.mean[j];
            t -= 0.5 * (kLog2Pi + std::log(v) + r * r / v);
        }
        a[k] = t;
        best = std::max(best, t);
    }
    double total = 0.0;
    for (size_t k = 0; k < K; ++k) {
        // responsibilities clipped before normalization so a single dominant
        // component cannot zero the rest into NaN territory downstream
        a[k] = std::max(std::exp(a[k] - best), 1e-300);
        total += a[k];
    }
    for (int j = 0; j < d_; ++j) out[j] = 0.0;
    for (size_t k = 0; k < K; ++k) {
        const auto& c = components_[k];
        const double q = a[k] / total;
        for (int j = 0; j < d_; ++j) out[j] += q * (-(x[j] - c.mean[j]) / (c.variance[j] + s2));
    }
}

void GmmModel::posterior_mean(double sigma_t, std::span<const double> x_t, std::span<double> out) const {
    score(sigma_t, x_t, out);
    const double s2 = sigma_t * sigma_t;
    for (int j = 0; j < d_; ++j) out[j] = x_t[j] + s2 * out[j];
}

void GmmModel::log_density_hessian(double sigma_t, std::span<const double> x, double* out) const {
    check_dim(*this, x, "log_density_hessian");
    const double s2 = sigma_t * sigma_t;
    const size_t K = components_.size();
    std::vector<double> a(K), g(K * static_cast<size_t>(d_));
    double best = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < K; ++k) {
        const auto& c = components_[k];
        double t = std::log(c.weight);
        for (int j = 0; j < d_; ++j) {
            const double v = c.variance[j] + s2;
            const double r = x[j] - c.mean[j];
            t -= 0.5 * (kLog2Pi + std::log(v) + r * r / v);
            g[k * d_ + j] = -r / v;
        }
        a[k] = t;
        best = std::max(best, t);
    }
    double total = 0.0;
    for (size_t k = 0; k < K; ++k) {
        a[k] = std::max(std::exp(a[k] - best), 1e-300);
        total += a[k];
    }
    // H = sum_k q_k (g_k g_k^T - diag(1/v_k)) - m m^T with m the mixture score
    std::vector<double> m(d_, 0.0);
    for (int i = 0; i < d_ * d_; ++i) out[i] = 0.0;
    for (size_t k = 0; k < K; ++k) {
        const auto& c = components_[k];
        const double q = a[k] / total;
        const double* gk = &g[k * d_];
        for (int i = 0; i < d_; ++i) {
            m[i] += q * gk[i];
            for (int j = 0; j < d_; ++j) out[i * d_ + j] += q * gk[i] * gk[j];
            out[i * d_ + i] -= q / (c.variance[i] + s2);
        }
    }
    for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j) out[i * d_ + j] -= m[i] * m[j];
}

void GmmModel::consistency_map(double sigma_t, std::span<const double> x_t, std::span<double> out,
                               int oracle_steps) const {
    check_dim(*this, x_t, "consistency_map");
    if (sigma_t < 0.0 || !std::isfinite(sigma_t)) throw std::invalid_argument("consistency_map: bad sigma_t");
    if (sigma_t <= kSigmaFloor) {
        std::copy(x_t.begin(), x_t.end(), out.begin());
        return;
    }
    if (components_.size() == 1) {
        // exact linear flow of the probability-flow ODE for one Gaussian:
        // x(sigma) = mu + (x - mu) * sqrt((v + sigma^2)/(v + sigma_t^2))
        const auto& c = components_[0];
        for (int j = 0; j < d_; ++j) {
            const double v = c.variance[j];
            out[j] = c.mean[j] + (x_t[j] - c.mean[j]) * std::sqrt(v / (v + sigma_t * sigma_t));
        }
        return;
    }
    if (oracle_steps < 64) throw std::invalid_argument("consistency_map: oracle_steps must be >= 64 for mixtures");
    // Heun in sigma^2 on a geometric grid down to the floor; final interval
    // Euler. Mirrors the ode_heun solver so the distillation claim is about
    // the same map.
    std::vector<double> x(x_t.begin(), x_t.end());
    std::vector<double> k1(d_), k2(d_), xp(d_);
    const double ratio = sigma_t / kSigmaFloor;
    const int m = oracle_steps;
    double sig_hi = sigma_t;
    for (int i = m; i >= 1; --i) {
        const double sig_lo = kSigmaFloor * std::pow(ratio, static_cast<double>(i - 1) / m);
        const double h = sig_lo * sig_lo - sig_hi * sig_hi;
        score(sig_hi, x, k1);
        if (i == 1) {
            for (int j = 0; j < d_; ++j) x[j] += h * (-0.5 * k1[j]);
        } else {
            for (int j = 0; j < d_; ++j) xp[j] = x[j] + h * (-0.5 * k1[j]);
            score(sig_lo, xp, k2);
            for (int j = 0; j < d_; ++j) x[j] += h * 0.5 * (-0.5 * k1[j] - 0.5 * k2[j]);
        }
        sig_hi = sig_lo;
    }
    std::copy(x.begin(), x.end(), out.begin());
}

SampleBatch GmmModel::sample_data(int64_t n, uint64_t seed) const {
    if (n < 1) throw std::invalid_argument("sample_data: n must be >= 1");
    SampleBatch out(n, d_);
    // cumulative weights once; per-row stream from the derivation contract
    std::vector<double> cum(components_.size());
    double acc = 0.0;
    for (size_t k = 0; k < components_.size(); ++k) {
        acc += components_[k].weight;
        cum[k] = acc;
    }
    cum.back() = 1.0;
    for (int64_t i = 0; i < n; ++i) {
        Rng rng(sample_stream(seed, static_cast<uint64_t>(i)));
        const double u = rng.uniform();
        size_t k = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
        if (k >= components_.size()) k = components_.size() - 1;
        const auto& c = components_[k];
        double* row = out.row(i);
        for (int j = 0; j < d_; ++j) row[j] = c.mean[j] + std::sqrt(c.variance[j]) * rng.normal();
    }
    return out;
}

double GmmModel::peak() const {
    double max_mean = -std::numeric_limits<double>::infinity();
    double min_mean = std::numeric_limits<double>::infinity();
    double max_var = 0.0;
    for (const auto& c : components_) {
        for (int j = 0; j < d_; ++j) {
            max_mean = std::max(max_mean, c.mean[j]);
            min_mean = std::min(min_mean, c.mean[j]);
            max_var = std::max(max_var, c.variance[j]);
        }
    }
    return (max_mean - min_mean) + 8.0 * std::sqrt(max_var);
}

PerturbedScoreField::PerturbedScoreField(const GmmModel& model, double amplitude, double omega)
    : model_(&model), amplitude_(amplitude), omega_(omega) {
    if (amplitude < 0.0 || !std::isfinite(amplitude)) throw std::invalid_argument("perturbed score: amplitude must be >= 0");
    if (!(omega > 0.0) || !std::isfinite(omega)) throw std::invalid_argument("perturbed score: omega must be > 0");
}

int PerturbedScoreField::d() const { return model_->d(); }

void PerturbedScoreField::score(double sigma_t, std::span<const double> x, std::span<double> out) const {
    model_->score(sigma_t, x, out);
    if (amplitude_ == 0.0) return;  // bit-for-bit the exact score
    for (size_t j = 0; j < x.size(); ++j) out[j] += amplitude_ * std::sin(omega_ * x[j]);
}

bool PerturbedScoreField::log_density_hessian(double sigma_t, std::span<const double> x, double* out) const {
    model_->log_density_hessian(sigma_t, x, out);
    const int d = model_->d();
    for (int j = 0; j < d; ++j) out[j * d + j] += amplitude_ * omega_ * std::cos(omega_ * x[j]);
    return true;
}

}  // namespace pel
