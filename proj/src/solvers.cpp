#include "pel/solvers.hpp"

#include <algorithm>
#include <cmath>

#include "pel/parallel.hpp"
#include "pel/rng.hpp"

namespace pel {

NoiseSchedule build_schedule(double sigma_min, double sigma_max, int n_steps, Spacing spacing) {
    if (!(sigma_min > 0.0) || !(sigma_max > sigma_min) || !std::isfinite(sigma_max))
        throw std::invalid_argument("build_schedule: need 0 < sigma_min < sigma_max");
    if (n_steps < 1) throw std::invalid_argument("build_schedule: n_steps must be >= 1");
    NoiseSchedule s;
    s.sigma_min = sigma_min;
    s.sigma_max = sigma_max;
    s.n_steps = n_steps;
    s.spacing = spacing;
    s.grid.resize(static_cast<size_t>(n_steps) + 1);
    for (int i = 0; i <= n_steps; ++i) {
        const double f = static_cast<double>(i) / n_steps;
        s.grid[i] = spacing == Spacing::geometric ? sigma_min * std::pow(sigma_max / sigma_min, f)
                                                  : sigma_min + (sigma_max - sigma_min) * f;
    }
    s.grid.front() = sigma_min;
    s.grid.back() = sigma_max;
    return s;
}

const char* solver_name(Solver s) {
    switch (s) {
        case Solver::sde_euler: return "sde-euler";
        case Solver::ode_euler: return "ode-euler";
        case Solver::ode_heun: return "ode-heun";
        case Solver::consistency: return "consistency";
        case Solver::dps_sde: return "dps-sde";
    }
    return "?";
}

Solver solver_from_name(const std::string& name) {
    if (name == "sde-euler") return Solver::sde_euler;
    if (name == "ode-euler") return Solver::ode_euler;
    if (name == "ode-heun") return Solver::ode_heun;
    if (name == "consistency") return Solver::consistency;
    if (name == "dps-sde") return Solver::dps_sde;
    throw ConfigError("unknown solver: " + name);
}

const char* gradient_mode_name(GradientMode m) {
    switch (m) {
        case GradientMode::recon_consistency: return "recon-consistency";
        case GradientMode::bitstream_consistency: return "bitstream-consistency";
        case GradientMode::finite_difference: return "finite-difference";
    }
    return "?";
}

GradientMode gradient_mode_from_name(const std::string& name) {
    if (name == "recon-consistency") return GradientMode::recon_consistency;
    if (name == "bitstream-consistency") return GradientMode::bitstream_consistency;
    if (name == "finite-difference") return GradientMode::finite_difference;
    throw ConfigError("unknown gradient mode: " + name);
}

namespace {

// Index of start_sigma on the grid; the caller must pass an actual knot (the
// pipeline always builds the schedule to end at its sigma_t).
int start_index(const NoiseSchedule& schedule, double start_sigma) {
    if (schedule.grid.size() != static_cast<size_t>(schedule.n_steps) + 1)
        throw std::invalid_argument("solver: schedule grid not built");
    for (int i = static_cast<int>(schedule.grid.size()) - 1; i >= 0; --i) {
        if (std::abs(schedule.grid[i] - start_sigma) <= 1e-9 * std::max(1.0, std::abs(start_sigma))) return i;
    }
    throw std::invalid_argument("solver: start_sigma is not a grid point of the schedule");
}

void check_field_dim(const ScoreField& field, const SampleBatch& x) {
    if (field.d() != x.d) throw std::invalid_argument("solver: score field dimension mismatch");
}

}  // namespace

SampleBatch add_noise(const SampleBatch& x, double sigma_t, uint64_t rng_seed, int workers) {
    if (sigma_t < 0.0 || !std::isfinite(sigma_t)) throw std::invalid_argument("add_noise: bad sigma_t");
    SampleBatch out = x;
    if (sigma_t == 0.0) return out;
    parallel_for_rows(x.n, workers, [&](int64_t i) {
        Rng rng(sample_stream(rng_seed, static_cast<uint64_t>(i)));
        double* row = out.row(i);
        for (int64_t j = 0; j < x.d; ++j) row[j] += sigma_t * rng.normal();
    });
    return out;
}

std::pair<SampleBatch, SolverRun> sde_euler(const ScoreField& field, const NoiseSchedule& schedule,
                                            const SampleBatch& x_start, double start_sigma, uint64_t rng_seed,
                                            int workers) {
    check_field_dim(field, x_start);
    SolverRun run{Solver::sde_euler, start_sigma, 0, 0, false};
    SampleBatch out = x_start;
    if (start_sigma <= schedule.sigma_min || start_sigma <= kSigmaFloor) return {std::move(out), run};
    const int idx = start_index(schedule, start_sigma);
    if (idx == 0) return {std::move(out), run};
    const int64_t d = x_start.d;
    parallel_for_rows(x_start.n, workers, [&](int64_t i) {
        Rng rng(sample_stream(rng_seed, static_cast<uint64_t>(i)));
        std::vector<double> s(d);
        double* x = out.row(i);
        for (int k = idx; k >= 1; --k) {
            const double hi = schedule.grid[k], lo = schedule.grid[k - 1];
            const double dv = hi * hi - lo * lo;
            field.score(hi, {x, static_cast<size_t>(d)}, s);
            const double sd = std::sqrt(dv);
            for (int64_t j = 0; j < d; ++j) x[j] += dv * s[j] + sd * rng.normal();
        }
    });
    run.nfe = idx;
    return {std::move(out), run};
}

std::pair<SampleBatch, SolverRun> ode_euler(const ScoreField& field, const NoiseSchedule& schedule,
                                            const SampleBatch& x_start, double start_sigma, int workers) {
    check_field_dim(field, x_start);
    SolverRun run{Solver::ode_euler, start_sigma, 0, 0, false};
    SampleBatch out = x_start;
    if (start_sigma <= schedule.sigma_min || start_sigma <= kSigmaFloor) return {std::move(out), run};
    const int idx = start_index(schedule, start_sigma);
    if (idx == 0) return {std::move(out), run};
    const int64_t d = x_start.d;
    parallel_for_rows(x_start.n, workers, [&](int64_t i) {
        std::vector<double> s(d);
        double* x = out.row(i);
        for (int k = idx; k >= 1; --k) {
            const double hi = schedule.grid[k], lo = schedule.grid[k - 1];
            const double h = lo * lo - hi * hi;  // negative
            field.score(hi, {x, static_cast<size_t>(d)}, s);
            for (int64_t j = 0; j < d; ++j) x[j] += h * (-0.5 * s[j]);
        }
    });
    run.nfe = idx;
    return {std::move(out), run};
}

std::pair<SampleBatch, SolverRun> ode_heun(const ScoreField& field, const NoiseSchedule& schedule,
                                           const SampleBatch& x_start, double start_sigma, int workers) {
    check_field_dim(field, x_start);
    SolverRun run{Solver::ode_heun, start_sigma, 0, 0, false};
    SampleBatch out = x_start;
    if (start_sigma <= schedule.sigma_min || start_sigma <= kSigmaFloor) return {std::move(out), run};
    const int idx = start_index(schedule, start_sigma);
    if (idx == 0) return {std::move(out), run};
    const int64_t d = x_start.d;
    parallel_for_rows(x_start.n, workers, [&](int64_t i) {
        std::vector<double> k1(d), k2(d), xp(d);
        double* x = out.row(i);
        for (int k = idx; k >= 1; --k) {
            const double hi = schedule.grid[k], lo = schedule.grid[k - 1];
            const double h = lo * lo - hi * hi;
            field.score(hi, {x, static_cast<size_t>(d)}, k1);
            if (k == 1) {
                // final interval to the floor: plain Euler (1 NFE)
                for (int64_t j = 0; j < d; ++j) x[j] += h * (-0.5 * k1[j]);
            } else {
                for (int64_t j = 0; j < d; ++j) xp[j] = x[j] + h * (-0.5 * k1[j]);
                field.score(lo, xp, k2);
                for (int64_t j = 0; j < d; ++j) x[j] += h * 0.5 * (-0.5 * k1[j] - 0.5 * k2[j]);
            }
        }
    });
    run.nfe = 2 * static_cast<int64_t>(idx) - 1;
    return {std::move(out), run};
}

std::pair<SampleBatch, SolverRun> consistency_step(const GmmModel& model, double sigma_t, const SampleBatch& x_t,
                                                   int oracle_steps, int workers) {
    if (model.d() != x_t.d) throw std::invalid_argument("consistency_step: dimension mismatch");
    SampleBatch out(x_t.n, x_t.d);
    parallel_for_rows(x_t.n, workers, [&](int64_t i) {
        model.consistency_map(sigma_t, x_t.row_span(i), out.row_span(i), oracle_steps);
    });
    SolverRun run{Solver::consistency, sigma_t, 1, 0, false};
    if (model.components().size() > 1 && sigma_t > kSigmaFloor) run.inner_steps = oracle_steps;
    return {std::move(out), run};
}

std::pair<SampleBatch, SolverRun> dps_sde(const ScoreField& field, const NoiseSchedule& schedule,
                                          const SampleBatch& x_start, double start_sigma, const BaseCodec& codec,
                                          const Bitstream& y, double zeta, uint64_t rng_seed, GradientMode gradient_mode,
                                          int workers) {
    check_field_dim(field, x_start);
    if (y.n != x_start.n || y.d != x_start.d) throw std::invalid_argument("dps_sde: bitstream not aligned with batch");
    if (!std::isfinite(zeta) || zeta < 0.0) throw std::invalid_argument("dps_sde: zeta must be finite and >= 0");
    const int64_t d = x_start.d;

    const bool analytic = gradient_mode != GradientMode::finite_difference;
    if (analytic && x_start.n > 0 && d <= 16) {
        double probe_h[256];
        if (!field.log_density_hessian(schedule.sigma_max, x_start.row_span(0), probe_h))
            throw ConfigError("dps_sde: analytic gradient mode needs a score field with a Hessian");
    }
    const SoftQuantizer* softq = nullptr;
    if (gradient_mode == GradientMode::bitstream_consistency) {
        softq = codec.soft_quantizer();
        if (softq == nullptr)
            throw ConfigError("dps_sde: bitstream-consistency gradient requested for a codec without a "
                              "differentiable surrogate");
    }

    // constraint target: the decoded reconstruction (and for the bitstream
    // surrogate additionally the symbol centers, which coincide with it)
    const SampleBatch xhat = codec.decode(y, mix_word(rng_seed, kTaskDpsDecode));

    SolverRun run{Solver::dps_sde, start_sigma, 0, 0, false};
    SampleBatch out = x_start;
    if (start_sigma <= schedule.sigma_min || start_sigma <= kSigmaFloor) return {std::move(out), run};
    const int idx = start_index(schedule, start_sigma);
    if (idx == 0) return {std::move(out), run};

    parallel_for_rows(x_start.n, workers, [&](int64_t i) {
        Rng rng(sample_stream(rng_seed, static_cast<uint64_t>(i)));
        std::vector<double> s(d), t(d), g(d), u(d), h(static_cast<size_t>(d) * d);
        std::vector<double> xprobe(d), sprobe(d);
        double* x = out.row(i);
        const double* target = xhat.row(i);
        for (int k = idx; k >= 1; --k) {
            const double hi = schedule.grid[k], lo = schedule.grid[k - 1];
            const double dv = hi * hi - lo * lo;
            const double s2 = hi * hi;
            field.score(hi, {x, static_cast<size_t>(d)}, s);

            if (zeta != 0.0) {
                // gradient of the constraint at X_t (state before the step)
                if (gradient_mode == GradientMode::finite_difference) {
                    // central differences of C(x) = ||Tweedie(x) - xhat||^2
                    const double step = 1e-4;
                    for (int64_t j = 0; j < d; ++j) {
                        double c[2];
                        for (int sign = 0; sign < 2; ++sign) {
                            std::copy(x, x + d, xprobe.begin());
                            xprobe[j] += sign == 0 ? step : -step;
                            field.score(hi, xprobe, sprobe);
                            double acc = 0.0;
                            for (int64_t l = 0; l < d; ++l) {
                                const double r = xprobe[l] + s2 * sprobe[l] - target[l];
                                acc += r * r;
                            }
                            c[sign] = acc;
                        }
                        g[j] = (c[0] - c[1]) / (2.0 * step);
                    }
                } else {
                    // Tweedie mean and its Jacobian J = I + sigma^2 H
                    field.log_density_hessian(hi, {x, static_cast<size_t>(d)}, h.data());
                    for (int64_t j = 0; j < d; ++j) t[j] = x[j] + s2 * s[j];
                    if (gradient_mode == GradientMode::recon_consistency) {
                        for (int64_t j = 0; j < d; ++j) u[j] = t[j] - target[j];
                    } else {
                        for (int64_t j = 0; j < d; ++j) {
                            const double q = softq->soft_center(t[j]);
                            u[j] = (q - target[j]) * softq->soft_center_grad(t[j]);
                        }
                    }
                    for (int64_t j = 0; j < d; ++j) {
                        double acc = u[j];
                        for (int64_t l = 0; l < d; ++l) acc += s2 * h[j * d + l] * u[l];
                        g[j] = 2.0 * acc;
                    }
                }
                double norm2 = 0.0;
                for (int64_t j = 0; j < d; ++j) norm2 += g[j] * g[j];
                const double norm = std::sqrt(norm2);
                const double scale = norm > 10.0 ? 10.0 / norm : 1.0;
                const double sd = std::sqrt(dv);
                // the correction enters the drift with the same sigma^2 step
                // weight as the score term; constant per-step pull would make
                // the total constraint force grow with step count and collapse
                // fine schedules onto the reconstruction
                for (int64_t j = 0; j < d; ++j) x[j] += dv * s[j] + sd * rng.normal() + (-zeta * dv * scale * g[j]);
            } else {
                const double sd = std::sqrt(dv);
                for (int64_t j = 0; j < d; ++j) x[j] += dv * s[j] + sd * rng.normal();
            }
        }
    });
    const int64_t grad_cost = zeta == 0.0 ? 0 : (gradient_mode == GradientMode::finite_difference ? 2 * d : 1);
    run.nfe = static_cast<int64_t>(idx) * (1 + grad_cost);
    return {std::move(out), run};
}

}  // namespace pel
