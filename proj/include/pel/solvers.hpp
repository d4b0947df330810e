#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pel/batch.hpp"
#include "pel/codecs.hpp"
#include "pel/gmm.hpp"

namespace pel {

enum class Spacing { geometric, linear };

// Ascending sigma grid sigma_min = g_0 < ... < g_n = sigma_max. Reverse
// integration walks it downward.
struct NoiseSchedule {
    double sigma_min = kSigmaFloor;
    double sigma_max = 1.0;
    int n_steps = 1;
    Spacing spacing = Spacing::geometric;
    std::vector<double> grid;
};

NoiseSchedule build_schedule(double sigma_min, double sigma_max, int n_steps, Spacing spacing);

enum class Solver { sde_euler, ode_euler, ode_heun, consistency, dps_sde };

const char* solver_name(Solver s);
Solver solver_from_name(const std::string& name);

enum class GradientMode { recon_consistency, bitstream_consistency, finite_difference };

const char* gradient_mode_name(GradientMode m);
GradientMode gradient_mode_from_name(const std::string& name);

struct SolverRun {
    Solver solver = Solver::sde_euler;
    double start_sigma = 0.0;
    // Conceptual batch-level function evaluations: steps for the Euler
    // solvers, 2*steps-1 for Heun (final interval is Euler), 1 for a
    // consistency call, steps * (1 + constraint evaluations) for dps_sde
    // where finite differences count 2d probe score calls each.
    int64_t nfe = 0;
    // True inner ODE steps behind the consistency call's 1-NFE convention.
    int64_t inner_steps = 0;
    bool perturbed = false;
};

// X_{t-1} = X_t + (s_t^2 - s_{t-1}^2) score(t, X_t) + N(0, (s_t^2 - s_{t-1}^2) I),
// iterated from start_sigma (a grid point) down to the schedule floor.
// Row i draws from the stream (rng_seed, i), so output is independent of
// worker partitioning.
std::pair<SampleBatch, SolverRun> sde_euler(const ScoreField& field, const NoiseSchedule& schedule,
                                            const SampleBatch& x_start, double start_sigma, uint64_t rng_seed,
                                            int workers = 0);

// Deterministic Euler steps of dX = -1/2 score d(sigma^2).
std::pair<SampleBatch, SolverRun> ode_euler(const ScoreField& field, const NoiseSchedule& schedule,
                                            const SampleBatch& x_start, double start_sigma, int workers = 0);

// Heun predictor-corrector in sigma^2; the final interval to the floor is a
// single Euler step.
std::pair<SampleBatch, SolverRun> ode_heun(const ScoreField& field, const NoiseSchedule& schedule,
                                           const SampleBatch& x_start, double start_sigma, int workers = 0);

// One-call map to the data manifold via the model's consistency_map; 1 NFE
// by the distillation convention, true cost in inner_steps.
std::pair<SampleBatch, SolverRun> consistency_step(const GmmModel& model, double sigma_t, const SampleBatch& x_t,
                                                   int oracle_steps = 512, int workers = 0);

// sde_euler update followed by the constraint correction
// X_{t-1} <- X_{t-1} - zeta * (s_t^2 - s_{t-1}^2) * grad_{X_t} ||surrogate(E[X0|X_t]) - target||^2,
// gradient norm-clipped at 10 per sample before scaling. The step-size weight
// keeps the total constraint pull schedule-independent. zeta = 0 reproduces
// sde_euler bit-exactly (same streams, correction skipped).
std::pair<SampleBatch, SolverRun> dps_sde(const ScoreField& field, const NoiseSchedule& schedule,
                                          const SampleBatch& x_start, double start_sigma, const BaseCodec& codec,
                                          const Bitstream& y, double zeta, uint64_t rng_seed, GradientMode gradient_mode,
                                          int workers = 0);

// Forward noising X + N(0, sigma_t^2 I); row i depends only on (seed, i).
SampleBatch add_noise(const SampleBatch& x, double sigma_t, uint64_t rng_seed, int workers = 0);

}  // namespace pel
