#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pel/batch.hpp"
#include "pel/codecs.hpp"
#include "pel/gmm.hpp"
#include "pel/metrics.hpp"
#include "pel/rng.hpp"
#include "pel/solvers.hpp"

namespace pel {

enum class Preset { fast, medium_ode, medium_sde, slow, custom };

const char* preset_name(Preset p);
Preset preset_from_name(const std::string& name);

enum class Readout { raw, tweedie };

struct PerturbParams {
    double amplitude = 0.0;
    double omega = 1.0;
};

// Resolved experiment identity: all randomness is a pure function of
// (master_seed, scenario_id, task, sample index), so worker count never
// changes results.
struct RunContext {
    uint64_t master_seed = 1;
    uint64_t scenario_id = fnv1a64("adhoc");
    int workers = 0;  // 0 = machine default
    int64_t n = 200000;
    bool flip_score_hook = false;  // sanity hook: negate the score inside verify_theorem
};

struct EnhanceConfig {
    Preset preset = Preset::fast;
    // Noise level; unset means auto selection by the MSE-doubling rule.
    std::optional<double> sigma_t;
    int steps = 0;  // 0 = preset default
    double zeta = 0.3;
    GradientMode gradient_mode = GradientMode::recon_consistency;
    Readout readout = Readout::raw;
    Solver solver = Solver::sde_euler;  // custom preset only
    std::optional<PerturbParams> perturb;
    // select_sigma knobs
    double sigma_max = 8.0;
    double tol = 0.05;
    int64_t n_probe = 10000;
    int consistency_oracle_steps = 512;
};

// Preset defaults: fast = one consistency call; medium-ode = 16-step Heun
// (NFE 31); medium-sde = 256-step Euler SDE; slow = 256-step DPS at zeta.
struct SolvePlan {
    Solver solver = Solver::consistency;
    int steps = 1;
};
SolvePlan resolve_plan(const EnhanceConfig& cfg);

struct SigmaSelection {
    double sigma = 0.0;
    bool capped = false;
    double mse_base = 0.0;  // probe-set base MSE the target was built from
    int probes = 0;         // bisection probes spent
    int64_t probe_nfe = 0;  // conceptual NFE spent across probes
};

// Bisection on sigma in [0, sigma_max] for MSE(sigma) = 2 * MSE_base within
// tol * MSE_base, common random numbers across probes. Probes run the same
// solver plan the final run will use.
SigmaSelection select_sigma(const GmmModel& model, const BaseCodec& codec, const EnhanceConfig& cfg,
                            const RunContext& ctx);

struct EnhanceResult {
    SampleBatch enhanced;
    Bitstream y;
    MetricsReport report;
    double sigma_used = 0.0;
    bool sigma_capped = false;
    SolverRun run;
    double base_mse = 0.0;
    bool kl_out_of_grid_warning = false;
};

// decode -> add noise -> denoise, with metrics against the source batch
// (distortion) and the model (perception). The bitstream hash is checked
// before and after: enhancement never touches it.
EnhanceResult enhance(const GmmModel& model, const BaseCodec& codec, const SampleBatch& x0, const EnhanceConfig& cfg,
                      const GridSpec& grid, const RunContext& ctx);

struct PdCurvePoint {
    double sigma_t = 0.0;
    double mse = 0.0;
    double psnr_db = 0.0;
    double kl_grid = 0.0;
    double frechet = 0.0;
};

// One enhancement per sigma with shared source, bitstream, noise and solver
// streams (common random numbers), so curve shape assertions see solver
// differences rather than sampling noise.
std::vector<PdCurvePoint> pd_sweep(const GmmModel& model, const BaseCodec& codec, const std::vector<double>& sigma_list,
                                   const EnhanceConfig& cfg_base, const GridSpec& grid, const RunContext& ctx);

SampleBatch yan_interpolate(const SampleBatch& x_mse, const SampleBatch& x_percep, double alpha);

struct TheoremRow {
    double sigma_t = 0.0;
    double kl_after = 0.0;
    // Monte-Carlo KL between the analytic noised-decoded and noised-data
    // marginals; absent for sigma = 0 where the decoded marginal is atomic.
    std::optional<double> kl_at_t;
    double kl_at_t_se = 0.0;
};

struct TheoremReport {
    double kl_before = 0.0;
    std::vector<TheoremRow> rows;
    bool ode_solver = false;      // whether the preservation check applies
    bool improved_all = false;    // kl_after < kl_before at every sigma > 0
    bool nonincreasing = false;   // kl_after nonincreasing within 2x pinned noise
    bool ode_preserved = false;   // |kl_after - kl_at_t| <= tolerance (ODE only)
    bool pass() const { return improved_all && nonincreasing && (!ode_solver || ode_preserved); }
};

// Tolerance for the ODE KL-preservation identity under our estimators.
inline constexpr double kOdePreserveTol = 0.02;

TheoremReport verify_theorem(const GmmModel& model, const BaseCodec& codec, const std::vector<double>& sigma_list,
                             Solver solver, int steps, const GridSpec& grid, const RunContext& ctx);

struct SpeedRow {
    Solver solver = Solver::sde_euler;
    int64_t nfe_budget = 0;
    int64_t nfe = 0;
    double kl_grid = 0.0;
    double frechet = 0.0;
};

// Quality per NFE budget at fixed sigma_t, all solvers fed the same noised
// batch. consistency appears only at budget 1; dps-sde needs budget >= 2
// (one score plus one constraint gradient per step).
std::vector<SpeedRow> speed_sweep(const GmmModel& model, const BaseCodec& codec, const std::vector<int64_t>& budgets,
                                  const std::vector<Solver>& solvers, double sigma_t, const EnhanceConfig& cfg_base,
                                  const GridSpec& grid, const RunContext& ctx);

// Analytic marginal of decode(encode(X0)) + N(0, sigma^2): a finite mixture
// over quantizer cells (Gaussian atoms for midpoint decode, smoothed boxes
// for the cell sampler). Feeds the kl_at_t estimate.
class DecodedDensity {
  public:
    DecodedDensity(const GmmModel& model, const QuantizerGeometry& geom, double sigma);
    double log_density(std::span<const double> x) const;
    int d() const { return d_; }

  private:
    struct Cell {
        double log_mass;
        double center[2];
        double lo[2];
        double hi[2];
    };
    int d_;
    bool box_;  // cell-sampler: uniform-in-cell instead of center atom
    double sigma_;
    std::vector<Cell> cells_;
};

struct Scenario {
    std::string name;
    std::string model_name;
    CodecKind codec_kind = CodecKind::uniform_mse;
    double delta = 1.0;
    double offset = 0.0;
    GridSpec grid;
    int64_t n = 200000;
    Preset default_preset = Preset::fast;
};

const std::vector<Scenario>& builtin_scenarios();
const Scenario& find_scenario(const std::string& name);

}  // namespace pel
