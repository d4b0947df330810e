#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "pel/codecs.hpp"
#include "pel/gmm.hpp"
#include "pel/metrics.hpp"
#include "pel/pipeline.hpp"
#include "pel/rng.hpp"

using namespace pel;

namespace {

RunContext small_ctx(int64_t n) {
    RunContext ctx;
    ctx.master_seed = 1;
    ctx.scenario_id = fnv1a64("test");
    ctx.workers = 1;
    ctx.n = n;
    return ctx;
}

GridSpec grid_1d() { return {{-8.0}, {8.0}, {512}}; }

}  // namespace

TEST_CASE("preset names and plans") {
    CHECK(preset_from_name("fast") == Preset::fast);
    CHECK(preset_from_name("medium-ode") == Preset::medium_ode);
    CHECK(preset_from_name("medium-sde") == Preset::medium_sde);
    CHECK(preset_from_name("slow") == Preset::slow);
    CHECK_THROWS_AS(preset_from_name("turbo"), ConfigError);

    EnhanceConfig cfg;
    cfg.preset = Preset::fast;
    CHECK(resolve_plan(cfg).solver == Solver::consistency);
    cfg.preset = Preset::medium_ode;
    CHECK(resolve_plan(cfg).solver == Solver::ode_heun);
    CHECK(resolve_plan(cfg).steps == 16);
    cfg.preset = Preset::medium_sde;
    CHECK(resolve_plan(cfg).solver == Solver::sde_euler);
    CHECK(resolve_plan(cfg).steps == 256);
    cfg.preset = Preset::slow;
    CHECK(resolve_plan(cfg).solver == Solver::dps_sde);
    cfg.steps = 64;
    CHECK(resolve_plan(cfg).steps == 64);  // explicit step count wins
    cfg.preset = Preset::custom;
    cfg.solver = Solver::ode_euler;
    CHECK(resolve_plan(cfg).solver == Solver::ode_euler);
}

TEST_CASE("enhance at sigma 0 returns the reconstruction unchanged") {
    const GmmModel m = GmmModel::builtin("bimodal-1d");
    const auto codec = make_codec(CodecKind::uniform_mse, 1.0, 0.0);
    const RunContext ctx = small_ctx(5000);
    const SampleBatch x0 = m.sample_data(ctx.n, task_seed(ctx.master_seed, ctx.scenario_id, kTaskSampleData));

    EnhanceConfig cfg;
    cfg.preset = Preset::medium_sde;
    cfg.sigma_t = 0.0;
    const EnhanceResult r = enhance(m, *codec, x0, cfg, grid_1d(), ctx);
    const SampleBatch xhat = codec->decode(codec->encode(x0), 0);
    CHECK(r.enhanced.values == xhat.values);
    CHECK(r.run.nfe == 0);
    CHECK(r.sigma_used == 0.0);
    CHECK(r.report.mse == doctest::Approx(r.base_mse).epsilon(1e-12));
}

TEST_CASE("fast preset reduces the decoded divergence") {
    const GmmModel m = GmmModel::builtin("bimodal-1d");
    const auto codec = make_codec(CodecKind::uniform_mse, 1.0, 0.0);
    const RunContext ctx = small_ctx(20000);
    const SampleBatch x0 = m.sample_data(ctx.n, task_seed(ctx.master_seed, ctx.scenario_id, kTaskSampleData));

    EnhanceConfig cfg;
    cfg.preset = Preset::fast;
    cfg.sigma_t = 0.6;
    const EnhanceResult r = enhance(m, *codec, x0, cfg, grid_1d(), ctx);
    CHECK(r.run.nfe == 1);  // per-sample cost of the single consistency call
    CHECK(r.run.solver == Solver::consistency);

    const SampleBatch xhat = codec->decode(codec->encode(x0), 0);
    const auto q = [&](std::span<const double> v) { return m.log_density(0.0, v); };
    const double kl_base = kl_grid(xhat, q, grid_1d()).value;
    CHECK(r.report.kl_grid < kl_base);
    CHECK(r.report.mse > r.base_mse);  // perception is bought with distortion
}

TEST_CASE("medium-sde lands within tolerance of the fast preset target") {
    const GmmModel m = GmmModel::builtin("bimodal-1d");
    const auto codec = make_codec(CodecKind::uniform_mse, 1.0, 0.0);
    const RunContext ctx = small_ctx(200000);
    const SampleBatch x0 = m.sample_data(ctx.n, task_seed(ctx.master_seed, ctx.scenario_id, kTaskSampleData));

    EnhanceConfig fast, sde;
    fast.preset = Preset::fast;
    fast.sigma_t = 0.6;
    sde.preset = Preset::medium_sde;
    sde.sigma_t = 0.6;
    const EnhanceResult rf = enhance(m, *codec, x0, fast, grid_1d(), ctx);
    const EnhanceResult rs = enhance(m, *codec, x0, sde, grid_1d(), ctx);
    CHECK(rs.report.kl_grid <= rf.report.kl_grid + 0.01);
}

TEST_CASE("sigma selection hits the doubled-distortion target") {
    const GmmModel m = GmmModel::builtin("bimodal-1d");
    const RunContext ctx = small_ctx(4000);
    EnhanceConfig cfg;
    cfg.preset = Preset::fast;

    const auto coarse = make_codec(CodecKind::uniform_mse, 1.0, 0.0);
    const SigmaSelection sel = select_sigma(m, *coarse, cfg, ctx);
    CHECK(!sel.capped);
    CHECK(sel.sigma > 0.2);
    CHECK(sel.sigma < 0.8);
    CHECK(sel.probes > 0);

    // a fine quantizer needs much less noise
    const auto fine = make_codec(CodecKind::uniform_mse, 0.125, 0.0);
    const SigmaSelection fine_sel = select_sigma(m, *fine, cfg, ctx);
    CHECK(fine_sel.sigma < sel.sigma / 2);

    EnhanceConfig capped_cfg = cfg;
    capped_cfg.sigma_max = 0.05;
    const SigmaSelection capped = select_sigma(m, *coarse, capped_cfg, ctx);
    CHECK(capped.capped);
    CHECK(capped.sigma == 0.05);
}

TEST_CASE("pd sweep starts at the base point and tracks enhance") {
    const GmmModel m = GmmModel::builtin("bimodal-1d");
    const auto codec = make_codec(CodecKind::uniform_mse, 1.0, 0.0);
    const RunContext ctx = small_ctx(20000);
    EnhanceConfig cfg;
    cfg.preset = Preset::fast;

    const auto rows = pd_sweep(m, *codec, {0.0, 0.5}, cfg, grid_1d(), ctx);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].sigma_t == 0.0);

    const SampleBatch x0 = m.sample_data(ctx.n, task_seed(ctx.master_seed, ctx.scenario_id, kTaskSampleData));
    const SampleBatch xhat = codec->decode(codec->encode(x0), 0);
    const auto q = [&](std::span<const double> v) { return m.log_density(0.0, v); };
    CHECK(rows[0].mse == doctest::Approx(mse(x0, xhat)).epsilon(1e-12));
    CHECK(rows[0].kl_grid == doctest::Approx(kl_grid(xhat, q, grid_1d()).value).epsilon(1e-12));
    CHECK(rows[1].mse > rows[0].mse);
    CHECK(rows[1].kl_grid < rows[0].kl_grid);

    CHECK_THROWS_AS(pd_sweep(m, *codec, {0.5, 0.2}, cfg, grid_1d(), ctx), std::invalid_argument);
}

TEST_CASE("distortion-perception interpolation endpoints are exact") {
    SampleBatch a(3, 1), b(3, 1);
    a.values = {1.0, 2.0, 3.0};
    b.values = {-1.0, 0.0, 5.0};
    CHECK(yan_interpolate(a, b, 1.0).values == a.values);
    CHECK(yan_interpolate(a, b, 0.0).values == b.values);
    const SampleBatch mid = yan_interpolate(a, b, 0.5);
    CHECK(mid.values[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(yan_interpolate(a, b, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(yan_interpolate(a, b, -0.5), std::invalid_argument);
}

TEST_CASE("theorem verification contracts the divergence") {
    const GmmModel m = GmmModel::builtin("bimodal-1d");
    const auto codec = make_codec(CodecKind::uniform_mse, 1.0, 0.0);
    RunContext ctx = small_ctx(200000);  // the operation refuses smaller batches

    const TheoremReport rep = verify_theorem(m, *codec, {0.0, 0.6}, Solver::sde_euler, 128, grid_1d(), ctx);
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.rows[0].kl_after == rep.kl_before);  // sigma 0 row is the base point
    CHECK(!rep.rows[0].kl_at_t.has_value());
    CHECK(rep.rows[1].kl_after < rep.kl_before);
    CHECK(rep.improved_all);
    CHECK(!rep.ode_solver);
    CHECK(rep.pass());

    SUBCASE("flipped score must break the contraction") {
        ctx.flip_score_hook = true;
        const TheoremReport bad = verify_theorem(m, *codec, {0.0, 0.6}, Solver::sde_euler, 128, grid_1d(), ctx);
        CHECK(!bad.improved_all);
        CHECK(!bad.pass());
    }
}

TEST_CASE("ode preservation check compares the two divergences") {
    const GmmModel m = GmmModel::builtin("bimodal-1d");
    const auto codec = make_codec(CodecKind::uniform_mse, 1.0, 0.0);
    const RunContext ctx = small_ctx(200000);
    const TheoremReport rep = verify_theorem(m, *codec, {0.4}, Solver::ode_heun, 128, grid_1d(), ctx);
    REQUIRE(rep.rows.size() == 1);
    CHECK(rep.ode_solver);
    REQUIRE(rep.rows[0].kl_at_t.has_value());
    CHECK(rep.rows[0].kl_at_t_se > 0.0);
    CHECK(std::abs(rep.rows[0].kl_after - *rep.rows[0].kl_at_t) <= kOdePreserveTol);
    CHECK(rep.ode_preserved);
}

TEST_CASE("theorem verification needs cell geometry") {
    const GmmModel m = GmmModel::builtin("bimodal-1d");
    const auto dz = make_codec(CodecKind::deadzone_opaque, 1.0, 0.0);
    const RunContext ctx = small_ctx(200000);
    CHECK_THROWS_AS(verify_theorem(m, *dz, {0.4}, Solver::sde_euler, 32, grid_1d(), ctx), ConfigError);
    const RunContext tiny = small_ctx(10000);
    const auto uni = make_codec(CodecKind::uniform_mse, 1.0, 0.0);
    CHECK_THROWS_AS(verify_theorem(m, *uni, {0.4}, Solver::sde_euler, 32, grid_1d(), tiny), std::invalid_argument);
}

TEST_CASE("decoded density integrates to one") {
    const GmmModel m = GmmModel::builtin("bimodal-1d");
    const QuantizerGeometry geom{CodecKind::uniform_mse, 1.0, 0.0};
    const double sigma = 0.5;
    for (bool box : {false, true}) {
        const QuantizerGeometry g{box ? CodecKind::cell_sampler_perceptual : CodecKind::uniform_mse, 1.0, 0.0};
        const DecodedDensity dens(m, g, sigma);
        const int pts = 8001;
        double sum = 0.0;
        for (int i = 0; i < pts; ++i) {
            const double x = -12.0 + 24.0 * i / (pts - 1);
            const double w = (i == 0 || i == pts - 1) ? 0.5 : 1.0;
            sum += w * std::exp(dens.log_density({&x, 1}));
        }
        sum *= 24.0 / (pts - 1);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("two-dimensional contraction and self-distance") {
    const GmmModel m = GmmModel::builtin("grid-gmm-2d");
    const auto codec = make_codec(CodecKind::uniform_mse, 1.0, 0.0);
    const GridSpec grid{{-8.0, -8.0}, {8.0, 8.0}, {96, 96}};

    // the 2d noise constant is calibrated at the verification batch size
    const SampleBatch self = m.sample_data(200000, 77);
    const auto q = [&](std::span<const double> v) { return m.log_density(0.0, v); };
    CHECK(std::abs(kl_grid(self, q, grid).value) <= kKlNoise2d);

    RunContext ctx = small_ctx(200000);
    const TheoremReport rep = verify_theorem(m, *codec, {0.0, 0.6}, Solver::sde_euler, 128, grid, ctx);
    CHECK(rep.rows[1].kl_after < rep.kl_before);
    CHECK(rep.pass());
}

TEST_CASE("speed sweep maps budgets onto solver-native step counts") {
    const GmmModel m = GmmModel::builtin("bimodal-1d");
    const auto codec = make_codec(CodecKind::uniform_mse, 1.0, 0.0);
    const RunContext ctx = small_ctx(5000);
    EnhanceConfig cfg;
    const std::vector<Solver> all = {Solver::sde_euler, Solver::ode_euler, Solver::ode_heun, Solver::consistency,
                                     Solver::dps_sde};
    const auto rows = speed_sweep(m, *codec, {1, 8}, all, 0.6, cfg, grid_1d(), ctx);

    int consistency_rows = 0, dps_rows = 0;
    for (const auto& r : rows) {
        if (r.solver == Solver::consistency) {
            ++consistency_rows;
            CHECK(r.nfe_budget == 1);
            CHECK(r.nfe == 1);
        }
        if (r.solver == Solver::dps_sde) {
            ++dps_rows;
            CHECK(r.nfe_budget == 8);
            CHECK(r.nfe == 8);  // 4 steps at 2 evaluations each
        }
        if (r.solver == Solver::ode_heun && r.nfe_budget == 8) CHECK(r.nfe == 7);
        if (r.solver == Solver::sde_euler) CHECK(r.nfe == r.nfe_budget);
        CHECK(r.kl_grid >= 0.0);
        CHECK(std::isfinite(r.frechet));
    }
    CHECK(consistency_rows == 1);  // consistency only fits the single-call budget
    CHECK(dps_rows == 1);          // dps needs at least two evaluations
}

TEST_CASE("scenario registry") {
    CHECK(builtin_scenarios().size() >= 5);
    const Scenario& std_scen = find_scenario("standard");
    CHECK(std_scen.model_name == "bimodal-1d");
    CHECK(std_scen.codec_kind == CodecKind::uniform_mse);
    CHECK(std_scen.n == 200000);
    CHECK(find_scenario("grid-2d").grid.dims() == 2);
    CHECK(find_scenario("cell-sampler").codec_kind == CodecKind::cell_sampler_perceptual);
    CHECK(find_scenario("deadzone").codec_kind == CodecKind::deadzone_opaque);
    CHECK_THROWS_AS(find_scenario("lsun"), ConfigError);
}
