#include "pel/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pel/io.hpp"
#include "pel/parallel.hpp"
#include "pel/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace pel {
namespace {

// ---------------------------------------------------------------- config --

void check_keys(const ordered_json& obj, const std::string& where, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (std::string_view a : allowed)
            if (it.key() == a) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("config: unknown key \"" + where + it.key() + "\"");
    }
}

double as_number(const ordered_json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError("config: " + where + " must be a number");
    return v.get<double>();
}

int64_t as_integer(const ordered_json& v, const std::string& where) {
    if (!v.is_number_integer()) throw ConfigError("config: " + where + " must be an integer");
    return v.get<int64_t>();
}

bool as_bool(const ordered_json& v, const std::string& where) {
    if (!v.is_boolean()) throw ConfigError("config: " + where + " must be a boolean");
    return v.get<bool>();
}

std::string as_string(const ordered_json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError("config: " + where + " must be a string");
    return v.get<std::string>();
}

std::vector<double> as_number_list(const ordered_json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError("config: " + where + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) out.push_back(as_number(e, where + "[]"));
    return out;
}

// Command-line switches; these override the corresponding config keys.
struct CliOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<uint64_t> seed;
    std::optional<int> workers;
    std::optional<PerturbParams> perturb;
    bool flip_score = false;
    std::vector<std::string> bd_files;  // positional anchor.csv test.csv
};

// Fully resolved experiment: everything a command needs, plus the resolved
// JSON echo destined for the run manifest.
struct Experiment {
    std::string scenario_name;
    std::optional<GmmModel> model;
    std::string model_name;
    std::unique_ptr<BaseCodec> codec;
    CodecKind codec_kind = CodecKind::uniform_mse;
    double delta = 1.0;
    double offset = 0.0;
    GridSpec grid;
    int64_t n = 200000;
    uint64_t seed = 1;
    int workers = 0;
    fs::path out_dir = "out";
    EnhanceConfig cfg;
    bool sigma_auto = true;
    bool fisher = false;
    bool dump_samples = false;
    bool flip_score = false;

    std::vector<double> pd_sigma_list;
    std::vector<double> yan_alphas;

    std::vector<int64_t> speed_budgets = {1, 2, 4, 8, 16, 32, 64, 128, 256, 512};
    std::vector<Solver> speed_solvers = {Solver::sde_euler, Solver::ode_euler, Solver::ode_heun, Solver::consistency};
    double speed_sigma = 0.6;

    std::vector<std::string> verify_scenarios = {"standard", "cell-sampler"};
    std::vector<Solver> verify_solvers = {Solver::sde_euler, Solver::ode_heun};
    std::vector<double> verify_sigmas = {0.2, 0.6, 1.5};
    int64_t verify_n = 200000;
    int verify_steps = 512;

    std::string anchor_csv;
    std::string test_csv;
    std::string bd_metric = "frechet";
    std::vector<double> bd_deltas = {2.0, 1.0, 0.5, 0.25};

    RunContext ctx() const {
        RunContext c;
        c.master_seed = seed;
        c.scenario_id = fnv1a64(scenario_name);
        c.workers = workers;
        c.n = n;
        c.flip_score_hook = flip_score;
        return c;
    }
};

GmmModel parse_inline_model(const ordered_json& spec) {
    check_keys(spec, "model.", {"components"});
    if (!spec.contains("components")) throw ConfigError("config: model.components required for an inline model");
    const auto& comps = spec.at("components");
    if (!comps.is_array() || comps.empty()) throw ConfigError("config: model.components must be a nonempty array");
    std::vector<GmmComponent> components;
    for (const auto& c : comps) {
        check_keys(c, "model.components[].", {"weight", "mean", "variance"});
        GmmComponent gc;
        gc.weight = as_number(c.at("weight"), "model.components[].weight");
        gc.mean = as_number_list(c.at("mean"), "model.components[].mean");
        gc.variance = as_number_list(c.at("variance"), "model.components[].variance");
        components.push_back(std::move(gc));
    }
    const int d = components.empty() ? 0 : static_cast<int>(components.front().mean.size());
    return GmmModel(d, std::move(components));
}

std::vector<Solver> parse_solver_list(const ordered_json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) throw ConfigError("config: " + where + " must be a nonempty array");
    std::vector<Solver> out;
    for (const auto& e : v) out.push_back(solver_from_name(as_string(e, where + "[]")));
    return out;
}

Experiment resolve_experiment(const ordered_json& cfg, const CliOptions& opt) {
    check_keys(cfg, "",
               {"scenario", "model", "codec", "grid", "n", "seed", "workers", "out", "enhance", "metrics", "pd",
                "speed", "verify", "bd"});

    Experiment e;
    e.scenario_name = cfg.contains("scenario") ? as_string(cfg.at("scenario"), "scenario") : std::string("standard");
    const Scenario& scen = find_scenario(e.scenario_name);
    e.model_name = scen.model_name;
    e.codec_kind = scen.codec_kind;
    e.delta = scen.delta;
    e.offset = scen.offset;
    e.grid = scen.grid;
    e.n = scen.n;
    e.cfg.preset = scen.default_preset;

    if (cfg.contains("model")) {
        const auto& m = cfg.at("model");
        if (m.is_string()) {
            e.model_name = m.get<std::string>();
        } else {
            e.model = parse_inline_model(m);
            e.model_name = "inline";
        }
    }
    if (!e.model) e.model = GmmModel::builtin(e.model_name);

    if (cfg.contains("codec")) {
        const auto& c = cfg.at("codec");
        check_keys(c, "codec.", {"kind", "delta", "offset"});
        if (c.contains("kind")) e.codec_kind = codec_kind_from_name(as_string(c.at("kind"), "codec.kind"));
        if (c.contains("delta")) e.delta = as_number(c.at("delta"), "codec.delta");
        if (c.contains("offset")) e.offset = as_number(c.at("offset"), "codec.offset");
    }
    if (!(e.delta > 0.0)) throw ConfigError("config: codec.delta must be > 0");
    e.codec = make_codec(e.codec_kind, e.delta, e.offset);

    if (cfg.contains("grid")) {
        const auto& g = cfg.at("grid");
        check_keys(g, "grid.", {"lo", "hi", "bins"});
        if (g.contains("lo")) e.grid.lo = as_number_list(g.at("lo"), "grid.lo");
        if (g.contains("hi")) e.grid.hi = as_number_list(g.at("hi"), "grid.hi");
        if (g.contains("bins")) {
            e.grid.bins.clear();
            for (const auto& b : g.at("bins")) e.grid.bins.push_back(static_cast<int>(as_integer(b, "grid.bins[]")));
        }
    }
    e.grid.validate(e.model->d());

    if (cfg.contains("n")) e.n = as_integer(cfg.at("n"), "n");
    if (e.n < 1) throw ConfigError("config: n must be >= 1");
    if (cfg.contains("seed")) e.seed = static_cast<uint64_t>(as_integer(cfg.at("seed"), "seed"));
    if (cfg.contains("workers")) e.workers = static_cast<int>(as_integer(cfg.at("workers"), "workers"));
    if (cfg.contains("out")) e.out_dir = as_string(cfg.at("out"), "out");

    if (cfg.contains("enhance")) {
        const auto& n = cfg.at("enhance");
        check_keys(n, "enhance.",
                   {"preset", "sigma_t", "steps", "zeta", "gradient_mode", "readout", "solver", "sigma_max", "tol",
                    "n_probe", "oracle_steps", "dump_samples"});
        if (n.contains("preset")) e.cfg.preset = preset_from_name(as_string(n.at("preset"), "enhance.preset"));
        if (n.contains("sigma_t")) {
            const auto& s = n.at("sigma_t");
            if (s.is_string()) {
                if (s.get<std::string>() != "auto")
                    throw ConfigError("config: enhance.sigma_t must be a number or \"auto\"");
                e.cfg.sigma_t.reset();
            } else {
                e.cfg.sigma_t = as_number(s, "enhance.sigma_t");
                if (!(*e.cfg.sigma_t >= 0.0)) throw ConfigError("config: enhance.sigma_t must be >= 0");
            }
        }
        if (n.contains("steps")) e.cfg.steps = static_cast<int>(as_integer(n.at("steps"), "enhance.steps"));
        if (n.contains("zeta")) e.cfg.zeta = as_number(n.at("zeta"), "enhance.zeta");
        if (n.contains("gradient_mode"))
            e.cfg.gradient_mode = gradient_mode_from_name(as_string(n.at("gradient_mode"), "enhance.gradient_mode"));
        if (n.contains("readout")) {
            const std::string r = as_string(n.at("readout"), "enhance.readout");
            if (r == "raw")
                e.cfg.readout = Readout::raw;
            else if (r == "tweedie")
                e.cfg.readout = Readout::tweedie;
            else
                throw ConfigError("config: enhance.readout must be \"raw\" or \"tweedie\"");
        }
        if (n.contains("solver")) e.cfg.solver = solver_from_name(as_string(n.at("solver"), "enhance.solver"));
        if (n.contains("sigma_max")) e.cfg.sigma_max = as_number(n.at("sigma_max"), "enhance.sigma_max");
        if (n.contains("tol")) e.cfg.tol = as_number(n.at("tol"), "enhance.tol");
        if (n.contains("n_probe")) e.cfg.n_probe = as_integer(n.at("n_probe"), "enhance.n_probe");
        if (n.contains("oracle_steps"))
            e.cfg.consistency_oracle_steps = static_cast<int>(as_integer(n.at("oracle_steps"), "enhance.oracle_steps"));
        if (n.contains("dump_samples")) e.dump_samples = as_bool(n.at("dump_samples"), "enhance.dump_samples");
    }
    e.sigma_auto = !e.cfg.sigma_t.has_value();

    if (cfg.contains("metrics")) {
        const auto& m = cfg.at("metrics");
        check_keys(m, "metrics.", {"fisher"});
        if (m.contains("fisher")) e.fisher = as_bool(m.at("fisher"), "metrics.fisher");
    }

    if (cfg.contains("pd")) {
        const auto& p = cfg.at("pd");
        check_keys(p, "pd.", {"sigma_list", "yan_alphas"});
        if (p.contains("sigma_list")) e.pd_sigma_list = as_number_list(p.at("sigma_list"), "pd.sigma_list");
        if (p.contains("yan_alphas")) e.yan_alphas = as_number_list(p.at("yan_alphas"), "pd.yan_alphas");
    }
    if (e.pd_sigma_list.empty()) {
        // default: eight geometric noise levels spanning the interesting range
        const double lo = 0.05, hi = 1.6;
        for (int i = 0; i < 8; ++i) e.pd_sigma_list.push_back(lo * std::pow(hi / lo, i / 7.0));
    }

    if (cfg.contains("speed")) {
        const auto& s = cfg.at("speed");
        check_keys(s, "speed.", {"budgets", "solvers", "sigma_t"});
        if (s.contains("budgets")) {
            e.speed_budgets.clear();
            for (const auto& b : s.at("budgets")) e.speed_budgets.push_back(as_integer(b, "speed.budgets[]"));
        }
        if (s.contains("solvers")) e.speed_solvers = parse_solver_list(s.at("solvers"), "speed.solvers");
        if (s.contains("sigma_t")) e.speed_sigma = as_number(s.at("sigma_t"), "speed.sigma_t");
    }

    if (cfg.contains("verify")) {
        const auto& v = cfg.at("verify");
        check_keys(v, "verify.", {"scenarios", "solvers", "sigma_list", "n", "steps"});
        if (v.contains("scenarios")) {
            e.verify_scenarios.clear();
            for (const auto& s : v.at("scenarios")) e.verify_scenarios.push_back(as_string(s, "verify.scenarios[]"));
        }
        if (v.contains("solvers")) e.verify_solvers = parse_solver_list(v.at("solvers"), "verify.solvers");
        if (v.contains("sigma_list")) e.verify_sigmas = as_number_list(v.at("sigma_list"), "verify.sigma_list");
        if (v.contains("n")) e.verify_n = as_integer(v.at("n"), "verify.n");
        if (v.contains("steps")) e.verify_steps = static_cast<int>(as_integer(v.at("steps"), "verify.steps"));
    }

    if (cfg.contains("bd")) {
        const auto& b = cfg.at("bd");
        check_keys(b, "bd.", {"anchor_csv", "test_csv", "metric", "delta_list"});
        if (b.contains("anchor_csv")) e.anchor_csv = as_string(b.at("anchor_csv"), "bd.anchor_csv");
        if (b.contains("test_csv")) e.test_csv = as_string(b.at("test_csv"), "bd.test_csv");
        if (b.contains("metric")) {
            e.bd_metric = as_string(b.at("metric"), "bd.metric");
            if (e.bd_metric != "frechet" && e.bd_metric != "kl_grid" && e.bd_metric != "psnr_db")
                throw ConfigError("config: bd.metric must be one of frechet, kl_grid, psnr_db");
        }
        if (b.contains("delta_list")) e.bd_deltas = as_number_list(b.at("delta_list"), "bd.delta_list");
    }

    // command-line switches win over config keys
    if (opt.seed) e.seed = *opt.seed;
    if (opt.workers) e.workers = *opt.workers;
    if (!opt.out_dir.empty()) e.out_dir = opt.out_dir;
    if (opt.perturb) e.cfg.perturb = *opt.perturb;
    e.flip_score = opt.flip_score;
    if (opt.bd_files.size() == 2) {
        e.anchor_csv = opt.bd_files[0];
        e.test_csv = opt.bd_files[1];
    } else if (opt.bd_files.size() == 1) {
        throw ConfigError("bd: expected two positional files (anchor.csv test.csv)");
    }
    return e;
}

ordered_json resolved_echo(const Experiment& e, const std::string& command) {
    ordered_json j;
    j["scenario"] = e.scenario_name;
    if (e.model_name == "inline") {
        ordered_json comps = ordered_json::array();
        for (const auto& c : e.model->components()) {
            ordered_json cj;
            cj["weight"] = c.weight;
            cj["mean"] = c.mean;
            cj["variance"] = c.variance;
            comps.push_back(cj);
        }
        j["model"] = ordered_json{{"components", comps}};
    } else {
        j["model"] = e.model_name;
    }
    j["codec"] = ordered_json{{"kind", codec_kind_name(e.codec_kind)}, {"delta", e.delta}, {"offset", e.offset}};
    j["grid"] = ordered_json{{"lo", e.grid.lo}, {"hi", e.grid.hi}, {"bins", e.grid.bins}};
    j["n"] = e.n;
    j["seed"] = e.seed;
    j["workers"] = e.workers;
    j["out"] = e.out_dir.string();
    ordered_json en;
    en["preset"] = preset_name(e.cfg.preset);
    if (e.cfg.sigma_t)
        en["sigma_t"] = *e.cfg.sigma_t;
    else
        en["sigma_t"] = "auto";
    en["steps"] = e.cfg.steps;
    en["zeta"] = e.cfg.zeta;
    en["gradient_mode"] = gradient_mode_name(e.cfg.gradient_mode);
    en["readout"] = e.cfg.readout == Readout::raw ? "raw" : "tweedie";
    en["solver"] = solver_name(e.cfg.solver);
    en["sigma_max"] = e.cfg.sigma_max;
    en["tol"] = e.cfg.tol;
    en["n_probe"] = e.cfg.n_probe;
    en["oracle_steps"] = e.cfg.consistency_oracle_steps;
    en["dump_samples"] = e.dump_samples;
    j["enhance"] = en;
    if (e.cfg.perturb)
        j["perturb"] = ordered_json{{"amplitude", e.cfg.perturb->amplitude}, {"omega", e.cfg.perturb->omega}};
    if (e.flip_score) j["flip_score"] = true;
    j["metrics"] = ordered_json{{"fisher", e.fisher}};
    if (command == "sweep-pd") {
        j["pd"] = ordered_json{{"sigma_list", e.pd_sigma_list}, {"yan_alphas", e.yan_alphas}};
    } else if (command == "sweep-speed") {
        ordered_json solvers = ordered_json::array();
        for (Solver s : e.speed_solvers) solvers.push_back(solver_name(s));
        j["speed"] = ordered_json{{"budgets", e.speed_budgets}, {"solvers", solvers}, {"sigma_t", e.speed_sigma}};
    } else if (command == "verify") {
        ordered_json solvers = ordered_json::array();
        for (Solver s : e.verify_solvers) solvers.push_back(solver_name(s));
        j["verify"] = ordered_json{{"scenarios", e.verify_scenarios},
                                   {"solvers", solvers},
                                   {"sigma_list", e.verify_sigmas},
                                   {"n", e.verify_n},
                                   {"steps", e.verify_steps}};
    } else if (command == "bd") {
        ordered_json b;
        if (!e.anchor_csv.empty()) {
            b["anchor_csv"] = e.anchor_csv;
            b["test_csv"] = e.test_csv;
        } else {
            b["delta_list"] = e.bd_deltas;
        }
        b["metric"] = e.bd_metric;
        j["bd"] = b;
    }
    return j;
}

// -------------------------------------------------------------- manifest --

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf, 16);
}

void write_manifest(const fs::path& out_dir, const std::string& command, const ordered_json& resolved,
                    const std::map<std::string, int64_t>& nfe_totals, double wall_sec,
                    const std::vector<fs::path>& outputs) {
    ordered_json m;
    m["tool"] = kToolName;
    m["version"] = kToolVersion;
    m["command"] = command;
    m["resolved_config"] = resolved;
    ordered_json totals;
    for (const auto& [k, v] : nfe_totals) totals[k] = v;
    m["nfe_totals"] = totals;
    m["wall_time_sec"] = wall_sec;  // informational only, never asserted
    ordered_json outs = ordered_json::array();
    for (const auto& p : outputs)
        outs.push_back(ordered_json{{"path", p.filename().string()}, {"fnv1a64", hex64(hash_file(p))}});
    m["outputs"] = outs;
    write_text_file(out_dir / "run_manifest.json", m.dump(2) + "\n");
}

// ------------------------------------------------------------- commands ---

struct CsvBuilder {
    std::string text;

    explicit CsvBuilder(const std::string& header) { text = header + "\n"; }
    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) text.push_back(',');
            text += cells[i];
        }
        text.push_back('\n');
    }
};

MetricsReport base_codec_report(const Experiment& e, const SampleBatch& x0, const Bitstream& y,
                                const SampleBatch& xhat, const SampleBatch& reference) {
    MetricsReport r;
    r.mse = mse(xhat, x0);
    r.psnr_db = psnr(r.mse, e.model->peak());
    r.kl_grid = kl_grid(xhat, [&](std::span<const double> v) { return e.model->log_density(0.0, v); }, e.grid).value;
    r.frechet = frechet_gaussian(xhat, reference);
    r.nfe = 0;
    r.rate_bits = rate_bits(y);
    return r;
}

// Fisher divergence between the noised decoded marginal and the noised data
// marginal at sigma, on the report grid. Needs the codec's cell geometry.
std::optional<double> fisher_diagnostic(const Experiment& e, double sigma) {
    if (sigma <= kSigmaFloor) return std::nullopt;  // decoded marginal is atomic at sigma 0
    const auto geom = e.codec->geometry();
    if (!geom) throw ConfigError("metrics.fisher needs a codec with visible cell geometry");
    const DecodedDensity p(*e.model, *geom, sigma);
    const int d = e.model->d();
    const ScoreFn p_score = [&p, d](std::span<const double> x, std::span<double> out) {
        // central differences of log p; adequate for a grid diagnostic
        double xb[2];
        for (int j = 0; j < d; ++j) xb[j] = x[j];
        const double h = 1e-5;
        for (int j = 0; j < d; ++j) {
            const double x0 = xb[j];
            xb[j] = x0 + h;
            const double up = p.log_density(std::span<const double>(xb, static_cast<size_t>(d)));
            xb[j] = x0 - h;
            const double dn = p.log_density(std::span<const double>(xb, static_cast<size_t>(d)));
            xb[j] = x0;
            out[j] = (up - dn) / (2.0 * h);
        }
    };
    const ScoreFn q_score = [&e, sigma](std::span<const double> x, std::span<double> out) {
        e.model->score(sigma, x, out);
    };
    const LogDensityFn p_log = [&p](std::span<const double> x) { return p.log_density(x); };
    return fisher_divergence_grid(p_score, q_score, p_log, e.grid);
}

int cmd_enhance(const Experiment& e, const std::string& command, const std::chrono::steady_clock::time_point& t0) {
    const RunContext ctx = e.ctx();
    const SampleBatch x0 = e.model->sample_data(e.n, task_seed(ctx.master_seed, ctx.scenario_id, kTaskSampleData));
    EnhanceResult res = enhance(*e.model, *e.codec, x0, e.cfg, e.grid, ctx);

    const SampleBatch xhat = e.codec->decode(res.y, task_seed(ctx.master_seed, ctx.scenario_id, kTaskDecode));
    const SampleBatch reference =
        e.model->sample_data(e.n, task_seed(ctx.master_seed, ctx.scenario_id, kTaskReference));
    const MetricsReport base = base_codec_report(e, x0, res.y, xhat, reference);
    if (e.fisher) res.report.fisher = fisher_diagnostic(e, res.sigma_used);

    std::vector<fs::path> outputs;
    const fs::path report_path = e.out_dir / "report.json";
    write_text_file(report_path, res.report.to_json());
    outputs.push_back(report_path);
    const fs::path base_path = e.out_dir / "base_report.json";
    write_text_file(base_path, base.to_json());
    outputs.push_back(base_path);
    if (e.dump_samples) {
        const fs::path samples_path = e.out_dir / "samples.bin";
        write_samples(samples_path, res.enhanced);
        outputs.push_back(samples_path);
        const fs::path bits_path = e.out_dir / "bitstream.bin";
        write_bitstream(bits_path, res.y);
        outputs.push_back(bits_path);
    }

    ordered_json resolved = resolved_echo(e, command);
    ordered_json run;
    run["sigma_used"] = res.sigma_used;
    run["sigma_capped"] = res.sigma_capped;
    run["solver"] = solver_name(res.run.solver);
    run["nfe"] = res.run.nfe;
    run["inner_steps"] = res.run.inner_steps;
    run["base_mse"] = res.base_mse;
    run["kl_out_of_grid_warning"] = res.kl_out_of_grid_warning;
    resolved["run_info"] = run;

    std::map<std::string, int64_t> nfe;
    nfe["enhance"] = res.report.nfe;
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(e.out_dir, command, resolved, nfe, wall, outputs);
    std::cout << "enhance: sigma_used=" << format_double(res.sigma_used) << " mse=" << format_double(res.report.mse)
              << " kl_grid=" << format_double(res.report.kl_grid) << " (base " << format_double(base.kl_grid) << ")\n";
    return 0;
}

int cmd_sweep_pd(const Experiment& e, const std::string& command, const std::chrono::steady_clock::time_point& t0) {
    const RunContext ctx = e.ctx();
    for (size_t i = 1; i < e.pd_sigma_list.size(); ++i)
        if (!(e.pd_sigma_list[i] > e.pd_sigma_list[i - 1]))
            throw ConfigError("config: pd.sigma_list must be strictly ascending");

    EnhanceConfig cfg = e.cfg;
    cfg.sigma_t.reset();
    const auto curve = pd_sweep(*e.model, *e.codec, e.pd_sigma_list, cfg, e.grid, ctx);

    std::map<std::string, int64_t> nfe;
    const SolvePlan plan = resolve_plan(cfg);
    int64_t per_run = 0;
    switch (plan.solver) {
        case Solver::consistency: per_run = 1; break;
        case Solver::ode_heun: per_run = 2 * plan.steps - 1; break;
        default: per_run = plan.steps; break;
    }
    nfe["pd_sweep"] = per_run * static_cast<int64_t>(curve.size());

    const bool yan = !e.yan_alphas.empty();
    CsvBuilder csv(yan ? "sigma_t,mse,psnr_db,kl_grid,frechet,alpha" : "sigma_t,mse,psnr_db,kl_grid,frechet");
    for (const auto& pt : curve) {
        std::vector<std::string> cells = {format_double(pt.sigma_t), format_double(pt.mse), format_double(pt.psnr_db),
                                          format_double(pt.kl_grid), format_double(pt.frechet)};
        if (yan) cells.push_back("");
        csv.row(cells);
    }

    if (yan) {
        // interpolation baseline between the base reconstruction and the
        // enhanced output at the MSE-doubling noise level
        EnhanceConfig ycfg = e.cfg;
        double sigma_star;
        if (e.cfg.sigma_t && *e.cfg.sigma_t > 0.0) {
            sigma_star = *e.cfg.sigma_t;
        } else {
            ycfg.sigma_t.reset();
            const SigmaSelection sel = select_sigma(*e.model, *e.codec, ycfg, ctx);
            sigma_star = sel.sigma;
            nfe["select_sigma"] = sel.probe_nfe;
        }
        ycfg.sigma_t = sigma_star;
        const SampleBatch x0 =
            e.model->sample_data(e.n, task_seed(ctx.master_seed, ctx.scenario_id, kTaskSampleData));
        const EnhanceResult res = enhance(*e.model, *e.codec, x0, ycfg, e.grid, ctx);
        const SampleBatch xhat = e.codec->decode(res.y, task_seed(ctx.master_seed, ctx.scenario_id, kTaskDecode));
        const SampleBatch reference =
            e.model->sample_data(e.n, task_seed(ctx.master_seed, ctx.scenario_id, kTaskReference));
        const auto log_p0 = [&](std::span<const double> v) { return e.model->log_density(0.0, v); };
        nfe["yan"] = res.report.nfe;
        for (double alpha : e.yan_alphas) {
            if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("config: pd.yan_alphas entries must be in [0,1]");
            const SampleBatch mix = yan_interpolate(xhat, res.enhanced, alpha);
            const double m = mse(mix, x0);
            csv.row({format_double(sigma_star), format_double(m), format_double(psnr(m, e.model->peak())),
                     format_double(kl_grid(mix, log_p0, e.grid).value),
                     format_double(frechet_gaussian(mix, reference)), format_double(alpha)});
        }
    }

    const fs::path csv_path = e.out_dir / "pd_curve.csv";
    write_text_file(csv_path, csv.text);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(e.out_dir, command, resolved_echo(e, command), nfe, wall, {csv_path});
    std::cout << "sweep-pd: " << curve.size() << " sigma points -> " << csv_path.string() << "\n";
    return 0;
}

int cmd_sweep_speed(const Experiment& e, const std::string& command, const std::chrono::steady_clock::time_point& t0) {
    const RunContext ctx = e.ctx();
    const auto rows = speed_sweep(*e.model, *e.codec, e.speed_budgets, e.speed_solvers, e.speed_sigma, e.cfg, e.grid,
                                  ctx);
    CsvBuilder csv("solver,nfe,kl_grid,frechet");
    std::map<std::string, int64_t> nfe;
    int64_t total = 0;
    for (const auto& r : rows) {
        csv.row({solver_name(r.solver), std::to_string(r.nfe), format_double(r.kl_grid), format_double(r.frechet)});
        total += r.nfe;
    }
    nfe["speed_sweep"] = total;
    const fs::path csv_path = e.out_dir / "speed_curve.csv";
    write_text_file(csv_path, csv.text);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(e.out_dir, command, resolved_echo(e, command), nfe, wall, {csv_path});
    std::cout << "sweep-speed: " << rows.size() << " rows -> " << csv_path.string() << "\n";
    return 0;
}

int cmd_verify(const Experiment& e, const std::string& command, const std::chrono::steady_clock::time_point& t0) {
    ordered_json runs = ordered_json::array();
    bool all_pass = true;
    std::map<std::string, int64_t> nfe;
    int64_t total = 0;
    for (const std::string& scen_name : e.verify_scenarios) {
        const Scenario& scen = find_scenario(scen_name);
        const GmmModel model = GmmModel::builtin(scen.model_name);
        const auto codec = make_codec(scen.codec_kind, scen.delta, scen.offset);
        RunContext ctx;
        ctx.master_seed = e.seed;
        ctx.scenario_id = fnv1a64(scen_name);
        ctx.workers = e.workers;
        ctx.n = e.verify_n;
        ctx.flip_score_hook = e.flip_score;
        for (Solver solver : e.verify_solvers) {
            const TheoremReport rep =
                verify_theorem(model, *codec, e.verify_sigmas, solver, e.verify_steps, scen.grid, ctx);
            ordered_json rows = ordered_json::array();
            for (const auto& row : rep.rows) {
                ordered_json r;
                r["sigma_t"] = row.sigma_t;
                r["kl_after"] = row.kl_after;
                if (row.kl_at_t) {
                    r["kl_at_t"] = *row.kl_at_t;
                    r["kl_at_t_se"] = row.kl_at_t_se;
                } else {
                    r["kl_at_t"] = nullptr;
                }
                rows.push_back(r);
            }
            ordered_json run;
            run["scenario"] = scen_name;
            run["solver"] = solver_name(solver);
            run["steps"] = e.verify_steps;
            run["kl_before"] = rep.kl_before;
            run["rows"] = rows;
            run["improved_all"] = rep.improved_all;
            run["nonincreasing"] = rep.nonincreasing;
            run["ode_solver"] = rep.ode_solver;
            run["ode_preserved"] = rep.ode_preserved;
            run["pass"] = rep.pass();
            runs.push_back(run);
            all_pass = all_pass && rep.pass();
            for (double s : e.verify_sigmas) {
                if (s <= kSigmaFloor) continue;
                if (solver == Solver::consistency)
                    total += 1;
                else if (solver == Solver::ode_heun)
                    total += 2 * e.verify_steps - 1;
                else
                    total += e.verify_steps;
            }
        }
    }
    ordered_json report;
    report["pass"] = all_pass;
    report["runs"] = runs;
    const fs::path report_path = e.out_dir / "theorem_report.json";
    write_text_file(report_path, report.dump(2) + "\n");
    nfe["verify"] = total;
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(e.out_dir, command, resolved_echo(e, command), nfe, wall, {report_path});
    std::cout << "verify: " << (all_pass ? "PASS" : "FAIL") << " -> " << report_path.string() << "\n";
    return all_pass ? 0 : 3;
}

RateCurve read_rate_csv(const fs::path& path) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("rate csv: empty file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "rate_bits,metric") throw ConfigError("rate csv: header must be \"rate_bits,metric\"");
    RateCurve curve;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const size_t comma = line.find(',');
        if (comma == std::string::npos) throw ConfigError("rate csv: malformed row \"" + line + "\"");
        RatePoint p;
        const auto parse = [&](const std::string& s, double& out) {
            const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
            if (res.ec != std::errc() || res.ptr != s.data() + s.size())
                throw ConfigError("rate csv: bad number \"" + s + "\"");
        };
        parse(line.substr(0, comma), p.rate);
        parse(line.substr(comma + 1), p.metric);
        curve.push_back(p);
    }
    return curve;
}

int cmd_bd(const Experiment& e, const std::string& command, const std::chrono::steady_clock::time_point& t0) {
    std::vector<fs::path> outputs;
    std::map<std::string, int64_t> nfe;
    RateCurve anchor, test;
    if (!e.anchor_csv.empty() || !e.test_csv.empty()) {
        if (e.anchor_csv.empty() || e.test_csv.empty())
            throw ConfigError("bd: both anchor and test CSV paths are required");
        anchor = read_rate_csv(e.anchor_csv);
        test = read_rate_csv(e.test_csv);
    } else {
        // generative mode: rate sweep of the configured codec with and
        // without enhancement, paired per rate point
        const RunContext ctx = e.ctx();
        const SampleBatch x0 =
            e.model->sample_data(e.n, task_seed(ctx.master_seed, ctx.scenario_id, kTaskSampleData));
        const SampleBatch reference =
            e.model->sample_data(e.n, task_seed(ctx.master_seed, ctx.scenario_id, kTaskReference));
        const auto log_p0 = [&](std::span<const double> v) { return e.model->log_density(0.0, v); };
        const auto metric_of = [&](const SampleBatch& s) {
            if (e.bd_metric == "frechet") return frechet_gaussian(s, reference);
            if (e.bd_metric == "kl_grid") return kl_grid(s, log_p0, e.grid).value;
            return psnr(mse(s, x0), e.model->peak());
        };
        int64_t total = 0;
        for (double delta : e.bd_deltas) {
            const auto codec = make_codec(e.codec_kind, delta, e.offset);
            EnhanceConfig cfg = e.cfg;
            const EnhanceResult res = enhance(*e.model, *codec, x0, cfg, e.grid, ctx);
            const SampleBatch xhat = codec->decode(res.y, task_seed(ctx.master_seed, ctx.scenario_id, kTaskDecode));
            const double rate = rate_bits(res.y);
            anchor.push_back({rate, metric_of(xhat)});
            test.push_back({rate, metric_of(res.enhanced)});
            total += res.report.nfe;
        }
        nfe["bd_sweep"] = total;
        CsvBuilder acsv("rate_bits,metric"), tcsv("rate_bits,metric");
        for (const auto& p : anchor) acsv.row({format_double(p.rate), format_double(p.metric)});
        for (const auto& p : test) tcsv.row({format_double(p.rate), format_double(p.metric)});
        const fs::path apath = e.out_dir / "anchor.csv", tpath = e.out_dir / "test.csv";
        write_text_file(apath, acsv.text);
        write_text_file(tpath, tcsv.text);
        outputs.push_back(apath);
        outputs.push_back(tpath);
    }

    const double bd = bd_delta(anchor, test);
    ordered_json rep;
    rep["metric"] = e.bd_metric;
    rep["bd_delta"] = bd;
    rep["anchor_points"] = anchor.size();
    rep["test_points"] = test.size();
    const fs::path rpath = e.out_dir / "bd_report.json";
    write_text_file(rpath, rep.dump(2) + "\n");
    outputs.insert(outputs.begin(), rpath);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(e.out_dir, command, resolved_echo(e, command), nfe, wall, outputs);
    std::cout << "bd: delta(" << e.bd_metric << ") = " << format_double(bd) << "\n";
    return 0;
}

int cmd_list_scenarios() {
    for (const auto& s : builtin_scenarios()) {
        std::cout << s.name << ": model=" << s.model_name << " codec=" << codec_kind_name(s.codec_kind)
                  << " delta=" << format_double(s.delta) << " grid=[" << format_double(s.grid.lo[0]) << ","
                  << format_double(s.grid.hi[0]) << "]x" << s.grid.bins[0] << (s.grid.dims() == 2 ? "^2" : "")
                  << " n=" << s.n << " preset=" << preset_name(s.default_preset) << "\n";
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"perceptual enhancement laboratory"};
    app.require_subcommand(1);

    CliOptions opt;
    std::string perturb_arg;
    app.add_option("--config", opt.config_path, "JSON config path");
    app.add_option("--out", opt.out_dir, "output directory (overrides config)");
    app.add_option("--seed", opt.seed, "master seed (overrides config)");
    app.add_option("--workers", opt.workers, "worker threads, 0 = machine parallelism");
    app.add_option("--perturb", perturb_arg, "score perturbation a,omega");
    app.add_flag("--flip-score", opt.flip_score, "negate the score inside verify (sanity hook)")->group("");

    auto* sub_enhance = app.add_subcommand("enhance", "single enhancement run with metrics");
    auto* sub_pd = app.add_subcommand("sweep-pd", "perception-distortion sweep over sigma");
    auto* sub_speed = app.add_subcommand("sweep-speed", "solver quality per NFE budget");
    auto* sub_verify = app.add_subcommand("verify", "KL-improvement verification across scenarios");
    auto* sub_bd = app.add_subcommand("bd", "Bjontegaard delta between two rate curves");
    sub_bd->add_option("files", opt.bd_files, "anchor.csv test.csv")->expected(0, 2);
    auto* sub_list = app.add_subcommand("list-scenarios", "print the built-in scenarios");
    // flags live on the parent; let "pel <cmd> --config ..." reach them
    for (auto* sub : {sub_enhance, sub_pd, sub_speed, sub_verify, sub_bd, sub_list}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return 2;
    }

    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (!perturb_arg.empty()) {
            PerturbParams p{};
            const size_t comma = perturb_arg.find(',');
            if (comma == std::string::npos) throw ConfigError("--perturb expects a,omega");
            const auto parse = [](const std::string& s, double& out) {
                const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
                if (res.ec != std::errc() || res.ptr != s.data() + s.size())
                    throw ConfigError("--perturb: bad number \"" + s + "\"");
            };
            parse(perturb_arg.substr(0, comma), p.amplitude);
            parse(perturb_arg.substr(comma + 1), p.omega);
            opt.perturb = p;
        }

        ordered_json cfg = ordered_json::object();
        if (!opt.config_path.empty()) {
            const std::string text = read_text_file(opt.config_path);
            cfg = ordered_json::parse(text, nullptr, true, false);
        }

        const std::string command = app.get_subcommands().front()->get_name();
        if (command == "list-scenarios") return cmd_list_scenarios();

        Experiment e = resolve_experiment(cfg, opt);
        set_default_workers(e.workers);
        fs::create_directories(e.out_dir);

        if (command == "enhance") return cmd_enhance(e, command, t0);
        if (command == "sweep-pd") return cmd_sweep_pd(e, command, t0);
        if (command == "sweep-speed") return cmd_sweep_speed(e, command, t0);
        if (command == "verify") return cmd_verify(e, command, t0);
        if (command == "bd") return cmd_bd(e, command, t0);
        throw ConfigError("unknown subcommand " + command);
    } catch (const nlohmann::json::exception& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return 2;
    } catch (const ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return 2;
    } catch (const NumericalError& ex) {
        std::cerr << "numerical error: " << ex.what() << "\n";
        return 3;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 3;
    }
}

}  // namespace pel
