#include "crmort/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "crmort/csv.hpp"
#include "crmort/dataset.hpp"
#include "crmort/diagnostics.hpp"
#include "crmort/error.hpp"
#include "crmort/forecast.hpp"
#include "crmort/ingest.hpp"
#include "crmort/likelihood.hpp"
#include "crmort/mcmc.hpp"
#include "crmort/panjer.hpp"
#include "crmort/simulate.hpp"

namespace crmort::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class MissingSamples : public Error {
public:
    using Error::Error;
};

constexpr int kDefaultChains = 4;
constexpr std::size_t kMinDiagnosticDraws = 100;

struct Context {
    std::string command;
    json config = json::object();
    fs::path config_dir = ".";
    std::string config_hash;
    fs::path out_dir = "out";
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    json seeds = json::array();
    std::vector<std::string> outputs;
};

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    std::string hex;
    static const char* digits = "0123456789abcdef";
    for (unsigned int i = 0; i < len; ++i) {
        hex.push_back(digits[md[i] >> 4]);
        hex.push_back(digits[md[i] & 15]);
    }
    return hex;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const json& section(const Context& ctx, const char* name) {
    static const json empty = json::object();
    auto it = ctx.config.find(name);
    if (it == ctx.config.end()) return empty;
    if (!it->is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
    return *it;
}

fs::path resolve(const Context& ctx, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : ctx.config_dir / path;
}

fs::path required_path(const Context& ctx, const json& sec, const char* key, const char* sec_name) {
    if (!sec.contains(key)) throw ConfigError(std::string("config needs ") + sec_name + "." + key);
    return resolve(ctx, sec.at(key).get<std::string>());
}

fs::path output(Context& ctx, const std::string& name) {
    fs::create_directories(ctx.out_dir);
    ctx.outputs.push_back(name);
    return ctx.out_dir / name;
}

void write_text(Context& ctx, const std::string& name, const std::string& text) {
    const fs::path path = output(ctx, name);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

void write_json(Context& ctx, const std::string& name, const json& j) { write_text(ctx, name, j.dump(2) + "\n"); }

void write_manifest(Context& ctx) {
    std::vector<std::string> files = ctx.outputs;
    std::sort(files.begin(), files.end());
    json m{{"command", ctx.command},
           {"version", kVersion},
           {"config_sha256", ctx.config_hash},
           {"seeds", ctx.seeds},
           {"outputs", files}};
    const fs::path path = ctx.out_dir / (ctx.command + ".manifest.json");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << m.dump(2) << '\n';
}

int base_year(const Context& ctx) { return section(ctx, "model").value("base_year", 1987); }

// Zero parameters carrying the configured trend constants.
ModelParams constants_for(const Context& ctx, const ModelDims& dims) {
    ModelParams p = ModelParams::zeros(dims);
    const json& model = section(ctx, "model");
    auto trend = [](const json& j) {
        TrendReductionParams t;
        t.zeta = j.value("zeta", t.zeta);
        t.eta = j.value("eta", t.eta);
        return t;
    };
    if (model.contains("trend")) {
        for (auto& dp : p.death_prob) dp.trend = trend(model.at("trend"));
    }
    if (model.contains("cause_trend")) {
        for (auto& ct : p.weights.cause_trend) ct = trend(model.at("cause_trend"));
    }
    p.validate();
    return p;
}

fs::path dataset_path(const Context& ctx) {
    const json& data = section(ctx, "data");
    if (data.contains("dataset")) return resolve(ctx, data.at("dataset").get<std::string>());
    return ctx.out_dir / "dataset.csv";
}

MortalityDataset load_normalized(const Context& ctx) {
    MortalityDataset data = read_dataset_csv(dataset_path(ctx).string());
    data.validate();
    if (data.first_year() != base_year(ctx)) {
        throw ConfigError("dataset starts in " + std::to_string(data.first_year()) + " but model.base_year is " +
                          std::to_string(base_year(ctx)));
    }
    return data;
}

int chain_count(const Context& ctx) {
    const int n = section(ctx, "sampler").value("chains", kDefaultChains);
    if (n < 1) throw ConfigError("sampler.chains must be >= 1");
    return n;
}

std::vector<PosteriorSamples> load_chains(const Context& ctx) {
    std::vector<PosteriorSamples> chains;
    for (int c = 0; c < chain_count(ctx); ++c) {
        const fs::path csv_path = ctx.out_dir / ("chain_" + std::to_string(c) + ".csv");
        const fs::path json_path = ctx.out_dir / ("chain_" + std::to_string(c) + ".json");
        if (!fs::exists(csv_path) || !fs::exists(json_path)) {
            throw MissingSamples("posterior samples not found: " + csv_path.string() + " (run 'estimate' first)");
        }
        chains.push_back(read_samples(csv_path.string(), json_path.string()));
    }
    return chains;
}

// --- commands --------------------------------------------------------------------------------

void cmd_ingest(Context& ctx) {
    const json& data = section(ctx, "data");
    IngestConfig cfg;
    cfg.age_groups = section(ctx, "model").value("age_groups", 9);
    if (section(ctx, "model").contains("base_year")) cfg.base_year = base_year(ctx);
    if (data.contains("comparability_cutoff_year")) {
        const auto& c = data.at("comparability_cutoff_year");
        cfg.comparability_cutoff_year = c.is_null() ? std::nullopt : std::optional<int>(c.get<int>());
    }
    if (data.contains("cause_mapping")) {
        cfg.mapping = load_cause_mapping(resolve(ctx, data.at("cause_mapping").get<std::string>()).string());
    }
    const fs::path deaths = required_path(ctx, data, "deaths", "data");
    const fs::path population = required_path(ctx, data, "population", "data");
    for (const auto& p : {deaths, population}) {
        if (!fs::exists(p)) throw IoError("input file not found: " + p.string());
    }
    const IngestResult res = load_dataset(deaths.string(), population.string(), cfg);
    write_text(ctx, "dataset.csv", dataset_csv_string(res.data));
    write_json(ctx, "coverage.json", res.coverage);
    std::cout << "ingested " << res.data.years() << " years, " << res.data.dims().n_cells() << " cells, "
              << res.data.dims().causes + 1 << " causes\n";
}

void cmd_simulate(Context& ctx) {
    const json& sim = section(ctx, "simulate");
    SimulationSpec spec;
    spec.params = load_params(required_path(ctx, sim, "params", "simulate").string());
    spec.first_year = sim.value("first_year", base_year(ctx));
    spec.years = sim.value("years", 25);
    spec.seed = ctx.seed.value_or(sim.value("seed", ctx.config.value("seed", std::uint64_t{1})));
    const json pop = sim.value("population", json(1000000));
    if (pop.is_number_integer()) {
        spec.population.assign(spec.params.dims.n_cells() * static_cast<std::size_t>(spec.years),
                               pop.get<std::int64_t>());
    } else {
        spec.population = pop.get<std::vector<std::int64_t>>();
    }
    ctx.seeds = json::array({spec.seed});
    const SimulationResult res = simulate_dataset(spec);
    res.data.validate();
    write_text(ctx, "dataset.csv", dataset_csv_string(res.data));
    write_json(ctx, "simulation_stats.json", res.stats);
    std::cout << "simulated " << res.data.years() << " years; cap events: " << res.stats.cap_events << '\n';
}

void cmd_estimate(Context& ctx) {
    const MortalityDataset data = load_normalized(ctx);
    const json& sj = section(ctx, "sampler");
    SamplerConfig base = sj.get<SamplerConfig>();
    const FreeLayout layout(data.dims());
    base.validate(layout.size());

    const int n_chains = chain_count(ctx);
    std::vector<std::uint64_t> seeds;
    if (sj.contains("seeds") && !ctx.seed) {
        seeds = sj.at("seeds").get<std::vector<std::uint64_t>>();
        if (static_cast<int>(seeds.size()) != n_chains) throw ConfigError("sampler.seeds needs one seed per chain");
    } else {
        const std::uint64_t s0 = ctx.seed.value_or(sj.value("seed", ctx.config.value("seed", std::uint64_t{1})));
        for (int c = 0; c < n_chains; ++c) seeds.push_back(s0 + static_cast<std::uint64_t>(c));
    }
    ctx.seeds = seeds;

    const ModelParams init = init_params_moment_matching(data, constants_for(ctx, data.dims()));
    std::vector<ModelParams> inits;
    std::vector<SamplerConfig> cfgs;
    for (int c = 0; c < n_chains; ++c) {
        SamplerConfig cfg = base;
        cfg.seed = seeds[c];
        cfgs.push_back(cfg);
        inits.push_back(c == 0 ? init : jittered_start(data, init, seeds[c]));
    }
    const auto chains = run_chains_parallel(data, inits, cfgs, ctx.threads);
    for (std::size_t c = 0; c < chains.size(); ++c) {
        const std::string stem = "chain_" + std::to_string(c);
        write_samples(chains[c], output(ctx, stem + ".csv").string(), output(ctx, stem + ".json").string());
    }
    const ModelParams mean = posterior_mean(pool_samples(chains));
    write_json(ctx, "posterior_mean.json", mean);
    if (chains.front().n_draws() >= kMinDiagnosticDraws) {
        write_json(ctx, "diagnostics.json", diagnose(chains, data));
    }
    std::cout << "estimated " << n_chains << " chain(s), " << chains.front().n_draws() << " draws each\n";
}

void cmd_diagnose(Context& ctx) {
    const auto chains = load_chains(ctx);
    const MortalityDataset data = load_normalized(ctx);
    const DiagnosticsReport rep = diagnose(chains, data);
    write_json(ctx, "diagnostics.json", rep);
    double worst = 1.0;
    for (const auto& p : rep.params) {
        if (std::isfinite(p.rhat)) worst = std::max(worst, p.rhat);
    }
    std::cout << "max split R-hat " << worst << '\n';
}

void cmd_forecast(Context& ctx) {
    const json& fc = section(ctx, "forecast");
    const auto years = fc.value("years", std::vector<int>{});
    if (years.empty()) throw ConfigError("forecast.years must list at least one year");
    const int top = fc.value("top", 3);
    const PosteriorSamples pooled = pool_samples(load_chains(ctx));
    const ModelDims& dims = pooled.base.dims;
    std::vector<CellIndex> cells;
    if (fc.contains("cells")) {
        for (const auto& key : fc.at("cells").get<std::vector<std::string>>()) {
            cells.push_back(parse_cell_key(key));
            check_cell(dims, cells.back());
        }
    } else {
        for (std::size_t c = 0; c < dims.n_cells(); ++c) cells.push_back(cell_at(dims, c));
    }
    const TimeMapping mapping{base_year(ctx), 0};
    const ForecastTable table = forecast_table(pooled, cells, years, mapping, top);
    write_text(ctx, "forecast.csv", render_csv(table));
    write_text(ctx, "forecast.txt", render_text(table, dims.age_groups));

    json rates = json::array();
    for (const auto& cell : cells) {
        for (int y : years) {
            const RateSummary r = death_rate_forecast(pooled, cell, y, mapping);
            rates.push_back({{"cell", cell_key(cell)}, {"year", y}, {"mean", r.mean}, {"q05", r.q05}, {"q95", r.q95}});
        }
    }
    write_json(ctx, "forecast.json", json{{"weights", forecast_json(table)}, {"death_probability", rates}});
    std::cout << render_text(table, dims.age_groups);
}

void cmd_loss(Context& ctx) {
    const json& ls = section(ctx, "loss");
    const auto levels = ls.value("levels", std::vector<double>{0.99, 0.995});
    for (double a : levels) {
        if (!(a > 0.0 && a < 1.0)) throw ConfigError("loss.levels must lie in (0,1)");
    }
    if (!ls.contains("year")) throw ConfigError("config needs loss.year");
    const int year = ls.at("year").get<int>();
    const double unit = ls.value("loss_unit", 1.0);
    const fs::path params_path =
        ls.contains("params") ? resolve(ctx, ls.at("params").get<std::string>()) : ctx.out_dir / "posterior_mean.json";
    if (!fs::exists(params_path)) throw MissingSamples("parameter file not found: " + params_path.string());
    const ModelParams params = load_params(params_path.string());
    const Portfolio pf = read_portfolio_csv(required_path(ctx, ls, "portfolio", "loss").string(), unit, year);
    pf.validate(params.dims);
    const double t = TimeMapping{base_year(ctx), 0}.t_of(year);
    const LossPMF pmf = portfolio_loss(pf, params, t, ls.value("n_max", std::size_t{0}));
    if (pmf.truncated()) throw TruncationError(pmf.warning);

    write_loss_csv(pmf, output(ctx, "loss.csv").string());
    json out{{"year", year},
             {"loss_unit", unit},
             {"mean_units", pmf.mean()},
             {"truncation_mass", pmf.truncation_mass},
             {"levels", json::array()}};
    for (double a : levels) {
        const RiskMeasures rm = risk_measures(pmf, a);
        out["levels"].push_back({{"alpha", a},
                                 {"var_units", rm.var},
                                 {"es_units", rm.es},
                                 {"var_amount", static_cast<double>(rm.var) * unit},
                                 {"es_amount", rm.es * unit}});
    }
    write_json(ctx, "risk_measures.json", out);
    std::cout << out.dump(2) << '\n';
}

} // namespace

int run(int argc, char** argv) {
    CLI::App app{"Cause-of-death mortality model: estimation, forecasting and portfolio losses"};
    app.set_version_flag("--version", kVersion);
    app.fallthrough();
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    unsigned threads = 0;
    app.add_option("--config", config_path, "JSON run configuration")->required();
    app.add_option("--seed", seed, "override the configured seed");
    app.add_option("--out", out_dir, "output directory (overrides output_dir)");
    app.add_option("--threads", threads, "worker threads for chains (0 = all cores)");

    const std::vector<std::pair<std::string, std::string>> commands{
        {"ingest", "normalize raw death and population files"},
        {"estimate", "run the MCMC chains"},
        {"forecast", "forecast cause weights from posterior samples"},
        {"simulate", "generate a synthetic dataset"},
        {"loss", "portfolio loss distribution and risk measures"},
        {"diagnose", "convergence and model checks for existing chains"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    Context ctx;
    ctx.command = app.get_subcommands().front()->get_name();
    ctx.seed = seed;
    ctx.threads = threads;
    try {
        const fs::path cfg(config_path);
        const std::string text = read_text(cfg);
        ctx.config_hash = sha256_hex(text);
        try {
            ctx.config = json::parse(text);
        } catch (const json::exception& e) {
            throw ConfigError(config_path + ": " + e.what());
        }
        if (!ctx.config.is_object()) throw ConfigError(config_path + ": top level must be an object");
        ctx.config_dir = cfg.has_parent_path() ? cfg.parent_path() : fs::path(".");
        ctx.out_dir = !out_dir.empty() ? fs::path(out_dir) : resolve(ctx, ctx.config.value("output_dir", "out"));

        if (ctx.command == "ingest") cmd_ingest(ctx);
        else if (ctx.command == "simulate") cmd_simulate(ctx);
        else if (ctx.command == "estimate") cmd_estimate(ctx);
        else if (ctx.command == "diagnose") cmd_diagnose(ctx);
        else if (ctx.command == "forecast") cmd_forecast(ctx);
        else if (ctx.command == "loss") cmd_loss(ctx);
        write_manifest(ctx);
        return kExitOk;
    } catch (const MissingSamples& e) {
        std::cerr << "crmort: " << e.what() << '\n';
        return kExitMissingSamples;
    } catch (const IoError& e) {
        std::cerr << "crmort: I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const DataError& e) {
        std::cerr << "crmort: data error: " << e.what() << '\n';
        return kExitData;
    } catch (const SamplerError& e) {
        std::cerr << "crmort: sampler error: " << e.what() << '\n';
        return kExitSampler;
    } catch (const TruncationError& e) {
        std::cerr << "crmort: truncation: " << e.what() << '\n';
        return kExitTruncation;
    } catch (const ConfigError& e) {
        std::cerr << "crmort: invalid configuration: " << e.what() << '\n';
        return kExitConfig;
    } catch (const json::exception& e) {
        std::cerr << "crmort: invalid configuration: " << e.what() << '\n';
        return kExitConfig;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "crmort: I/O error: " << e.what() << '\n';
        return kExitIo;
    }
}

} // namespace crmort::cli
