// wdsguard: batch experiments, validation, oracles and the live service.
//
// Exit codes: 0 ok, 1 validation, 2 runtime, 3 oracle failure.

#include "wdsguard/fixtures.hpp"
#include "wdsguard/oracles.hpp"
#include "wdsguard/orchestrator.hpp"
#include "wdsguard/service.hpp"
#include "wdsguard/text_format.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#ifndef WDSGUARD_FIXTURE_DIR
#define WDSGUARD_FIXTURE_DIR "fixtures"
#endif

using namespace wdsguard;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitOracle = 3;

std::string fixture(const char* name)
{
    return (std::filesystem::path(WDSGUARD_FIXTURE_DIR) / name).string();
}

struct Inputs {
    std::string network = fixture("synthetic_town.net");
    std::string format = "native";
    std::string timeline = fixture("town_timeline.txt");
    std::string config = fixture("default_run.cfg");
};

struct Overrides {
    std::string metric;
    std::string strategy;
    std::string updates;
    std::string executions;
    std::string reactions;
    std::string td;
    std::string clock;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> generations_per_hour;
    std::optional<std::size_t> population;
    std::optional<std::size_t> threads;
};

void add_inputs(CLI::App* app, Inputs& in, bool with_config)
{
    app->add_option("--network", in.network, "network file")->capture_default_str();
    app->add_option("--format", in.format, "network format")->check(CLI::IsMember({"native", "inp"}))->capture_default_str();
    app->add_option("--timeline", in.timeline, "perceived-scenario timeline")->capture_default_str();
    if (with_config) {
        app->add_option("--config", in.config, "run configuration")->capture_default_str();
    }
}

void add_overrides(CLI::App* app, Overrides& o)
{
    const auto onoff = CLI::IsMember({"on", "off"});
    app->add_option("--metric", o.metric, "diversity metric")->check(CLI::IsMember({"dnn", "ads", "dbs"}));
    app->add_option("--strategy", o.strategy, "response strategy")->check(CLI::IsMember({"flush", "dye", "both"}));
    app->add_option("--updates", o.updates, "scenario updates factor")->check(onoff);
    app->add_option("--executions", o.executions, "execution feedback factor")->check(onoff);
    app->add_option("--reactions", o.reactions, "consumer reactions factor")->check(onoff);
    app->add_option("--td", o.td, "toxic dose level")->check(CLI::IsMember({"min", "avg", "max"}));
    app->add_option("--clock", o.clock, "clock mode")->check(CLI::IsMember({"budget", "wall"}));
    app->add_option("--seed", o.seed, "GA seed");
    app->add_option("--generations-per-hour", o.generations_per_hour, "budget clock G");
    app->add_option("--population", o.population, "GA population (even)");
    app->add_option("--threads", o.threads, "evaluation workers");
}

Network load_network(const Inputs& in)
{
    const auto text = read_file(in.network);
    if (in.format == "inp") {
        auto r = parse_inp_subset(text);
        for (const auto& w : r.warnings) {
            std::cerr << "warning: " << w << "\n";
        }
        return std::move(r.network);
    }
    return parse_native(text);
}

EmergencyConfig load_config(const Inputs& in, const Overrides& o)
{
    auto cfg = parse_config(read_file(in.config));
    if (!o.metric.empty()) {
        cfg.ga.metric = *diversity_metric_from_string(o.metric);
    }
    if (!o.strategy.empty()) {
        cfg.strategy = *strategy_from_string(o.strategy);
    }
    if (!o.updates.empty()) {
        cfg.flags.scenario_updates = o.updates == "on";
    }
    if (!o.executions.empty()) {
        cfg.flags.execution_feedback = o.executions == "on";
    }
    if (!o.reactions.empty()) {
        cfg.flags.consumer_reactions = o.reactions == "on";
    }
    if (!o.td.empty()) {
        cfg.exposure.toxic_dose_mg = toxic_dose_mg(*toxic_dose_level_from_string(o.td));
    }
    if (!o.clock.empty()) {
        cfg.clock = o.clock == "budget" ? ClockMode::Budget : ClockMode::Wall;
    }
    if (o.seed) {
        cfg.ga.seed = *o.seed;
    }
    if (o.generations_per_hour) {
        cfg.generations_per_hour = *o.generations_per_hour;
    }
    if (o.population) {
        cfg.ga.population = *o.population;
    }
    if (o.threads) {
        cfg.threads = *o.threads;
    }
    cfg.validate();
    return cfg;
}

RunResult optimize_once(const Network& net, const PerceivedTimeline& tl, const EmergencyConfig& cfg,
                        const std::string& out_dir)
{
    auto result = run_emergency(net, tl, cfg);
    write_run_outputs(out_dir, net, result, cfg);
    return result;
}

double final_reported_utim(const RunResult& r, double report_until)
{
    double u = 0.0;
    for (const auto& s : r.series) {
        if (s.sim_time_s <= report_until + 1e-6) {
            u = s.incumbent_utim_g;
        }
    }
    return u;
}

int cmd_simulate(const Inputs& in, const std::string& scenario_row, const std::string& td, const std::string& reactions,
                 const std::string& out_dir)
{
    const auto net = load_network(in);
    ContaminationScenario sc;
    if (!scenario_row.empty()) {
        sc = parse_timeline("[TRUE]\n" + scenario_row + "\n").truth.value();
    } else {
        const auto file = parse_timeline(read_file(in.timeline));
        sc = file.truth ? *file.truth : file.timeline.entries().back().scenario;
    }
    sc.validate(net);
    SimulationSettings s;
    s.exposure.toxic_dose_mg = toxic_dose_mg(*toxic_dose_level_from_string(td));
    s.rules.sickness = reactions == "on";
    s.demand_feedback = reactions == "on";
    EmergencySimulator sim(net, s);
    auto st = sim.initial_state();
    std::string csv = "sim_time_s,tim_g,stopped_persons\n";
    sim.advance(st, s.horizon_s, &sc, {}, [&](const SimulationState& x, double) {
        double stopped = 0.0;
        for (const auto& c : x.cohorts) {
            stopped += c.state == CohortState::Stopped ? c.size : 0.0;
        }
        csv += fmt::format("{},{},{}\n", format_number(x.time_s), format_number(x.tim_g()), format_number(stopped));
    });
    std::filesystem::create_directories(out_dir);
    write_file((std::filesystem::path(out_dir) / "tim_series.csv").string(), csv);
    fmt::print("scenario {} {} kg, TD {} ({} mg), reactions {}\n", sc.node, format_number(sc.load_kg), td,
               format_number(s.exposure.toxic_dose_mg), reactions);
    fmt::print("UTIM {:.4f} g -> {}/tim_series.csv\n", st.tim_g(), out_dir);
    return 0;
}

int cmd_optimize(const Inputs& in, const Overrides& o, const std::string& out_dir)
{
    const auto net = load_network(in);
    const auto tl = parse_timeline(read_file(in.timeline)).timeline;
    const auto cfg = load_config(in, o);
    const auto r = optimize_once(net, tl, cfg, out_dir);
    const auto& last = r.series.back();
    fmt::print("metric {} strategy {} seed {}: {} generations, {} epochs, {} executions\n", to_string(cfg.ga.metric),
               to_string(cfg.strategy), cfg.ga.seed, last.generation, r.epochs.size(), r.executions.size());
    fmt::print("incumbent UTIM at {} {:.4f} g, no-response {:.4f} g, confined area {:.3f} g·h -> {}\n",
               format_clock(cfg.report_until_s), final_reported_utim(r, cfg.report_until_s), last.no_response_utim_g,
               confined_area(r.series, r.series.front().sim_time_s, cfg.report_until_s), out_dir);
    return 0;
}

template <class Variant, class Apply>
int cmd_compare(const Inputs& in, const Overrides& o, const std::string& out_dir, const std::string& column,
                const std::vector<Variant>& variants, Apply apply, const char* table_name)
{
    const auto net = load_network(in);
    const auto tl = parse_timeline(read_file(in.timeline)).timeline;
    const auto base = load_config(in, o);
    std::string csv = fmt::format("{},confined_area_g_h,final_incumbent_utim_g,no_response_utim_g\n", column);
    fmt::print("{:<10} {:>18} {:>16}\n", column, "confined area g·h", "incumbent g");
    for (const auto& v : variants) {
        auto cfg = base;
        apply(cfg, v);
        const auto name = std::string(to_string(v));
        const auto r = optimize_once(net, tl, cfg, (std::filesystem::path(out_dir) / name).string());
        const double area = confined_area(r.series, r.series.front().sim_time_s, cfg.report_until_s);
        const double u = final_reported_utim(r, cfg.report_until_s);
        csv += fmt::format("{},{},{},{}\n", name, format_number(area), format_number(u),
                           format_number(r.series.back().no_response_utim_g));
        fmt::print("{:<10} {:>18.3f} {:>16.4f}\n", name, area, u);
    }
    write_file((std::filesystem::path(out_dir) / table_name).string(), csv);
    return 0;
}

int cmd_validate(const Inputs& in, bool check_config, bool check_timeline)
{
    const auto net = load_network(in);
    const auto m = describe_network(std::filesystem::path(in.network).stem().string(), net);
    fmt::print("network ok: {} junctions ({} intermediate), {} reservoirs, {} tanks, {} pipes, {} pumps, population {}\n",
               m.junctions, m.intermediate_nodes, m.reservoirs, m.tanks, m.pipes, m.pumps,
               format_number(m.population));
    if (check_timeline) {
        const auto file = parse_timeline(read_file(in.timeline));
        file.timeline.validate(net);
        if (file.truth) {
            file.truth->validate(net);
        }
        fmt::print("timeline ok: {} entries\n", file.timeline.entries().size());
    }
    if (check_config) {
        const auto cfg = parse_config(read_file(in.config));
        if (cfg.exposure.ingestion_times_s.empty()) {
            throw ValidationError("config", "no ingestion times");
        }
        if (net.intermediate_nodes().empty()) {
            throw ValidationError("network", "no intermediate nodes to place actions at");
        }
        fmt::print("config ok: {} strategy, {} slots per action, G = {}\n", to_string(cfg.strategy),
                   cfg.slots_per_action, cfg.generations_per_hour);
    }
    return 0;
}

int cmd_oracle()
{
    bool all = true;
    for (const auto& c : oracle::run_all()) {
        fmt::print("{} {} ({})\n", c.passed ? "PASS" : "FAIL", c.name, c.detail);
        all = all && c.passed;
    }
    return all ? 0 : kExitOracle;
}

int cmd_generate(const std::string& kind, std::uint64_t seed, const std::string& out_dir)
{
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    if (kind == "town") {
        const auto fx = generate_synthetic_town(seed);
        const auto stem = seed == 1 ? std::string("synthetic_town") : fmt::format("synthetic_town_seed{}", seed);
        write_file((dir / (stem + ".net")).string(), serialize_native(fx.network));
        write_file((dir / (stem + ".manifest.json")).string(), manifest_to_json(fx.manifest));
        fmt::print("{}: {} junctions, {} intermediate, population {}\n", stem, fx.manifest.junctions,
                   fx.manifest.intermediate_nodes, format_number(fx.manifest.population));
    } else if (kind == "one-pipe") {
        write_file((dir / "one_pipe.net").string(), serialize_native(one_pipe_network()));
    } else {
        write_file((dir / "toy.net").string(), serialize_native(toy_network()));
    }
    return 0;
}

int cmd_serve(const Inputs& in, std::string host, int port)
{
    if (const char* h = std::getenv("WDSGUARD_HOST"); h && host.empty()) {
        host = h;
    }
    if (const char* p = std::getenv("WDSGUARD_PORT"); p && port == 0) {
        port = std::atoi(p);
    }
    host = host.empty() ? "127.0.0.1" : host;
    port = port == 0 ? 8080 : port;
    const auto net = load_network(in);
    ServiceHub hub({serialize_native(net), read_file(in.timeline), read_file(in.config)});
    fmt::print("serving {} on http://{}:{}/v1\n", kApiVersion, host, port);
    std::fflush(stdout);
    const int rc = serve(hub, host, port);
    if (rc != 0) {
        std::cerr << "error: could not listen on " << host << ":" << port << "\n";
    }
    return rc;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Contamination emergency response engine"};
    app.require_subcommand(1);

    Inputs in;
    Overrides o;
    std::string out_dir = "out";

    auto* simulate = app.add_subcommand("simulate", "no-response TIM accumulation series");
    std::string scenario_row;
    std::string td = "avg";
    std::string reactions = "on";
    add_inputs(simulate, in, false);
    simulate->add_option("--scenario", scenario_row, "node, load_kg, demand_mult, start, duration_h");
    simulate->add_option("--td", td, "toxic dose level")->check(CLI::IsMember({"min", "avg", "max"}))->capture_default_str();
    simulate->add_option("--reactions", reactions, "consumer reactions")->check(CLI::IsMember({"on", "off"}))->capture_default_str();
    simulate->add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* optimize = app.add_subcommand("optimize", "full dynamic run");
    add_inputs(optimize, in, true);
    add_overrides(optimize, o);
    optimize->add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* cmp_div = app.add_subcommand("compare-diversity", "DNN / ADS / DBS runs and confined areas");
    add_inputs(cmp_div, in, true);
    add_overrides(cmp_div, o);
    cmp_div->add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* cmp_str = app.add_subcommand("compare-strategy", "flush / dye / both runs and confined areas");
    add_inputs(cmp_str, in, true);
    add_overrides(cmp_str, o);
    cmp_str->add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* validate = app.add_subcommand("validate", "lint a network, timeline and config");
    add_inputs(validate, in, true);
    bool skip_config = false;
    bool skip_timeline = false;
    validate->add_flag("--no-config", skip_config, "network only or network + timeline");
    validate->add_flag("--no-timeline", skip_timeline);

    auto* oracle_cmd = app.add_subcommand("oracle", "closed-form and brute-force batteries");

    auto* serve_cmd = app.add_subcommand("serve", "live operator service");
    add_inputs(serve_cmd, in, true);
    std::string host;
    int port = 0;
    serve_cmd->add_option("--host", host, "bind address (env WDSGUARD_HOST, default 127.0.0.1)");
    serve_cmd->add_option("--port", port, "port (env WDSGUARD_PORT, default 8080)");

    auto* generate = app.add_subcommand("generate-fixture", "write bundled fixture networks");
    std::string kind = "town";
    std::uint64_t seed = 1;
    generate->add_option("--kind", kind)->check(CLI::IsMember({"town", "one-pipe", "toy"}))->capture_default_str();
    generate->add_option("--seed", seed)->capture_default_str();
    generate->add_option("--out", out_dir, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitValidation;
    }

    try {
        if (*simulate) {
            return cmd_simulate(in, scenario_row, td, reactions, out_dir);
        }
        if (*optimize) {
            return cmd_optimize(in, o, out_dir);
        }
        if (*cmp_div) {
            return cmd_compare(in, o, out_dir, "metric",
                               std::vector{DiversityMetric::DNN, DiversityMetric::ADS, DiversityMetric::DBS},
                               [](EmergencyConfig& c, DiversityMetric m) { c.ga.metric = m; },
                               "confined_areas.csv");
        }
        if (*cmp_str) {
            return cmd_compare(in, o, out_dir, "strategy", std::vector{Strategy::Flush, Strategy::Dye, Strategy::Both},
                               [](EmergencyConfig& c, Strategy s) { c.strategy = s; }, "strategy_comparison.csv");
        }
        if (*validate) {
            return cmd_validate(in, !skip_config, !skip_timeline);
        }
        if (*oracle_cmd) {
            return cmd_oracle();
        }
        if (*serve_cmd) {
            return cmd_serve(in, host, port);
        }
        if (*generate) {
            return cmd_generate(kind, seed, out_dir);
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.entity() << ": " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
