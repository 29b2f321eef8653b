#include "wdsguard/orchestrator.hpp"

#include "wdsguard/text_format.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <limits>
#include <thread>

namespace wdsguard {

namespace {

constexpr double kTimeEps = 1e-6;
using ojson = nlohmann::ordered_json;

} // namespace

std::string_view to_string(ClockMode m)
{
    return m == ClockMode::Budget ? "budget" : "wall";
}

std::string_view to_string(Strategy s)
{
    switch (s) {
    case Strategy::Flush:
        return "flush";
    case Strategy::Dye:
        return "dye";
    case Strategy::Both:
        return "both";
    }
    return "both";
}

std::optional<Strategy> strategy_from_string(std::string_view s)
{
    const auto lower = to_lower(s);
    for (auto v : {Strategy::Flush, Strategy::Dye, Strategy::Both}) {
        if (to_string(v) == lower) {
            return v;
        }
    }
    return std::nullopt;
}

ProtocolShape EmergencyConfig::shape() const
{
    switch (strategy) {
    case Strategy::Flush:
        return {slots_per_action, 0};
    case Strategy::Dye:
        return {0, slots_per_action};
    case Strategy::Both:
        return {slots_per_action, slots_per_action};
    }
    return {slots_per_action, slots_per_action};
}

SimulationSettings EmergencyConfig::simulation_settings() const
{
    SimulationSettings s;
    s.exposure = exposure;
    s.rules.sickness = flags.consumer_reactions;
    s.rules.dye_alert = true;
    s.demand_feedback = flags.consumer_reactions;
    s.quality_step_s = quality_step_s;
    s.horizon_s = horizon_s;
    return s;
}

void EmergencyConfig::validate() const
{
    if (!(response_delay_s >= 0.0) || !(horizon_s > response_delay_s)) {
        throw ValidationError("config", "response delay must be shorter than the horizon");
    }
    if (generations_per_hour < 1) {
        throw ValidationError("config", "generations_per_hour must be at least 1");
    }
    if (!(wall_speedup > 0.0) || !(quality_step_s > 0.0)) {
        throw ValidationError("config", "wall_speedup and quality_step_s must be positive");
    }
    if (threads < 1) {
        throw ValidationError("config", "threads must be at least 1");
    }
    if (slots_per_action < 1) {
        throw ValidationError("config", "slots must be at least 1");
    }
    if (!(actions.flush_duration_s > 0.0) || !(actions.dye_duration_s > 0.0) || !(actions.dye_mass_kg > 0.0) ||
        !(actions.hydrant_coefficient_gpm_psi > 0.0)) {
        throw ValidationError("config", "action durations, dye mass and hydrant coefficient must be positive");
    }
    ga.validate();
    exposure.validate();
}

// --- config text ---------------------------------------------------------------------------

namespace {

bool parse_flag(const std::string& v, std::size_t line)
{
    const auto l = to_lower(v);
    if (l == "on" || l == "true" || l == "yes" || l == "1") {
        return true;
    }
    if (l == "off" || l == "false" || l == "no" || l == "0") {
        return false;
    }
    throw ParseError(line, fmt::format("expected on/off, got '{}'", v));
}

std::string flag(bool v)
{
    return v ? "on" : "off";
}

std::size_t parse_count(const std::string& v, std::size_t line)
{
    const long n = parse_integer(v, line);
    if (n < 0) {
        throw ParseError(line, "count must not be negative");
    }
    return static_cast<std::size_t>(n);
}

std::string clock_list(const std::vector<double>& times)
{
    std::string out;
    for (std::size_t i = 0; i < times.size(); ++i) {
        out += (i == 0 ? "" : ", ") + format_clock(times[i]);
    }
    return out.empty() ? "none" : out;
}

} // namespace

EmergencyConfig parse_config(std::string_view text)
{
    EmergencyConfig cfg;
    SectionedTextOptions opts;
    opts.split_on_commas = true;
    for (const auto& ln : read_sectioned_text(text, opts)) {
        std::vector<std::string> tok;
        for (const auto& t : ln.tokens) {
            std::size_t start = 0;
            while (start <= t.size()) {
                const auto eq = t.find('=', start);
                const auto piece = t.substr(start, eq == std::string::npos ? std::string::npos : eq - start);
                if (!piece.empty()) {
                    tok.push_back(piece);
                }
                if (eq == std::string::npos) {
                    break;
                }
                start = eq + 1;
            }
        }
        if (tok.size() < 2) {
            throw ParseError(ln.line, "expected 'key = value'");
        }
        const auto key = to_lower(tok[0]);
        const auto& v = tok[1];
        const auto line = ln.line;
        const auto unknown = [&] {
            throw ParseError(line, fmt::format("unknown key '{}' in [{}]", tok[0], ln.section));
        };
        if (ln.section == "RUN") {
            if (key == "response_delay_h") {
                cfg.response_delay_s = parse_number(v, line) * kSecondsPerHour;
            } else if (key == "horizon_h") {
                cfg.horizon_s = parse_number(v, line) * kSecondsPerHour;
            } else if (key == "report_until") {
                cfg.report_until_s = parse_clock(v, line);
            } else if (key == "execution_times") {
                cfg.execution_times_s.clear();
                if (to_lower(v) != "none") {
                    for (std::size_t i = 1; i < tok.size(); ++i) {
                        cfg.execution_times_s.push_back(parse_clock(tok[i], line));
                    }
                }
            } else if (key == "clock") {
                const auto m = to_lower(v);
                if (m != "budget" && m != "wall") {
                    throw ParseError(line, "clock must be budget or wall");
                }
                cfg.clock = m == "budget" ? ClockMode::Budget : ClockMode::Wall;
            } else if (key == "generations_per_hour") {
                cfg.generations_per_hour = parse_count(v, line);
            } else if (key == "wall_speedup") {
                cfg.wall_speedup = parse_number(v, line);
            } else if (key == "quality_step_s") {
                cfg.quality_step_s = parse_number(v, line);
            } else if (key == "impact_time") {
                cfg.impact_time_s = parse_clock(v, line);
            } else if (key == "threads") {
                cfg.threads = parse_count(v, line);
            } else if (key == "strategy") {
                const auto s = strategy_from_string(v);
                if (!s) {
                    throw ParseError(line, "strategy must be flush, dye or both");
                }
                cfg.strategy = *s;
            } else if (key == "slots") {
                cfg.slots_per_action = parse_count(v, line);
            } else if (key == "scenario_updates") {
                cfg.flags.scenario_updates = parse_flag(v, line);
            } else if (key == "execution_feedback") {
                cfg.flags.execution_feedback = parse_flag(v, line);
            } else if (key == "consumer_reactions") {
                cfg.flags.consumer_reactions = parse_flag(v, line);
            } else {
                unknown();
            }
        } else if (ln.section == "GA") {
            if (key == "population") {
                cfg.ga.population = parse_count(v, line);
            } else if (key == "crossover_rate") {
                cfg.ga.crossover_rate = parse_number(v, line);
            } else if (key == "mutation_rate") {
                cfg.ga.mutation_rate = parse_number(v, line);
            } else if (key == "sbx_eta") {
                cfg.ga.sbx_eta = parse_number(v, line);
            } else if (key == "mutation_eta") {
                cfg.ga.mutation_eta = parse_number(v, line);
            } else if (key == "metric") {
                const auto m = diversity_metric_from_string(v);
                if (!m) {
                    throw ParseError(line, "metric must be dnn, ads or dbs");
                }
                cfg.ga.metric = *m;
            } else if (key == "seed") {
                cfg.ga.seed = static_cast<std::uint64_t>(parse_count(v, line));
            } else {
                unknown();
            }
        } else if (ln.section == "EXPOSURE") {
            if (key == "daily_volume_l") {
                cfg.exposure.daily_volume_l = parse_number(v, line);
            } else if (key == "ingestion_times") {
                cfg.exposure.ingestion_times_s.clear();
                for (std::size_t i = 1; i < tok.size(); ++i) {
                    cfg.exposure.ingestion_times_s.push_back(parse_clock(tok[i], line));
                }
            } else if (key == "toxic_dose") {
                if (auto level = toxic_dose_level_from_string(to_lower(v))) {
                    cfg.exposure.toxic_dose_mg = toxic_dose_mg(*level);
                } else {
                    cfg.exposure.toxic_dose_mg = parse_number(v, line);
                }
            } else if (key == "reaction_delay_h") {
                cfg.exposure.reaction_delay_s = parse_number(v, line) * kSecondsPerHour;
            } else if (key == "dye_alert_mgl") {
                cfg.exposure.dye_alert_mgl = parse_number(v, line);
            } else {
                unknown();
            }
        } else if (ln.section == "ACTIONS") {
            if (key == "flush_duration_h") {
                cfg.actions.flush_duration_s = parse_number(v, line) * kSecondsPerHour;
            } else if (key == "hydrant_coefficient") {
                cfg.actions.hydrant_coefficient_gpm_psi = parse_number(v, line);
            } else if (key == "dye_mass_kg") {
                cfg.actions.dye_mass_kg = parse_number(v, line);
            } else if (key == "dye_duration_h") {
                cfg.actions.dye_duration_s = parse_number(v, line) * kSecondsPerHour;
            } else {
                unknown();
            }
        } else {
            throw ParseError(line, fmt::format("unexpected section [{}] in run config", ln.section));
        }
    }
    cfg.validate();
    return cfg;
}

std::string serialize_config(const EmergencyConfig& c)
{
    const auto n = format_number;
    std::string out;
    out += "[RUN]\n";
    out += fmt::format("response_delay_h = {}\n", n(c.response_delay_s / kSecondsPerHour));
    out += fmt::format("horizon_h = {}\n", n(c.horizon_s / kSecondsPerHour));
    out += fmt::format("report_until = {}\n", format_clock(c.report_until_s));
    out += fmt::format("execution_times = {}\n", clock_list(c.execution_times_s));
    out += fmt::format("clock = {}\n", to_string(c.clock));
    out += fmt::format("generations_per_hour = {}\n", c.generations_per_hour);
    out += fmt::format("wall_speedup = {}\n", n(c.wall_speedup));
    out += fmt::format("quality_step_s = {}\n", n(c.quality_step_s));
    out += fmt::format("impact_time = {}\n", format_clock(c.impact_time_s));
    out += fmt::format("threads = {}\n", c.threads);
    out += fmt::format("strategy = {}\n", to_string(c.strategy));
    out += fmt::format("slots = {}\n", c.slots_per_action);
    out += fmt::format("scenario_updates = {}\n", flag(c.flags.scenario_updates));
    out += fmt::format("execution_feedback = {}\n", flag(c.flags.execution_feedback));
    out += fmt::format("consumer_reactions = {}\n", flag(c.flags.consumer_reactions));
    out += "\n[GA]\n";
    out += fmt::format("population = {}\n", c.ga.population);
    out += fmt::format("crossover_rate = {}\n", n(c.ga.crossover_rate));
    out += fmt::format("mutation_rate = {}\n", n(c.ga.mutation_rate));
    out += fmt::format("sbx_eta = {}\n", n(c.ga.sbx_eta));
    out += fmt::format("mutation_eta = {}\n", n(c.ga.mutation_eta));
    out += fmt::format("metric = {}\n", to_string(c.ga.metric));
    out += fmt::format("seed = {}\n", c.ga.seed);
    out += "\n[EXPOSURE]\n";
    out += fmt::format("daily_volume_l = {}\n", n(c.exposure.daily_volume_l));
    out += fmt::format("ingestion_times = {}\n", clock_list(c.exposure.ingestion_times_s));
    out += fmt::format("toxic_dose = {}\n", n(c.exposure.toxic_dose_mg));
    out += fmt::format("reaction_delay_h = {}\n", n(c.exposure.reaction_delay_s / kSecondsPerHour));
    out += fmt::format("dye_alert_mgl = {}\n", n(c.exposure.dye_alert_mgl));
    out += "\n[ACTIONS]\n";
    out += fmt::format("flush_duration_h = {}\n", n(c.actions.flush_duration_s / kSecondsPerHour));
    out += fmt::format("hydrant_coefficient = {}\n", n(c.actions.hydrant_coefficient_gpm_psi));
    out += fmt::format("dye_mass_kg = {}\n", n(c.actions.dye_mass_kg));
    out += fmt::format("dye_duration_h = {}\n", n(c.actions.dye_duration_s / kSecondsPerHour));
    return out;
}

void execute_protocol(std::vector<ResponseAction>& history, const ExecutedProtocol& protocol,
                      const ActionSettings& settings)
{
    const auto actions = protocol_actions(protocol.flush_nodes, protocol.dye_nodes, protocol.time_s, settings);
    history.insert(history.end(), actions.begin(), actions.end());
}

// --- EpochFitness --------------------------------------------------------------------------

EpochFitness::EpochFitness(const Network& net, const SimulationSettings& settings, ProtocolShape shape,
                           const ActionSettings& actions, std::size_t threads)
    : net_(&net), shape_(shape), action_settings_(actions)
{
    for (std::size_t i = 0; i < std::max<std::size_t>(threads, 1); ++i) {
        sims_.push_back(std::make_unique<EmergencySimulator>(net, settings));
    }
}

void EpochFitness::begin_epoch(double t_now, const ContaminationScenario& perceived,
                               std::vector<ResponseAction> executed)
{
    auto& sim = *sims_.front();
    t_now_ = t_now;
    perceived_ = perceived;
    executed_ = std::move(executed);
    prefix_ = sim.initial_state();
    sim.advance(prefix_, t_now, &perceived_, executed_);
    no_response_ = sim.projected_utim(sim.initial_state(), &perceived_, {});
    memo_.clear();
}

std::vector<ResponseAction> EpochFitness::actions_for(const std::vector<std::size_t>& protocol) const
{
    if (protocol.size() != shape_.slots()) {
        throw std::invalid_argument("protocol slot count does not match the run's shape");
    }
    std::vector<ResponseAction> actions = executed_;
    const auto split = protocol.begin() + static_cast<std::ptrdiff_t>(shape_.flush_slots);
    const std::vector<std::size_t> flush(protocol.begin(), split);
    const std::vector<std::size_t> dye(split, protocol.end());
    const auto candidate = protocol_actions(flush, dye, t_now_, action_settings_);
    actions.insert(actions.end(), candidate.begin(), candidate.end());
    return actions;
}

std::vector<double> EpochFitness::evaluate(std::span<const std::vector<std::size_t>> protocols)
{
    std::vector<double> out(protocols.size(), 0.0);
    std::vector<const std::vector<std::size_t>*> todo;
    for (const auto& p : protocols) {
        if (!memo_.count(p)) {
            memo_.emplace(p, std::numeric_limits<double>::quiet_NaN());
            todo.push_back(&p);
        }
    }
    std::vector<double> values(todo.size(), 0.0);
    const std::size_t workers = std::min(sims_.size(), std::max<std::size_t>(todo.size(), 1));
    auto work = [&](std::size_t w) {
        for (std::size_t i = w; i < todo.size(); i += workers) {
            values[i] = sims_[w]->projected_utim(prefix_, &perceived_, actions_for(*todo[i]));
        }
    };
    if (workers <= 1) {
        work(0);
    } else {
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        for (std::size_t w = 1; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    work(w);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        try {
            work(0);
        } catch (...) {
            errors[0] = std::current_exception();
        }
        for (auto& t : pool) {
            t.join();
        }
        for (auto& e : errors) {
            if (e) {
                for (auto* p : todo) {
                    memo_.erase(*p);
                }
                std::rethrow_exception(e);
            }
        }
    }
    for (std::size_t i = 0; i < todo.size(); ++i) {
        memo_[*todo[i]] = values[i];
    }
    evaluations_ += todo.size();
    memo_hits_ += protocols.size() - todo.size();
    for (std::size_t i = 0; i < protocols.size(); ++i) {
        out[i] = memo_.at(protocols[i]);
    }
    return out;
}

SimulationState EpochFitness::projected_state(const std::vector<std::size_t>& protocol)
{
    return sims_.front()->projected_state(prefix_, &perceived_, actions_for(protocol));
}

// --- EmergencyRun --------------------------------------------------------------------------

namespace {

ojson scenario_json(const ContaminationScenario& s)
{
    return {{"node", s.node},
            {"load_kg", s.load_kg},
            {"demand_multiplier", s.demand_multiplier},
            {"start", format_clock(s.start_s)},
            {"duration_h", s.duration_s / kSecondsPerHour}};
}

ojson node_ids(const Network& net, const std::vector<std::size_t>& nodes)
{
    auto arr = ojson::array();
    for (auto n : nodes) {
        arr.push_back(net.node_id(n));
    }
    return arr;
}

} // namespace

EmergencyRun::EmergencyRun(const Network& net, PerceivedTimeline timeline, EmergencyConfig config)
    : net_(&net),
      timeline_(std::move(timeline)),
      config_(std::move(config)),
      fitness_(net, config_.simulation_settings(), config_.shape(), config_.actions, config_.threads)
{
    config_.validate();
    timeline_.validate(net);
    response_start_ = timeline_.entries().front().scenario.start_s + config_.response_delay_s;
    if (!(response_start_ < config_.horizon_s)) {
        throw ValidationError("config", "response would start after the horizon");
    }
    if (timeline_.entries().front().effective_from_s > response_start_ + kTimeEps) {
        throw ValidationError("timeline", "the first perceived scenario must be known by the response start");
    }
    sim_time_ = response_start_;
    epoch_start_ = response_start_;
}

void EmergencyRun::schedule_from_config()
{
    if (config_.flags.scenario_updates) {
        for (const auto& e : timeline_.entries()) {
            if (e.effective_from_s > response_start_ + kTimeEps) {
                PendingCommand c;
                c.kind = PendingCommand::Kind::ScenarioUpdate;
                c.at_s = e.effective_from_s;
                c.scenario = e.scenario;
                queue(std::move(c));
            }
        }
    }
    if (config_.flags.execution_feedback) {
        for (double t : config_.execution_times_s) {
            PendingCommand c;
            c.kind = PendingCommand::Kind::Execute;
            c.at_s = t;
            queue(std::move(c));
        }
    }
}

void EmergencyRun::queue(PendingCommand command)
{
    if (finished_) {
        throw std::logic_error("run already finished");
    }
    if (command.at_s) {
        if (*command.at_s < sim_time_ - kTimeEps) {
            throw ValidationError("at", fmt::format("command time {} is in the past (sim time {})",
                                                    format_clock(*command.at_s), format_clock(sim_time_)));
        }
        if (*command.at_s >= config_.horizon_s) {
            throw ValidationError("at", "command time is beyond the horizon");
        }
    }
    if (command.kind == PendingCommand::Kind::ScenarioUpdate) {
        command.scenario.validate(*net_);
    } else if (command.protocol) {
        if (command.protocol->size() != config_.shape().slots()) {
            throw ValidationError("protocol", fmt::format("protocol needs {} nodes", config_.shape().slots()));
        }
        for (auto n : *command.protocol) {
            if (n >= net_->node_count() || !net_->is_intermediate(n)) {
                throw ValidationError(n < net_->node_count() ? net_->node_id(n) : "protocol",
                                      "protocol nodes must be intermediate nodes");
            }
        }
    }
    pending_.push_back(std::move(command));
}

void EmergencyRun::emit(std::string kind, std::string payload)
{
    events_.push_back({events_.size(), sim_time_, std::move(kind), std::move(payload)});
}

void EmergencyRun::start()
{
    if (started_) {
        return;
    }
    started_ = true;
    perceived_ = timeline_.perceived_at(response_start_);
    applied_.append({response_start_, perceived_});
    ga_ = std::make_unique<DynamicNsga2>(*net_, config_.shape(), config_.ga);
    ojson p{{"response_start", format_clock(response_start_)},
            {"perceived", scenario_json(perceived_)},
            {"metric", to_string(config_.ga.metric)},
            {"strategy", to_string(config_.strategy)},
            {"seed", config_.ga.seed}};
    emit("start", p.dump());
    apply_due_commands(response_start_);
    begin_epoch(response_start_);
    ga_->initialize(fitness_);
    record_sample();
}

double EmergencyRun::next_generation_time() const
{
    if (finished_) {
        return std::numeric_limits<double>::infinity();
    }
    if (!started_) {
        return response_start_;
    }
    return response_start_ + static_cast<double>(generation_ + 1) * kSecondsPerHour /
                                 static_cast<double>(config_.generations_per_hour);
}

double EmergencyRun::next_boundary_after(double t) const
{
    const double step = kSecondsPerHour;
    double b = (std::floor(t / step + kTimeEps) + 1.0) * step;
    for (const auto& c : pending_) {
        if (c.at_s && *c.at_s > t + kTimeEps) {
            b = std::min(b, *c.at_s);
        }
    }
    return b < config_.horizon_s - kTimeEps ? b : std::numeric_limits<double>::infinity();
}

void EmergencyRun::apply_due_commands(double b)
{
    std::vector<PendingCommand> due;
    std::vector<PendingCommand> later;
    for (auto& c : pending_) {
        if (!c.at_s || *c.at_s <= b + kTimeEps) {
            due.push_back(std::move(c));
        } else {
            later.push_back(std::move(c));
        }
    }
    pending_ = std::move(later);
    const double saved = sim_time_;
    sim_time_ = b;
    // executions first: the protocol executed is the incumbent of the epoch that just ended
    for (const auto& c : due) {
        if (c.kind != PendingCommand::Kind::Execute) {
            continue;
        }
        if (b < response_start_ - kTimeEps) {
            emit("warning", ojson{{"message", "execution before the response start ignored"}}.dump());
            continue;
        }
        std::vector<std::size_t> nodes;
        if (c.protocol) {
            nodes = *c.protocol;
        } else if (ga_ && !ga_->population().empty()) {
            nodes = ga_->incumbent().nodes;
        } else {
            emit("warning", ojson{{"message", "no incumbent to execute yet"}}.dump());
            continue;
        }
        ExecutedProtocol ex;
        ex.time_s = b;
        ex.epoch = epochs_.size();
        const auto split = nodes.begin() + static_cast<std::ptrdiff_t>(config_.shape().flush_slots);
        ex.flush_nodes.assign(nodes.begin(), split);
        ex.dye_nodes.assign(split, nodes.end());
        execute_protocol(history_, ex, config_.actions);
        executed_protocols_.push_back(ex);
        emit("execution", ojson{{"flush", node_ids(*net_, ex.flush_nodes)},
                                {"dye", node_ids(*net_, ex.dye_nodes)},
                                {"explicit", c.protocol.has_value()}}
                              .dump());
        if (b >= fitness_.prefix().time_s && b >= config_.exposure.ingestion_times_s.back() - kTimeEps) {
            emit("warning", ojson{{"message", "execution after the last ingestion event cannot change UTIM"}}.dump());
        }
    }
    for (const auto& c : due) {
        if (c.kind != PendingCommand::Kind::ScenarioUpdate) {
            continue;
        }
        perceived_ = c.scenario;
        if (b > applied_.entries().back().effective_from_s + kTimeEps) {
            applied_.append({b, perceived_});
        }
        emit("scenario_update", ojson{{"perceived", scenario_json(perceived_)}}.dump());
    }
    sim_time_ = saved;
}

void EmergencyRun::begin_epoch(double t)
{
    if (!epochs_.empty()) {
        auto& last = epochs_.back();
        last.incumbent_nodes = ga_->incumbent().nodes;
        last.incumbent_utim_g = ga_->incumbent().utim;
        if (!impact_ && t > config_.impact_time_s + kTimeEps) {
            impact_ = current_impact();
        }
    }
    epoch_start_ = t;
    fitness_.begin_epoch(t, perceived_, history_);
    EpochRecord rec;
    rec.index = epochs_.size();
    rec.start_s = t;
    rec.perceived = perceived_;
    rec.no_response_utim_g = fitness_.no_response_utim();
    epochs_.push_back(rec);
    const double saved = sim_time_;
    sim_time_ = t;
    emit("epoch", ojson{{"index", rec.index},
                        {"start", format_clock(t)},
                        {"no_response_utim_g", rec.no_response_utim_g},
                        {"perceived", scenario_json(perceived_)}}
                      .dump());
    sim_time_ = saved;
    if (ga_ && !ga_->population().empty()) {
        ga_->reevaluate(fitness_);
    }
}

void EmergencyRun::record_sample()
{
    UtimSample s;
    s.sim_time_s = sim_time_;
    s.incumbent_utim_g = ga_->incumbent().utim;
    s.no_response_utim_g = fitness_.no_response_utim();
    s.generation = generation_;
    s.epoch = epochs_.size() - 1;
    series_.push_back(s);
    emit("sample", ojson{{"generation", s.generation},
                         {"epoch", s.epoch},
                         {"incumbent_utim_g", s.incumbent_utim_g},
                         {"no_response_utim_g", s.no_response_utim_g},
                         {"incumbent", node_ids(*net_, ga_->incumbent().nodes)}}
                       .dump());
}

void EmergencyRun::set_wall_clock(std::function<double()> seconds_since_start)
{
    wall_clock_ = std::move(seconds_since_start);
}

void EmergencyRun::step_generation()
{
    if (!started_) {
        start();
        return;
    }
    if (finished_) {
        return;
    }
    double t = next_generation_time();
    if (config_.clock == ClockMode::Wall && wall_clock_) {
        t = std::max(sim_time_, response_start_ + wall_clock_() * config_.wall_speedup);
    }
    if (t > config_.horizon_s + kTimeEps) {
        finish();
        return;
    }
    for (double b = next_boundary_after(epoch_start_); b <= t + kTimeEps; b = next_boundary_after(epoch_start_)) {
        apply_due_commands(b);
        begin_epoch(b);
    }
    sim_time_ = t;
    ga_->step(fitness_);
    ++generation_;
    record_sample();
}

void EmergencyRun::finish()
{
    if (finished_) {
        return;
    }
    if (!epochs_.empty()) {
        auto& last = epochs_.back();
        last.incumbent_nodes = ga_->incumbent().nodes;
        last.incumbent_utim_g = ga_->incumbent().utim;
    }
    if (!impact_) {
        impact_ = current_impact();
    }
    finished_ = true;
    emit("finish", ojson{{"generations", generation_}, {"epochs", epochs_.size()}}.dump());
}

void EmergencyRun::advance_until(double until_s)
{
    if (until_s >= config_.horizon_s - kTimeEps) {
        run_to_end();
        return;
    }
    if (!started_) {
        start();
    }
    while (!finished_ && next_generation_time() < until_s - kTimeEps) {
        step_generation();
    }
    if (!finished_ && next_generation_time() > config_.horizon_s + kTimeEps) {
        finish();
    }
}

void EmergencyRun::run_to_end()
{
    if (!started_) {
        start();
    }
    while (!finished_) {
        step_generation();
    }
}

ImpactMap EmergencyRun::current_impact()
{
    ImpactMap map;
    map.time_s = epoch_start_;
    const auto st = fitness_.projected_state(ga_->incumbent().nodes);
    const auto per_node = ingested_by_node(*net_, st);
    for (const auto& c : st.cohorts) {
        map.ingested_g.emplace_back(net_->node_id(c.node), per_node[c.node]);
    }
    return map;
}

RunResult run_emergency(const Network& net, const PerceivedTimeline& timeline, const EmergencyConfig& config)
{
    EmergencyRun run(net, timeline, config);
    run.schedule_from_config();
    if (config.clock == ClockMode::Wall) {
        const auto t0 = std::chrono::steady_clock::now();
        run.set_wall_clock([t0] {
            return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        });
    }
    run.run_to_end();
    return {run.series(), run.events(), run.epochs(), run.executions(), run.impact_map()};
}

double confined_area(std::span<const UtimSample> series, double t0_s, double t1_s)
{
    double area = 0.0;
    const UtimSample* prev = nullptr;
    for (const auto& s : series) {
        if (s.sim_time_s < t0_s - kTimeEps || s.sim_time_s > t1_s + kTimeEps) {
            continue;
        }
        if (prev != nullptr) {
            const double g0 = prev->no_response_utim_g - prev->incumbent_utim_g;
            const double g1 = s.no_response_utim_g - s.incumbent_utim_g;
            area += 0.5 * (g0 + g1) * (s.sim_time_s - prev->sim_time_s) / kSecondsPerHour;
        }
        prev = &s;
    }
    return area;
}

// --- CSV -----------------------------------------------------------------------------------

namespace {

std::string csv_quote(const std::string& s)
{
    std::string out = "\"";
    for (char c : s) {
        out += c;
        if (c == '"') {
            out += '"';
        }
    }
    return out + "\"";
}

} // namespace

std::string utim_series_csv(std::span<const UtimSample> series, double report_until_s)
{
    std::string out = "sim_time_s,incumbent_utim_g,no_response_utim_g,generation,epoch\n";
    for (const auto& s : series) {
        if (s.sim_time_s > report_until_s + kTimeEps) {
            break;
        }
        out += fmt::format("{},{},{},{},{}\n", format_number(s.sim_time_s), format_number(s.incumbent_utim_g),
                           format_number(s.no_response_utim_g), s.generation, s.epoch);
    }
    return out;
}

std::string events_csv(std::span<const RunEvent> events)
{
    std::string out = "time,kind,payload\n";
    for (const auto& e : events) {
        if (e.kind == "sample") {
            continue;
        }
        out += fmt::format("{},{},{}\n", format_number(e.sim_time_s), e.kind, csv_quote(e.payload));
    }
    return out;
}

std::string protocols_csv(const Network& net, std::span<const EpochRecord> epochs, ProtocolShape shape)
{
    std::string out = "epoch,slot,kind,node_id,x_m,y_m\n";
    for (const auto& e : epochs) {
        for (std::size_t k = 0; k < e.incumbent_nodes.size(); ++k) {
            const auto node = e.incumbent_nodes[k];
            const auto at = net.node_coordinate(node);
            out += fmt::format("{},{},{},{},{},{}\n", e.index, k, k < shape.flush_slots ? "flush" : "dye",
                               net.node_id(node), format_number(at.x), format_number(at.y));
        }
    }
    return out;
}

std::string impact_map_csv(const ImpactMap& map)
{
    std::string out = "node_id,projected_ingested_g\n";
    for (const auto& [id, g] : map.ingested_g) {
        out += fmt::format("{},{}\n", id, format_number(g));
    }
    return out;
}

void write_run_outputs(const std::string& dir, const Network& net, const RunResult& result,
                       const EmergencyConfig& config)
{
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);
    write_file((base / "utim_timeseries.csv").string(), utim_series_csv(result.series, config.report_until_s));
    write_file((base / "events.csv").string(), events_csv(result.events));
    write_file((base / "protocols.csv").string(), protocols_csv(net, result.epochs, config.shape()));
    write_file((base / "impact_map.csv").string(), impact_map_csv(result.impact.value_or(ImpactMap{})));
}

} // namespace wdsguard
