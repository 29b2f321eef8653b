#include "wdsguard/service.hpp"

#include "wdsguard/text_format.hpp"

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <condition_variable>

namespace wdsguard {

namespace {

using ojson = nlohmann::ordered_json;

struct ApiError {
    int status;
    std::string reason; // machine-readable
    std::string message;
    std::string entity;
};

ApiResponse reply(int status, const ojson& body)
{
    return {status, body.dump()};
}

ApiResponse error_reply(const ApiError& e)
{
    ojson body{{"api", kApiVersion}, {"error", e.reason}, {"message", e.message}};
    if (!e.entity.empty()) {
        body["entity"] = e.entity;
    }
    return reply(e.status, body);
}

ojson parse_body(const std::string& body)
{
    if (body.empty()) {
        return ojson::object();
    }
    try {
        auto j = ojson::parse(body);
        if (!j.is_object()) {
            throw ApiError{400, "bad_request", "body must be a JSON object", ""};
        }
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ApiError{400, "bad_json", e.what(), ""};
    }
}

/// Accepts "HH:MM[:SS]" or a number of seconds.
double time_field(const ojson& j, const char* key)
{
    const auto& v = j.at(key);
    if (v.is_number()) {
        return v.get<double>();
    }
    if (v.is_string()) {
        return parse_clock(v.get<std::string>(), 0);
    }
    throw ApiError{400, "bad_request", fmt::format("'{}' must be a clock string or seconds", key), key};
}

std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h = (h ^ c) * 1099511628211ULL;
    }
    return h;
}

ojson sample_json(const UtimSample& s)
{
    return {{"sim_time_s", s.sim_time_s},
            {"incumbent_utim_g", s.incumbent_utim_g},
            {"no_response_utim_g", s.no_response_utim_g},
            {"generation", s.generation},
            {"epoch", s.epoch}};
}

ojson event_json(const RunEvent& e)
{
    return {{"seq", e.seq}, {"sim_time_s", e.sim_time_s}, {"kind", e.kind}, {"payload", ojson::parse(e.payload)}};
}

ojson scenario_json(const ContaminationScenario& s)
{
    return {{"node", s.node},
            {"load_kg", s.load_kg},
            {"demand_multiplier", s.demand_multiplier},
            {"start", format_clock(s.start_s)},
            {"duration_h", s.duration_s / kSecondsPerHour}};
}

ojson slots_json(const Network& net, const std::vector<std::size_t>& nodes, ProtocolShape shape)
{
    auto arr = ojson::array();
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const auto at = net.node_coordinate(nodes[k]);
        arr.push_back({{"slot", k},
                       {"kind", k < shape.flush_slots ? "flush" : "dye"},
                       {"node", net.node_id(nodes[k])},
                       {"x_m", at.x},
                       {"y_m", at.y}});
    }
    return arr;
}

std::vector<std::string> split_path(const std::string& path)
{
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < path.size()) {
        const auto j = path.find('/', i);
        const auto piece = path.substr(i, j == std::string::npos ? std::string::npos : j - i);
        if (!piece.empty()) {
            parts.push_back(piece);
        }
        if (j == std::string::npos) {
            break;
        }
        i = j + 1;
    }
    return parts;
}

} // namespace

struct ServiceHub::Session {
    std::string id;
    std::unique_ptr<Network> net;
    std::unique_ptr<EmergencyRun> run;
    std::string digest;
    std::mutex mutex;
    std::condition_variable changed;
    std::thread worker;
    std::atomic<bool> stop{false};
};

ServiceHub::ServiceHub(ServiceDefaults defaults) : defaults_(std::move(defaults)) {}

ServiceHub::~ServiceHub()
{
    shutdown();
}

void ServiceHub::shutdown()
{
    std::map<std::string, std::shared_ptr<Session>> sessions;
    {
        std::lock_guard lock(mutex_);
        sessions = sessions_;
    }
    for (auto& [id, s] : sessions) {
        s->stop = true;
        s->changed.notify_all();
        if (s->worker.joinable()) {
            s->worker.join();
        }
    }
}

std::shared_ptr<ServiceHub::Session> ServiceHub::find(const std::string& id)
{
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) {
        throw ApiError{404, "unknown_session", fmt::format("no session '{}'", id), id};
    }
    return it->second;
}

ApiResponse ServiceHub::create_session(const std::string& body)
{
    const auto j = parse_body(body);
    const auto text = [&](const char* key, const std::string& fallback) {
        if (j.contains(key)) {
            return j.at(key).get<std::string>();
        }
        if (fallback.empty()) {
            throw ApiError{400, "missing_input", fmt::format("'{}' is required (no server default)", key), key};
        }
        return fallback;
    };
    auto s = std::make_shared<Session>();
    const auto network_text = text("network", defaults_.network_text);
    const auto format = j.value("network_format", std::string("native"));
    if (format == "inp") {
        s->net = std::make_unique<Network>(parse_inp_subset(network_text).network);
    } else if (format == "native") {
        s->net = std::make_unique<Network>(parse_native(network_text));
    } else {
        throw ApiError{400, "bad_request", "network_format must be native or inp", "network_format"};
    }
    auto timeline = parse_timeline(text("timeline", defaults_.timeline_text)).timeline;
    auto config = parse_config(text("config", defaults_.config_text));
    if (j.contains("clock")) {
        const auto clock = j.at("clock").get<std::string>();
        if (clock != "budget" && clock != "wall") {
            throw ApiError{400, "bad_request", "clock must be budget or wall", "clock"};
        }
        config.clock = clock == "budget" ? ClockMode::Budget : ClockMode::Wall;
    }
    if (j.contains("seed")) {
        config.ga.seed = j.at("seed").get<std::uint64_t>();
    }
    s->digest = fmt::format("{:016x}", fnv1a(serialize_native(*s->net)));
    s->run = std::make_unique<EmergencyRun>(*s->net, std::move(timeline), config);
    if (j.value("schedule", false)) {
        s->run->schedule_from_config();
    }
    s->run->start();
    {
        std::lock_guard lock(mutex_);
        s->id = fmt::format("s{}", next_id_++);
        sessions_[s->id] = s;
    }
    if (config.clock == ClockMode::Wall) {
        start_wall_worker(s);
    }
    return reply(201, {{"api", kApiVersion},
                       {"session_id", s->id},
                       {"clock", to_string(config.clock)},
                       {"response_start_s", s->run->response_start()}});
}

void ServiceHub::start_wall_worker(const std::shared_ptr<Session>& s)
{
    const auto t0 = std::chrono::steady_clock::now();
    s->run->set_wall_clock(
        [t0] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); });
    s->worker = std::thread([s] {
        while (!s->stop) {
            {
                std::lock_guard lock(s->mutex);
                if (s->run->finished()) {
                    break;
                }
                s->run->step_generation();
            }
            s->changed.notify_all();
        }
        s->changed.notify_all();
    });
}

ApiResponse ServiceHub::handle(const ApiRequest& req)
{
    try {
        const auto parts = split_path(req.path);
        if (parts.empty() || parts[0] != "v1") {
            throw ApiError{404, "not_found", "unknown path", req.path};
        }
        if (parts.size() == 2 && parts[1] == "health") {
            return reply(200, {{"api", kApiVersion}, {"ok", true}});
        }
        if (parts.size() < 2 || parts[1] != "sessions") {
            throw ApiError{404, "not_found", "unknown path", req.path};
        }
        if (parts.size() == 2) {
            if (req.method == "POST") {
                return create_session(req.body);
            }
            if (req.method == "GET") {
                auto ids = ojson::array();
                std::lock_guard lock(mutex_);
                for (const auto& [id, s] : sessions_) {
                    ids.push_back(id);
                }
                return reply(200, {{"api", kApiVersion}, {"sessions", ids}});
            }
            throw ApiError{405, "method_not_allowed", "use GET or POST", ""};
        }

        auto s = find(parts[2]);
        const std::string what = parts.size() > 3 ? parts[3] : "state";
        const auto& net = *s->net;
        std::unique_lock lock(s->mutex);
        auto& run = *s->run;
        const auto shape = run.config().shape();
        const auto need = [&](const char* method) {
            if (req.method != method) {
                throw ApiError{405, "method_not_allowed", fmt::format("use {}", method), what};
            }
        };
        const auto require_active = [&] {
            if (run.finished()) {
                throw ApiError{409, "run_finished", "the run has reached its horizon", s->id};
            }
        };

        if (what == "state") {
            need("GET");
            const auto& inc = run.optimizer().incumbent();
            const auto& epoch = run.epochs().back();
            auto tail = ojson::array();
            const auto& series = run.series();
            for (std::size_t i = series.size() > 20 ? series.size() - 20 : 0; i < series.size(); ++i) {
                tail.push_back(sample_json(series[i]));
            }
            return reply(200, {{"api", kApiVersion},
                               {"session_id", s->id},
                               {"clock", to_string(run.config().clock)},
                               {"sim_time_s", run.sim_time()},
                               {"finished", run.finished()},
                               {"generation", run.optimizer().generation()},
                               {"epoch",
                                {{"index", epoch.index},
                                 {"start_s", epoch.start_s},
                                 {"perceived", scenario_json(epoch.perceived)},
                                 {"no_response_utim_g", epoch.no_response_utim_g}}},
                               {"incumbent", {{"utim_g", inc.utim}, {"slots", slots_json(net, inc.nodes, shape)}}},
                               {"no_response_utim_g", run.no_response_utim()},
                               {"executions", run.executions().size()},
                               {"series_tail", tail},
                               {"events", run.events().size()},
                               {"network",
                                {{"digest", s->digest},
                                 {"nodes", net.node_count()},
                                 {"links", net.link_count()},
                                 {"intermediate_nodes", net.intermediate_nodes().size()}}}});
        }
        if (what == "network") {
            need("GET");
            auto nodes = ojson::array();
            for (std::size_t n = 0; n < net.node_count(); ++n) {
                const auto at = net.node_coordinate(n);
                const auto kind = net.node_kind(n);
                nodes.push_back({{"id", net.node_id(n)},
                                 {"kind", kind == NodeKind::Junction    ? "junction"
                                          : kind == NodeKind::Reservoir ? "reservoir"
                                                                        : "tank"},
                                 {"x_m", at.x},
                                 {"y_m", at.y},
                                 {"intermediate", net.is_intermediate(n)},
                                 {"population", n < net.junction_count() ? net.junctions()[n].population : 0.0}});
            }
            auto links = ojson::array();
            for (std::size_t l = 0; l < net.link_count(); ++l) {
                links.push_back({{"id", net.link_id(l)},
                                 {"from", net.node_id(net.link_from(l))},
                                 {"to", net.node_id(net.link_to(l))},
                                 {"pump", net.is_pump(l)}});
            }
            return reply(200, {{"api", kApiVersion}, {"digest", s->digest}, {"nodes", nodes}, {"links", links}});
        }
        if (what == "series") {
            need("GET");
            std::size_t since = 0;
            if (auto it = req.query.find("since"); it != req.query.end()) {
                since = static_cast<std::size_t>(parse_integer(it->second, 0));
            }
            auto arr = ojson::array();
            for (std::size_t i = since; i < run.series().size(); ++i) {
                arr.push_back(sample_json(run.series()[i]));
            }
            return reply(200, {{"api", kApiVersion}, {"since", since}, {"samples", arr}});
        }
        if (what == "impact") {
            need("GET");
            const auto map = run.current_impact();
            auto arr = ojson::array();
            for (const auto& [id, g] : map.ingested_g) {
                arr.push_back({{"node", id}, {"projected_ingested_g", g}});
            }
            return reply(200, {{"api", kApiVersion}, {"time_s", map.time_s}, {"nodes", arr}});
        }
        if (what == "events") {
            need("GET");
            std::size_t since = 0;
            if (auto it = req.query.find("since"); it != req.query.end()) {
                since = static_cast<std::size_t>(parse_integer(it->second, 0));
            }
            if (auto it = req.query.find("wait_ms"); it != req.query.end() && since >= run.events().size()) {
                const auto ms = parse_integer(it->second, 0);
                s->changed.wait_for(lock, std::chrono::milliseconds(std::clamp(ms, 0L, 30000L)),
                                    [&] { return since < run.events().size() || s->stop; });
            }
            auto arr = ojson::array();
            for (std::size_t i = since; i < run.events().size(); ++i) {
                arr.push_back(event_json(run.events()[i]));
            }
            return reply(200, {{"api", kApiVersion}, {"since", since}, {"next", run.events().size()}, {"events", arr}});
        }
        if (what == "scenario") {
            need("POST");
            require_active();
            const auto j = parse_body(req.body);
            PendingCommand c;
            c.kind = PendingCommand::Kind::ScenarioUpdate;
            try {
                c.scenario.node = j.at("node").get<std::string>();
                c.scenario.load_kg = j.at("load_kg").get<double>();
                c.scenario.demand_multiplier = j.value("demand_multiplier", 1.0);
                c.scenario.start_s = j.contains("start") ? time_field(j, "start") : 0.0;
                c.scenario.duration_s = j.at("duration_h").get<double>() * kSecondsPerHour;
                if (j.contains("at")) {
                    c.at_s = time_field(j, "at");
                }
            } catch (const nlohmann::json::exception& e) {
                throw ApiError{400, "bad_request", e.what(), "scenario"};
            }
            run.queue(c);
            return reply(202, {{"api", kApiVersion}, {"queued", "scenario_update"}, {"sim_time_s", run.sim_time()}});
        }
        if (what == "execute") {
            need("POST");
            require_active();
            const auto j = parse_body(req.body);
            PendingCommand c;
            c.kind = PendingCommand::Kind::Execute;
            if (j.contains("at")) {
                c.at_s = time_field(j, "at");
            }
            if (j.contains("protocol")) {
                std::vector<std::size_t> nodes;
                const auto& p = j.at("protocol");
                for (const char* key : {"flush", "dye"}) {
                    const auto want = std::string(key) == "flush" ? shape.flush_slots : shape.dye_slots;
                    const auto ids = p.value(key, std::vector<std::string>{});
                    if (ids.size() != want) {
                        throw ApiError{400, "validation", fmt::format("'{}' needs {} nodes", key, want), key};
                    }
                    for (const auto& id : ids) {
                        nodes.push_back(net.require_node(id));
                    }
                }
                c.protocol = std::move(nodes);
            }
            run.queue(c);
            return reply(202, {{"api", kApiVersion},
                               {"queued", c.protocol ? "execute_explicit" : "execute_incumbent"},
                               {"sim_time_s", run.sim_time()}});
        }
        if (what == "advance") {
            need("POST");
            require_active();
            if (run.config().clock != ClockMode::Budget) {
                throw ApiError{409, "wall_clock", "advance is only available in budget mode", s->id};
            }
            const auto j = parse_body(req.body);
            if (j.contains("until")) {
                run.advance_until(time_field(j, "until"));
            } else {
                run.step_generation();
            }
            lock.unlock();
            s->changed.notify_all();
            lock.lock();
            return reply(200, {{"api", kApiVersion},
                               {"sim_time_s", run.sim_time()},
                               {"generation", run.optimizer().generation()},
                               {"finished", run.finished()}});
        }
        if (what == "outputs") {
            need("GET");
            RunResult r{run.series(), run.events(), run.epochs(), run.executions(), run.impact_map()};
            return reply(200, {{"api", kApiVersion},
                               {"utim_timeseries", utim_series_csv(r.series, run.config().report_until_s)},
                               {"events", events_csv(r.events)},
                               {"protocols", protocols_csv(net, r.epochs, shape)}});
        }
        throw ApiError{404, "not_found", "unknown endpoint", what};
    } catch (const ApiError& e) {
        return error_reply(e);
    } catch (const ValidationError& e) {
        return error_reply({400, "validation", e.what(), e.entity()});
    } catch (const ParseError& e) {
        return error_reply({400, "parse", e.what(), fmt::format("line {}", e.line())});
    } catch (const std::logic_error& e) {
        return error_reply({409, "conflict", e.what(), ""});
    } catch (const std::exception& e) {
        return error_reply({500, "internal", e.what(), ""});
    }
}

void ServiceHub::mount(httplib::Server& server)
{
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
        ApiRequest r{req.method, req.path, {}, req.body};
        for (const auto& [k, v] : req.params) {
            r.query[k] = v;
        }
        const auto out = handle(r);
        res.status = out.status;
        res.set_content(out.body, "application/json");
    };
    server.Get("/v1/sessions/([^/]+)/stream", [this](const httplib::Request& req, httplib::Response& res) {
        std::shared_ptr<Session> s;
        try {
            s = find(req.matches[1]);
        } catch (const ApiError& e) {
            const auto out = error_reply(e);
            res.status = out.status;
            res.set_content(out.body, "application/json");
            return;
        }
        std::size_t since = req.has_param("since") ? std::stoul(req.get_param_value("since")) : 0;
        res.set_chunked_content_provider("text/event-stream", [s, since](std::size_t, httplib::DataSink& sink) mutable {
            std::unique_lock lock(s->mutex);
            s->changed.wait_for(lock, std::chrono::seconds(15),
                                [&] { return since < s->run->events().size() || s->stop; });
            std::string chunk;
            for (; since < s->run->events().size(); ++since) {
                chunk += fmt::format("id: {}\ndata: {}\n\n", since, event_json(s->run->events()[since]).dump());
            }
            const bool done = s->run->finished() || s->stop;
            lock.unlock();
            if (chunk.empty()) {
                chunk = ": keepalive\n\n";
            }
            if (!sink.write(chunk.data(), chunk.size())) {
                return false;
            }
            if (done) {
                sink.done();
            }
            return true;
        });
    });
    server.Get(R"(/v1/.*)", forward);
    server.Post(R"(/v1/.*)", forward);
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
}

int serve(ServiceHub& hub, const std::string& host, int port)
{
    httplib::Server server;
    hub.mount(server);
    if (!server.listen(host, port)) {
        return 2;
    }
    return 0;
}

} // namespace wdsguard
