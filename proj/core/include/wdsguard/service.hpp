#pragma once

#include "wdsguard/orchestrator.hpp"

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace wdsguard {

inline constexpr std::string_view kApiVersion = "wdsguard.v1";

/// Inputs used when a session is created without uploading its own.
struct ServiceDefaults {
    std::string network_text;  // native format
    std::string timeline_text;
    std::string config_text;
};

struct ApiRequest {
    std::string method; // GET / POST / DELETE
    std::string path;   // e.g. /v1/sessions/s1/state
    std::map<std::string, std::string> query;
    std::string body;
};

struct ApiResponse {
    int status = 200;
    std::string body; // JSON
};

/// Sessions of live emergency runs. All mutations of a run go through its session mutex, so
/// the run itself stays single-writer. Usable in-process (`handle`) or over HTTP (`mount`).
class ServiceHub {
public:
    explicit ServiceHub(ServiceDefaults defaults = {});
    ~ServiceHub();
    ServiceHub(const ServiceHub&) = delete;
    ServiceHub& operator=(const ServiceHub&) = delete;

    ApiResponse handle(const ApiRequest& request);

    /// Registers every endpoint on `server`, plus `/v1/sessions/{id}/stream` (server-sent events).
    void mount(httplib::Server& server);

    /// Stops wall-clock workers.
    void shutdown();

private:
    struct Session;
    ApiResponse create_session(const std::string& body);
    std::shared_ptr<Session> find(const std::string& id);
    void start_wall_worker(const std::shared_ptr<Session>& s);

    ServiceDefaults defaults_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::size_t next_id_ = 1;
};

/// Blocking HTTP server on host:port until the process is stopped.
int serve(ServiceHub& hub, const std::string& host, int port);

} // namespace wdsguard
