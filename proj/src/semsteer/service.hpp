#pragma once

#include <memory>
#include <string>

#include "semsteer/providers/config.hpp"
#include "semsteer/providers/transport.hpp"
#include "semsteer/steering/steering.hpp"

namespace semsteer::service {

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8080;                   // 0 => any free port
    std::string data_dir = "semsteer-data";
    std::string static_dir;            // optional UI bundle served at "/"
    providers::ProviderSettings providers;
    int workers = 2;
    steering::SteeringOptions steering;
    std::shared_ptr<providers::Transport> transport;  // null => HTTP
};

/// HTTP+JSON API over corpora, sessions, steering jobs and layouts.
///
///   POST /corpora                       {"path","format"} | {"name","documents":[{id,text,group?}]}
///   GET  /corpora/{id}
///   POST /sessions                      {"corpus","perspective_name"}
///   GET  /sessions[?corpus=name]
///   GET  /sessions/{id}                 ETag: "<revision>"
///   PUT  /sessions/{id}/groups          If-Match: <revision>; {"groups":[...]}
///   POST /sessions/{id}/steer           {"incorporation":{...},"projection":{...}} -> 202 {"job_id"}
///   GET  /jobs/{id}
///   GET  /sessions/{id}/layouts/{name}
///
/// Errors: {"error":{"code","message","detail"}} with code one of bad_request,
/// not_found, conflict, provider_failure, internal.
class Service {
public:
    explicit Service(ServiceOptions options);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds the listening socket; returns the bound port.
    int bind();
    /// Serves until stop(). Requires bind().
    void listen();
    /// bind() + listen() on a background thread; returns the bound port.
    int start();
    void stop();
    /// Blocks until every queued job has finished.
    void drain();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace semsteer::service
