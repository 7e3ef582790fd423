#pragma once

#include <memory>
#include <string>
#include <thread>

#include "retscreen/error.hpp"
#include "retscreen/service.hpp"

namespace httplib {
class Server;
}

namespace retscreen::service {

/// HTTP status used for each error kind.
int http_status(ErrorKind kind);

/// JSON API over a ScreeningService:
///   POST /studies                       multipart (sidecar + files) or JSON
///                                       {"sidecar", "images":{file: base64}} / {"sidecar", "image_dir"}
///   POST /studies/{id}/proposal         200 proposal, 202 while still computing
///   GET  /studies/{id}
///   GET  /studies/{id}/images/{image}?variant=original|enhanced
///   GET  /worklist?sort=referability|category&status=pending|decided
///   POST /studies/{id}/decision         {"gp_id","refer","note"[,"exam_appointed","icdr_grade"]}
///   GET  /stats/annual?year=Y, /stats/gp-table?from=&to=, /stats/workload
///   GET  /health
class HttpServer {
public:
    explicit HttpServer(ScreeningService& service);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port;
    /// the bound port is returned.
    int start(const std::string& host = "127.0.0.1", int port = 0);

    /// Serves on the calling thread until stop() is called elsewhere.
    void run(const std::string& host, int port);

    void stop();
    [[nodiscard]] int port() const { return port_; }

private:
    void install_routes();

    ScreeningService& service_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

/// Decodes standard base64 (whitespace ignored). Throws Parse.
std::vector<std::uint8_t> base64_decode(const std::string& text);
std::string base64_encode(std::span<const std::uint8_t> bytes);

}  // namespace retscreen::service
