#include "retscreen/http_server.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include "retscreen/analytics.hpp"
#include "retscreen/serialization.hpp"

namespace retscreen::service {
namespace {

using nlohmann::json;

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorKind kind, const std::string& message) {
    send_json(res, http_status(kind), json{{"error", std::string(to_string(kind))}, {"message", message}});
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_error(res, e.kind(), e.what());
        } catch (const json::exception& e) {
            send_error(res, ErrorKind::Parse, e.what());
        } catch (const std::exception& e) {
            send_json(res, 500, json{{"error", "internal"}, {"message", e.what()}});
        }
    };
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        fail(ErrorKind::Parse, std::string("request body is not valid JSON: ") + e.what());
    }
}

std::optional<std::string> param(const httplib::Request& req, const char* key) {
    if (!req.has_param(key)) return std::nullopt;
    auto v = req.get_param_value(key);
    if (v.empty()) return std::nullopt;
    return v;
}

analytics::Period period_from(const httplib::Request& req) {
    return analytics::Period{param(req, "from"), param(req, "to")};
}

}  // namespace

int http_status(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Precondition:
        case ErrorKind::Parse:
        case ErrorKind::Config: return 400;
        case ErrorKind::NotFound: return 404;
        case ErrorKind::Conflict:
        case ErrorKind::Ordering: return 409;
        case ErrorKind::UndefinedRate:
        case ErrorKind::Unfittable: return 422;
        case ErrorKind::Unavailable:
        case ErrorKind::Transport: return 503;
        case ErrorKind::Unsupported: return 501;
        default: return 500;
    }
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    std::string clean;
    clean.reserve(text.size());
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c))) clean += c;
    }
    if (clean.size() % 4 != 0) fail(ErrorKind::Parse, "base64 length must be a multiple of 4");
    std::vector<std::uint8_t> out(clean.size() / 4 * 3);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                  static_cast<int>(clean.size()));
    if (n < 0) fail(ErrorKind::Parse, "invalid base64");
    std::size_t pad = 0;
    if (!clean.empty() && clean.back() == '=') ++pad;
    if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

HttpServer::HttpServer(ScreeningService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
    server_->set_payload_max_length(512ull << 20);
    install_routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::install_routes() {
    auto& srv = *server_;
    auto& svc = service_;

    srv.Get("/health", guarded([&svc](const httplib::Request&, httplib::Response& res) {
                send_json(res, 200,
                          json{{"status", "ok"}, {"backend", svc.backend_name()}, {"events", svc.events().size()}});
            }));

    srv.Post("/studies", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                 RegisterResult result;
                 if (req.is_multipart_form_data()) {
                     if (!req.has_file("sidecar")) fail(ErrorKind::Parse, "multipart upload needs a 'sidecar' part");
                     json sidecar_json;
                     try {
                         sidecar_json = json::parse(req.get_file_value("sidecar").content);
                     } catch (const json::exception& e) {
                         fail(ErrorKind::Parse, std::string("sidecar is not valid JSON: ") + e.what());
                     }
                     const auto sidecar = io::sidecar_from_json(sidecar_json);
                     std::vector<std::pair<std::string, std::vector<std::uint8_t>>> files;
                     for (const auto& [name, part] : req.files) {
                         if (name == "sidecar") continue;
                         const std::string fname = part.filename.empty() ? name : part.filename;
                         files.emplace_back(fname, std::vector<std::uint8_t>(part.content.begin(), part.content.end()));
                     }
                     result = svc.register_bundle(sidecar, files);
                 } else {
                     const json body = parse_body(req);
                     if (!body.contains("sidecar")) fail(ErrorKind::Parse, "body needs a 'sidecar' object");
                     const auto sidecar = io::sidecar_from_json(body["sidecar"]);
                     if (body.contains("images")) {
                         std::vector<std::pair<std::string, std::vector<std::uint8_t>>> files;
                         for (const auto& [name, data] : body["images"].items()) {
                             files.emplace_back(name, base64_decode(data.get<std::string>()));
                         }
                         result = svc.register_bundle(sidecar, files);
                     } else if (body.contains("image_dir")) {
                         result = svc.register_study(io::load_study(sidecar, body["image_dir"].get<std::string>()));
                     } else {
                         fail(ErrorKind::Parse, "body needs 'images' or 'image_dir'");
                     }
                 }
                 send_json(res, result.created ? 201 : 200,
                           json{{"study_id", result.study_id}, {"created", result.created}, {"status", "pending"}});
             }));

    srv.Post(R"(/studies/([^/]+)/proposal)",
             guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 if (!svc.has_study(id)) fail(ErrorKind::NotFound, "unknown study " + id);
                 const auto proposal = svc.request_proposal(id, svc.config().timeout);
                 if (!proposal) {
                     send_json(res, 202, json{{"study_id", id}, {"status", "computing"}});
                     return;
                 }
                 res.status = 200;
                 res.set_content(io::dump_proposal(*proposal), "application/json");
             }));

    srv.Get(R"(/studies/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, svc.study_json(req.matches[1]));
            }));

    srv.Get(R"(/studies/([^/]+)/images/([^/]+))",
            guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const std::string variant = param(req, "variant").value_or("original");
                const auto bytes = svc.image_png(req.matches[1], req.matches[2], variant);
                res.status = 200;
                res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
            }));

    srv.Get("/worklist", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const std::string sort_text = param(req, "sort").value_or("referability");
                const auto sort = parse_sort(sort_text);
                std::optional<StudyStatus> status;
                if (auto s = param(req, "status")) status = parse_status(*s);
                json entries = json::array();
                for (const auto& e : svc.worklist(sort, status)) entries.push_back(to_json(e));
                send_json(res, 200,
                          json{{"sort", sort_text},
                               {"status", status ? json(std::string(to_string(*status))) : json(nullptr)},
                               {"entries", entries}});
            }));

    srv.Post(R"(/studies/([^/]+)/decision)",
             guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                 const json body = parse_body(req);
                 DecisionInput in;
                 in.study_id = req.matches[1];
                 if (!body.contains("gp_id") || !body["gp_id"].is_string()) fail(ErrorKind::Parse, "gp_id required");
                 if (!body.contains("refer") || !body["refer"].is_boolean()) fail(ErrorKind::Parse, "refer must be boolean");
                 in.gp_id = body["gp_id"].get<std::string>();
                 in.refer = body["refer"].get<bool>();
                 in.note = body.value("note", std::string());
                 if (body.contains("exam_appointed") || body.contains("icdr_grade")) {
                     json wrapper{{"study_id", in.study_id},
                                  {"timestamp", "0000"},
                                  {"second_level",
                                   {{"exam_appointed", body.value("exam_appointed", false)},
                                    {"icdr_grade", body.contains("icdr_grade") ? body["icdr_grade"] : json(nullptr)}}}};
                     in.second_level = io::screening_event_from_json(wrapper).second_level;
                 }
                 svc.record_decision(in);
                 send_json(res, 200, json{{"study_id", in.study_id}, {"status", "decided"}});
             }));

    srv.Get("/stats/annual", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const auto events = svc.screening_events();
                if (auto y = param(req, "year")) {
                    int year = 0;
                    try {
                        year = std::stoi(*y);
                    } catch (const std::exception&) {
                        fail(ErrorKind::Precondition, "year must be an integer");
                    }
                    send_json(res, 200, io::to_json(analytics::annual_summary(events, year)));
                    return;
                }
                json years = json::array();
                for (int y : analytics::years_present(events)) years.push_back(io::to_json(analytics::annual_summary(events, y)));
                send_json(res, 200, json{{"years", years}});
            }));

    srv.Get("/stats/gp-table", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const auto events = svc.screening_events();
                json rows = json::array();
                for (const auto& r : analytics::gp_table(events, period_from(req))) rows.push_back(io::to_json(r));
                send_json(res, 200, json{{"rows", rows}});
            }));

    srv.Get("/stats/workload", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const auto events = svc.screening_events();
                send_json(res, 200, io::to_json(analytics::workload_from_events(events, period_from(req))));
            }));
}

int HttpServer::start(const std::string& host, int port) {
    port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (port_ < 0) fail(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void HttpServer::run(const std::string& host, int port) {
    port_ = port;
    if (!server_->listen(host, port)) fail(ErrorKind::Io, "cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace retscreen::service
