#include <doctest.h>

#include <httplib.h>

#include "oracles.hpp"
#include "retscreen/cohort.hpp"
#include "retscreen/http_server.hpp"
#include "retscreen/serialization.hpp"
#include "service_fixtures.hpp"

using namespace retscreen;
using namespace retscreen::service;
using nlohmann::json;

namespace {

json bundle_json(const Study& study) {
    json images = json::object();
    for (const auto& eye : study.eyes) {
        for (const auto& im : eye.images) images[im.image_id] = base64_encode(encode_png(im.pixels));
    }
    return json{{"sidecar", io::to_json(io::sidecar_of(study))}, {"images", images}};
}

struct Harness {
    oracle::TempDir dir{"http"};
    std::shared_ptr<fixture::MarkerBackend> backend = std::make_shared<fixture::MarkerBackend>();
    std::unique_ptr<ScreeningService> service;
    std::unique_ptr<HttpServer> server;
    std::unique_ptr<httplib::Client> client;

    explicit Harness(std::chrono::milliseconds timeout = std::chrono::milliseconds(30000)) {
        auto opts = fixture::options(dir.path(), backend);
        opts.config.timeout = timeout;
        service = std::make_unique<ScreeningService>(opts);
        server = std::make_unique<HttpServer>(*service);
        const int port = server->start();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
        client->set_read_timeout(30, 0);
    }
    ~Harness() { server->stop(); }

    httplib::Result post(const std::string& path, const json& body) {
        return client->Post(path, body.dump(), "application/json");
    }
};

}  // namespace

TEST_CASE("status codes per error kind") {
    CHECK(http_status(ErrorKind::Precondition) == 400);
    CHECK(http_status(ErrorKind::Parse) == 400);
    CHECK(http_status(ErrorKind::NotFound) == 404);
    CHECK(http_status(ErrorKind::Conflict) == 409);
    CHECK(http_status(ErrorKind::Ordering) == 409);
    CHECK(http_status(ErrorKind::Unavailable) == 503);
    CHECK(http_status(ErrorKind::Unsupported) == 501);
}

TEST_CASE("base64 round trip") {
    for (std::string s : {"", "a", "ab", "abc", "abcd", "hello world!"}) {
        const std::vector<std::uint8_t> bytes(s.begin(), s.end());
        CHECK(base64_decode(base64_encode(bytes)) == bytes);
    }
    CHECK(base64_encode(std::vector<std::uint8_t>{'M', 'a'}) == "TWE=");
    CHECK_THROWS_AS(base64_decode("abc"), Error);
}

TEST_CASE("study registration over HTTP") {
    Harness h;
    const auto study = fixture::marker_study("S1", 0.9, 0.1);
    auto res = h.post("/studies", bundle_json(study));
    REQUIRE(res);
    CHECK(res->status == 201);
    CHECK(json::parse(res->body)["study_id"] == "S1");
    res = h.post("/studies", bundle_json(study));
    CHECK(res->status == 200);
    CHECK(h.service->events().size() == 1);

    res = h.post("/studies", bundle_json(fixture::marker_study("S1", 0.2, 0.1)));
    CHECK(res->status == 409);
    CHECK(json::parse(res->body)["error"] == "conflict");

    res = h.post("/studies", json{{"sidecar", {{"eyes", json::array()}}}, {"images", json::object()}});
    CHECK(res->status == 400);

    auto missing = bundle_json(fixture::marker_study("S2", 0.5, 0.1));
    missing["images"] = json::object();
    res = h.post("/studies", missing);
    CHECK(res->status == 400);
    CHECK(res->body.find("S2-L-0.png") != std::string::npos);

    res = h.client->Post("/studies", "not json", "application/json");
    CHECK(res->status == 400);
}

TEST_CASE("multipart upload and image_dir registration") {
    Harness h;
    const auto study = cohort::render_study("M1", {}, 96, 3);
    httplib::MultipartFormDataItems items;
    items.push_back({"sidecar", io::to_json(io::sidecar_of(study)).dump(), "", "application/json"});
    for (const auto& eye : study.eyes) {
        for (const auto& im : eye.images) {
            const auto png = encode_png(im.pixels);
            items.push_back({im.image_id, std::string(png.begin(), png.end()), im.image_id, "image/png"});
        }
    }
    auto res = h.client->Post("/studies", items);
    REQUIRE(res);
    CHECK(res->status == 201);

    const auto other = cohort::render_study("M2", {}, 96, 4);
    const auto folder = h.dir.path() / "incoming";
    io::save_study_dir(other, folder);
    res = h.post("/studies", json{{"sidecar", io::read_json_file(folder / "sidecar.json")}, {"image_dir", folder.string()}});
    CHECK(res->status == 201);
    CHECK(h.service->has_study("M2"));
}

TEST_CASE("proposal, study view and images") {
    Harness h;
    const auto study = fixture::marker_study("P1", 0.9, 0.1);
    h.post("/studies", bundle_json(study));
    auto res = h.client->Post("/studies/P1/proposal");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body == io::dump_proposal(*h.service->proposal("P1")));
    res = h.client->Post("/studies/P1/proposal");
    CHECK(res->body == io::dump_proposal(*h.service->proposal("P1")));

    CHECK(h.client->Post("/studies/none/proposal")->status == 404);
    CHECK(h.client->Get("/studies/none")->status == 404);

    res = h.client->Get("/studies/P1");
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["proposal"]["refer"] == true);

    res = h.client->Get("/studies/P1/images/P1-L-0.png?variant=enhanced");
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Content-Type") == "image/png");
    res = h.client->Get("/studies/P1/images/P1-L-0.png");
    const std::vector<std::uint8_t> bytes(res->body.begin(), res->body.end());
    CHECK(decode_image(bytes) == study.eyes[0].images[0].pixels);
}

TEST_CASE("slow backend answers 202 and keeps computing") {
    Harness h(std::chrono::milliseconds(20));
    h.backend->delay_ms = 400;
    h.post("/studies", bundle_json(fixture::marker_study("W1", 0.9, 0.1)));
    auto res = h.client->Post("/studies/W1/proposal");
    CHECK(res->status == 202);
    CHECK(json::parse(res->body)["status"] == "computing");
    for (int i = 0; i < 100 && res->status == 202; ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        res = h.client->Post("/studies/W1/proposal");
    }
    CHECK(res->status == 200);
}

TEST_CASE("outage maps to 503") {
    Harness h;
    h.post("/studies", bundle_json(fixture::marker_study("O1", 0.9, 0.1)));
    h.backend->down = true;
    CHECK(h.client->Post("/studies/O1/proposal")->status == 503);
    h.backend->down = false;
    CHECK(h.client->Post("/studies/O1/proposal")->status == 200);
}

TEST_CASE("worklist, decisions and statistics") {
    Harness h;
    const std::vector<std::pair<std::string, double>> scores{{"A", 0.9}, {"B", 0.3}, {"C", 0.7}};
    for (const auto& [id, dr] : scores) {
        h.post("/studies", bundle_json(fixture::marker_study(id, dr, 0.0)));
        h.client->Post("/studies/" + id + "/proposal");
    }
    auto res = h.client->Get("/worklist?sort=referability");
    auto body = json::parse(res->body);
    REQUIRE(body["entries"].size() == 3);
    CHECK(body["entries"][0]["study_id"] == "A");
    CHECK(body["entries"][1]["study_id"] == "C");
    CHECK(body["entries"][2]["study_id"] == "B");
    CHECK(h.client->Get("/worklist?sort=bogus")->status == 400);

    CHECK(h.post("/studies/A/decision", {{"gp_id", "GP01"}, {"refer", true}, {"note", ""}, {"exam_appointed", true},
                                         {"icdr_grade", 2}})
              ->status == 200);
    CHECK(h.post("/studies/A/decision", {{"gp_id", "GP01"}, {"refer", false}})->status == 409);
    CHECK(h.post("/studies/Z/decision", {{"gp_id", "GP01"}, {"refer", false}})->status == 404);
    CHECK(h.post("/studies/B/decision", {{"gp_id", "GP01"}, {"refer", "yes"}})->status == 400);
    h.post("/studies", bundle_json(fixture::marker_study("N", 0.1, 0.0)));
    CHECK(h.post("/studies/N/decision", {{"gp_id", "GP01"}, {"refer", false}})->status == 409);
    h.post("/studies/B/decision", {{"gp_id", "GP01"}, {"refer", false}});

    body = json::parse(h.client->Get("/worklist?status=decided")->body);
    CHECK(body["entries"].size() == 2);
    body = json::parse(h.client->Get("/worklist?sort=category&status=pending")->body);
    CHECK(body["entries"].size() == 2);

    res = h.client->Get("/stats/annual?year=2021");
    REQUIRE(res->status == 200);
    body = json::parse(res->body);
    CHECK(body["n_studies"] == 4);
    CHECK(h.client->Get("/stats/annual?year=1990")->status == 400);
    CHECK(json::parse(h.client->Get("/stats/annual")->body)["years"].size() == 1);

    body = json::parse(h.client->Get("/stats/gp-table")->body);
    REQUIRE(body["rows"].size() == 1);
    CHECK(body["rows"][0]["gp_id"] == "GP01");
    CHECK(body["rows"][0]["pa"] == 0.5);  // AI referred A and B, GP referred A only

    res = h.client->Get("/stats/workload");
    CHECK(res->status == 200);
    body = json::parse(res->body);
    CHECK(body["total_studies"] == 2);
    CHECK(body["ai_referred"] == 2);

    body = json::parse(h.client->Get("/health")->body);
    CHECK(body["status"] == "ok");
    CHECK(body["backend"] == "marker");
}

TEST_CASE("responses are identical across restarts") {
    oracle::TempDir dir("http-restart");
    auto backend = std::make_shared<fixture::MarkerBackend>();
    std::vector<std::string> first;
    const std::vector<std::string> paths{"/worklist", "/worklist?sort=category", "/stats/annual", "/stats/gp-table",
                                         "/studies/A"};
    for (int round = 0; round < 2; ++round) {
        ScreeningService svc(fixture::options(dir.path(), backend));
        HttpServer server(svc);
        httplib::Client client("127.0.0.1", server.start());
        if (round == 0) {
            for (const auto& [id, dr] : std::vector<std::pair<std::string, double>>{{"A", 0.9}, {"B", 0.2}}) {
                client.Post("/studies", bundle_json(fixture::marker_study(id, dr, 0.0)).dump(), "application/json");
                client.Post("/studies/" + id + "/proposal");
            }
            client.Post("/studies/A/decision", json{{"gp_id", "GP01"}, {"refer", true}}.dump(), "application/json");
            client.Post("/studies/B/decision", json{{"gp_id", "GP02"}, {"refer", false}}.dump(), "application/json");
        }
        for (std::size_t i = 0; i < paths.size(); ++i) {
            const auto res = client.Get(paths[i]);
            REQUIRE(res);
            if (round == 0) {
                first.push_back(res->body);
            } else {
                CHECK(res->body == first[i]);
            }
        }
        server.stop();
    }
}
