#include <doctest.h>

#include <fstream>

#include "oracles.hpp"
#include "retscreen/cohort.hpp"
#include "retscreen/orchestrator.hpp"
#include "retscreen/serialization.hpp"
#include "service_fixtures.hpp"

using namespace retscreen;
using namespace retscreen::service;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Io;
}

std::size_t count_kind(const ScreeningService& svc, EventKind kind) {
    std::size_t n = 0;
    for (const auto& e : svc.events()) n += e.kind == kind ? 1 : 0;
    return n;
}

std::vector<std::string> ids(const std::vector<WorklistEntry>& entries) {
    std::vector<std::string> out;
    for (const auto& e : entries) out.push_back(e.study_id);
    return out;
}

}  // namespace

TEST_CASE("registration is idempotent and detects conflicts") {
    const oracle::TempDir dir("svc-reg");
    auto backend = std::make_shared<fixture::MarkerBackend>();
    ScreeningService svc(fixture::options(dir.path(), backend));

    const auto study = cohort::render_study("S1", {}, 96, 1);
    auto r = svc.register_study(study);
    CHECK(r.created);
    CHECK(r.study_id == "S1");
    CHECK(svc.worklist(WorklistSort::Referability).at(0).status == StudyStatus::Pending);

    r = svc.register_study(study);
    CHECK_FALSE(r.created);
    CHECK(count_kind(svc, EventKind::StudyRegistered) == 1);

    const auto other = cohort::render_study("S1", {true, false, Laterality::Left}, 96, 1);
    CHECK(kind_of([&] { (void)svc.register_study(other); }) == ErrorKind::Conflict);
    CHECK(kind_of([&] { (void)svc.register_study(fixture::marker_study("../evil", 0.1, 0.1)); }) ==
          ErrorKind::Precondition);
}

TEST_CASE("bundle with a missing file is rejected by name") {
    const oracle::TempDir dir("svc-missing");
    ScreeningService svc(fixture::options(dir.path(), std::make_shared<fixture::MarkerBackend>()));
    io::Sidecar sidecar{"S2", {{Laterality::Left, {{"present.png", 0}, {"gone.png", 1}}}}};
    const auto png = encode_png(RgbImage(64, 64, 80));
    try {
        (void)svc.register_bundle(sidecar, {{"present.png", png}});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("gone.png") != std::string::npos);
    }
    CHECK_FALSE(svc.has_study("S2"));
}

TEST_CASE("proposal matches the orchestrator and is computed once") {
    const oracle::TempDir dir("svc-prop");
    ServiceOptions opts = fixture::options(dir.path(), std::make_shared<inference::HeuristicStubModel>());
    ScreeningService svc(opts);
    const auto study = cohort::render_study("S3", {true, false, Laterality::Right}, 128, 5);
    svc.register_study(study);

    const auto direct = orchestrator::screen_study(study, inference::HeuristicStubModel{}, opts.config.orchestrator());
    const auto first = svc.compute_proposal("S3");
    CHECK(io::dump_proposal(first) == io::dump_proposal(direct));
    const auto second = svc.compute_proposal("S3");
    CHECK(io::dump_proposal(second) == io::dump_proposal(first));
    CHECK(count_kind(svc, EventKind::ProposalComputed) == 1);

    const auto original = svc.image_png("S3", study.eyes[0].images[0].image_id, "original");
    CHECK(decode_image(original) == study.eyes[0].images[0].pixels);
    const auto enhanced = svc.image_png("S3", study.eyes[0].images[0].image_id, "enhanced");
    CHECK(decode_image(enhanced) == enhancement::enhance(study.eyes[0].images[0].pixels));
    CHECK(kind_of([&] { (void)svc.image_png("S3", "nope.png", "original"); }) == ErrorKind::NotFound);
    CHECK(kind_of([&] { (void)svc.image_png("S3", study.eyes[0].images[0].image_id, "sepia"); }) ==
          ErrorKind::Precondition);

    CHECK(kind_of([&] { (void)svc.compute_proposal("missing"); }) == ErrorKind::NotFound);
}

TEST_CASE("backend outage leaves the study pending") {
    const oracle::TempDir dir("svc-down");
    auto backend = std::make_shared<fixture::MarkerBackend>();
    ScreeningService svc(fixture::options(dir.path(), backend));
    svc.register_study(fixture::marker_study("S4", 0.9, 0.1));
    backend->down = true;
    CHECK(kind_of([&] { (void)svc.compute_proposal("S4"); }) == ErrorKind::Unavailable);
    CHECK_FALSE(svc.proposal("S4").has_value());
    CHECK(count_kind(svc, EventKind::ProposalComputed) == 0);
    backend->down = false;
    CHECK(svc.compute_proposal("S4").refer);
}

TEST_CASE("slow proposals report pending and finish in the background") {
    const oracle::TempDir dir("svc-slow");
    auto backend = std::make_shared<fixture::MarkerBackend>();
    backend->delay_ms = 300;
    ScreeningService svc(fixture::options(dir.path(), backend));
    svc.register_study(fixture::marker_study("S5", 0.9, 0.1));
    CHECK_FALSE(svc.request_proposal("S5", std::chrono::milliseconds(10)).has_value());
    const auto done = svc.request_proposal("S5", std::chrono::milliseconds(5000));
    REQUIRE(done.has_value());
    CHECK(done->refer);
    CHECK(backend->dr_calls.load() == 1);
}

TEST_CASE("worklist sorting") {
    const oracle::TempDir dir("svc-sort");
    ScreeningService svc(fixture::options(dir.path(), std::make_shared<fixture::MarkerBackend>()));
    svc.register_study(fixture::marker_study("A", 0.9, 0.0));
    svc.register_study(fixture::marker_study("B", 0.3, 0.0));
    svc.register_study(fixture::marker_study("C", 0.7, 0.0));
    svc.register_study(fixture::marker_study("D", 0.3, 0.0, 91));  // same score as B, later
    svc.register_study(fixture::marker_study("E", 0.05, 0.9));     // non-gradable
    svc.register_study(fixture::marker_study("F", 0.0, 0.0));      // never computed
    for (const char* id : {"D", "C", "B", "A", "E"}) svc.compute_proposal(id);

    auto by_score = svc.worklist(WorklistSort::Referability);
    CHECK(ids(by_score) == std::vector<std::string>{"A", "E", "C", "B", "D", "F"});
    for (std::size_t i = 1; i + 1 < by_score.size(); ++i) CHECK(*by_score[i - 1].referral_score >= *by_score[i].referral_score);
    CHECK_FALSE(by_score.back().referral_score.has_value());

    auto by_category = svc.worklist(WorklistSort::Category);
    REQUIRE(by_category.size() == 6);
    CHECK(by_category[0].study_id == "E");
    CHECK(by_category[0].category == ScreeningLabel::NonGradable);
    CHECK(ids(by_category) == std::vector<std::string>{"E", "A", "C", "B", "D", "F"});

    svc.record_decision({"A", "GP01", true, "", std::nullopt});
    CHECK(ids(svc.worklist(WorklistSort::Referability, StudyStatus::Decided)) == std::vector<std::string>{"A"});
    CHECK(svc.worklist(WorklistSort::Referability, StudyStatus::Pending).size() == 5);
    CHECK(parse_sort("category") == WorklistSort::Category);
    CHECK(kind_of([] { (void)parse_sort("alphabetical"); }) == ErrorKind::Precondition);
    CHECK(kind_of([] { (void)parse_status("closed"); }) == ErrorKind::Precondition);
}

TEST_CASE("decision rules") {
    const oracle::TempDir dir("svc-dec");
    ScreeningService svc(fixture::options(dir.path(), std::make_shared<fixture::MarkerBackend>()));
    svc.register_study(fixture::marker_study("S1", 0.9, 0.0));
    CHECK(kind_of([&] { svc.record_decision({"S1", "GP01", true, "", std::nullopt}); }) == ErrorKind::Ordering);
    svc.compute_proposal("S1");
    svc.record_decision({"S1", "GP01", true, "looks referable",
                         analytics::SecondLevel{true, analytics::IcdrGrade::Moderate}});
    CHECK(svc.worklist(WorklistSort::Referability)[0].status == StudyStatus::Decided);
    CHECK(kind_of([&] { svc.record_decision({"S1", "GP02", false, "", std::nullopt}); }) == ErrorKind::Conflict);
    CHECK(kind_of([&] { svc.record_decision({"nobody", "GP01", true, "", std::nullopt}); }) == ErrorKind::NotFound);

    const auto events = svc.screening_events();
    REQUIRE(events.size() == 1);
    CHECK(events[0].gp_id == std::optional<std::string>("GP01"));
    CHECK(events[0].gp_refer == true);
    CHECK(events[0].ai_proposal->refer);
    CHECK(events[0].second_level->grade == analytics::IcdrGrade::Moderate);

    const auto j = svc.study_json("S1");
    CHECK(j["status"] == "decided");
    CHECK(j["decision"]["note"] == "looks referable");
}

TEST_CASE("replay rebuilds the same state and survives a torn write") {
    const oracle::TempDir dir("svc-replay");
    nlohmann::json live;
    std::vector<analytics::ScreeningEvent> live_events;
    {
        ScreeningService svc(fixture::options(dir.path(), std::make_shared<fixture::MarkerBackend>()));
        for (int i = 0; i < 6; ++i) {
            const std::string id = "R" + std::to_string(i);
            svc.register_study(fixture::marker_study(id, 0.15 * i, 0.1 * (5 - i)));
            if (i < 5) svc.compute_proposal(id);
            if (i < 3) svc.record_decision({id, i % 2 ? "GP02" : "GP01", i == 1, "n" + std::to_string(i), std::nullopt});
        }
        live = svc.snapshot();
        live_events = svc.screening_events();
    }
    {
        ScreeningService replayed(fixture::options(dir.path(), std::make_shared<fixture::MarkerBackend>()));
        CHECK(replayed.snapshot() == live);
        CHECK(replayed.screening_events() == live_events);
        CHECK(replayed.warnings().empty());
    }
    {
        std::ofstream out(dir.path() / "events.jsonl", std::ios::app | std::ios::binary);
        out << R"({"seq":99,"kind":"decision_rec)";
    }
    ScreeningService recovered(fixture::options(dir.path(), std::make_shared<fixture::MarkerBackend>()));
    CHECK(recovered.snapshot() == live);
    CHECK(recovered.warnings().size() == 1);
    // the recovered log accepts new events
    recovered.record_decision({"R3", "GP01", false, "", std::nullopt});
    CHECK(recovered.worklist(WorklistSort::Referability, StudyStatus::Decided).size() == 4);
}

TEST_CASE("content hash depends on pixels and layout") {
    const auto a = fixture::marker_study("H", 0.5, 0.5);
    auto b = a;
    CHECK(content_hash(a) == content_hash(b));
    b.eyes[0].images[0].pixels.at(10, 10, 2) ^= 1;
    CHECK(content_hash(a) != content_hash(b));
    CHECK(content_hash(a).size() == 64);
}
