#include <doctest.h>

#include <fstream>

#include "oracles.hpp"
#include "retscreen/error.hpp"
#include "retscreen/event_store.hpp"

using namespace retscreen;
using namespace retscreen::service;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("append and reload") {
    const oracle::TempDir dir("store");
    const auto path = dir.path() / "events.jsonl";
    {
        EventStore store(path);
        CHECK(store.events().empty());
        CHECK(store.append(EventKind::StudyRegistered, "S1", "t1", json{{"a", 1}}).seq == 1);
        CHECK(store.append(EventKind::ProposalComputed, "S1", "t2", json{{"b", 2}}).seq == 2);
    }
    EventStore reopened(path);
    REQUIRE(reopened.events().size() == 2);
    CHECK(reopened.events()[1].kind == EventKind::ProposalComputed);
    CHECK(reopened.events()[1].payload["b"] == 2);
    CHECK(reopened.warnings().empty());
    CHECK(reopened.append(EventKind::DecisionRecorded, "S1", "t3", json::object()).seq == 3);
}

TEST_CASE("a partial trailing line is cut off with a warning") {
    const oracle::TempDir dir("torn");
    const auto path = dir.path() / "events.jsonl";
    {
        EventStore store(path);
        store.append(EventKind::StudyRegistered, "S1", "t1", json::object());
    }
    const auto intact = slurp(path);
    {
        std::ofstream out(path, std::ios::app | std::ios::binary);
        out << R"({"seq":2,"kind":"proposal_comp)";
    }
    EventStore store(path);
    CHECK(store.events().size() == 1);
    REQUIRE(store.warnings().size() == 1);
    CHECK(slurp(path) == intact);
    CHECK(store.append(EventKind::ProposalComputed, "S1", "t2", json::object()).seq == 2);

    EventStore again(path);
    CHECK(again.events().size() == 2);
    CHECK(again.warnings().empty());
}

TEST_CASE("complete but unterminated last line is kept out") {
    const oracle::TempDir dir("noeol");
    const auto path = dir.path() / "events.jsonl";
    {
        EventStore store(path);
        store.append(EventKind::StudyRegistered, "S1", "t1", json::object());
    }
    {
        std::ofstream out(path, std::ios::app | std::ios::binary);
        out << R"({"seq":2,"kind":"study_registered","study_id":"S2","timestamp":"t","payload":{}})";
    }
    EventStore store(path);
    CHECK(store.events().size() == 1);
    CHECK(store.warnings().size() == 1);
}

TEST_CASE("corruption before the last line is fatal") {
    const oracle::TempDir dir("corrupt");
    const auto path = dir.path() / "events.jsonl";
    {
        std::ofstream out(path, std::ios::binary);
        out << "garbage\n"
            << R"({"seq":1,"kind":"study_registered","study_id":"S1","timestamp":"t","payload":{}})" << "\n";
    }
    try {
        EventStore store(path);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
    }
}

TEST_CASE("sequence numbers must increase") {
    const oracle::TempDir dir("seq");
    const auto path = dir.path() / "events.jsonl";
    {
        std::ofstream out(path, std::ios::binary);
        out << R"({"seq":2,"kind":"study_registered","study_id":"S1","timestamp":"t","payload":{}})" << "\n"
            << R"({"seq":2,"kind":"study_registered","study_id":"S2","timestamp":"t","payload":{}})" << "\n";
    }
    CHECK_THROWS_AS(EventStore{path}, Error);
}

TEST_CASE("event kind text") {
    for (auto k : {EventKind::StudyRegistered, EventKind::ProposalComputed, EventKind::DecisionRecorded}) {
        CHECK(parse_event_kind(to_string(k)) == k);
    }
    CHECK(to_string(EventKind::DecisionRecorded) == "decision_recorded");
    CHECK_THROWS_AS(parse_event_kind("other"), Error);
}
