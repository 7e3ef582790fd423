#include "retscreen/event_store.hpp"

#include <optional>
#include <sstream>

#include "retscreen/error.hpp"

namespace retscreen::service {

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::StudyRegistered: return "study_registered";
        case EventKind::ProposalComputed: return "proposal_computed";
        case EventKind::DecisionRecorded: return "decision_recorded";
    }
    return "?";
}

EventKind parse_event_kind(std::string_view text) {
    if (text == "study_registered") return EventKind::StudyRegistered;
    if (text == "proposal_computed") return EventKind::ProposalComputed;
    if (text == "decision_recorded") return EventKind::DecisionRecorded;
    fail(ErrorKind::Parse, "unknown event kind '" + std::string(text) + "'");
}

nlohmann::json to_json(const StoreEvent& e) {
    return nlohmann::json{{"seq", e.seq},
                          {"kind", std::string(to_string(e.kind))},
                          {"study_id", e.study_id},
                          {"timestamp", e.timestamp},
                          {"payload", e.payload}};
}

StoreEvent store_event_from_json(const nlohmann::json& j) {
    try {
        StoreEvent e;
        e.seq = j.at("seq").get<std::uint64_t>();
        e.kind = parse_event_kind(j.at("kind").get<std::string>());
        e.study_id = j.at("study_id").get<std::string>();
        e.timestamp = j.at("timestamp").get<std::string>();
        e.payload = j.at("payload");
        return e;
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorKind::Parse, std::string("store event: ") + ex.what());
    }
}

EventStore::EventStore(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::string content;
    if (std::filesystem::exists(path_)) {
        std::ifstream in(path_, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        content = buf.str();
    }

    std::size_t good_end = 0;
    std::size_t pos = 0;
    std::size_t lineno = 0;
    while (pos < content.size()) {
        const auto nl = content.find('\n', pos);
        const bool complete = nl != std::string::npos;
        const std::string line = content.substr(pos, complete ? nl - pos : std::string::npos);
        const std::size_t next = complete ? nl + 1 : content.size();
        ++lineno;
        const bool last = next >= content.size();
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            if (complete) good_end = next;
            pos = next;
            continue;
        }
        std::optional<StoreEvent> event;
        if (complete) {
            try {
                event = store_event_from_json(nlohmann::json::parse(line));
            } catch (const std::exception&) {
                event.reset();
            }
        }
        if (!event) {
            if (!last) fail(ErrorKind::Parse, path_.string() + ":" + std::to_string(lineno) + ": corrupt event");
            warnings_.push_back("discarded partial trailing event at line " + std::to_string(lineno));
            break;
        }
        if (!events_.empty() && event->seq <= events_.back().seq) {
            fail(ErrorKind::Parse, path_.string() + ":" + std::to_string(lineno) + ": sequence numbers not increasing");
        }
        events_.push_back(std::move(*event));
        good_end = next;
        pos = next;
    }
    if (good_end < content.size()) std::filesystem::resize_file(path_, good_end);
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) fail(ErrorKind::Io, "cannot open event log " + path_.string());
}

const StoreEvent& EventStore::append(EventKind kind, std::string study_id, std::string timestamp,
                                     nlohmann::json payload) {
    StoreEvent e;
    e.seq = events_.empty() ? 1 : events_.back().seq + 1;
    e.kind = kind;
    e.study_id = std::move(study_id);
    e.timestamp = std::move(timestamp);
    e.payload = std::move(payload);
    // One write of the full line keeps appends atomic at line granularity.
    const std::string line = to_json(e).dump() + "\n";
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) fail(ErrorKind::Io, "failed to append to " + path_.string());
    events_.push_back(std::move(e));
    return events_.back();
}

}  // namespace retscreen::service
