#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace retscreen::service {

enum class EventKind { StudyRegistered, ProposalComputed, DecisionRecorded };

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view text);

struct StoreEvent {
    std::uint64_t seq = 0;
    EventKind kind = EventKind::StudyRegistered;
    std::string study_id;
    std::string timestamp;
    nlohmann::json payload;

    bool operator==(const StoreEvent&) const = default;
};

nlohmann::json to_json(const StoreEvent& event);
StoreEvent store_event_from_json(const nlohmann::json& j);

/// Append-only JSONL log, one event per line. On open a partial trailing line
/// (no newline or unparsable) is cut off and reported through warnings();
/// corruption before the last line is a Parse error. Not thread-safe: callers
/// serialize appends.
class EventStore {
public:
    explicit EventStore(std::filesystem::path path);

    [[nodiscard]] const std::vector<StoreEvent>& events() const { return events_; }
    [[nodiscard]] const std::vector<std::string>& warnings() const { return warnings_; }
    [[nodiscard]] const std::filesystem::path& path() const { return path_; }

    /// Assigns the next sequence number, writes and flushes one line.
    const StoreEvent& append(EventKind kind, std::string study_id, std::string timestamp, nlohmann::json payload);

private:
    std::filesystem::path path_;
    std::vector<StoreEvent> events_;
    std::vector<std::string> warnings_;
    std::ofstream out_;
};

}  // namespace retscreen::service
