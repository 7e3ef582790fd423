#pragma once

#include <chrono>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "retscreen/analytics.hpp"
#include "retscreen/config.hpp"
#include "retscreen/event_store.hpp"
#include "retscreen/inference.hpp"
#include "retscreen/serialization.hpp"
#include "retscreen/study.hpp"

namespace retscreen::service {

enum class StudyStatus { Pending, Decided };
std::string_view to_string(StudyStatus status);
StudyStatus parse_status(std::string_view text);

enum class WorklistSort { Referability, Category };
WorklistSort parse_sort(std::string_view text);

struct Decision {
    std::string gp_id;
    bool refer = false;
    std::string note;
    std::string decided_at;
    std::optional<analytics::SecondLevel> second_level;
};

struct WorklistEntry {
    std::string study_id;
    std::string received_at;
    std::optional<double> referral_score;   // max over eyes once the proposal exists
    std::optional<ScreeningLabel> category;  // study-level
    StudyStatus status = StudyStatus::Pending;
    std::optional<Decision> gp_decision;
};

nlohmann::json to_json(const WorklistEntry& entry);
nlohmann::json to_json(const Decision& decision);

struct DecisionInput {
    std::string study_id;
    std::string gp_id;
    bool refer = false;
    std::string note;
    std::optional<analytics::SecondLevel> second_level;
};

struct RegisterResult {
    std::string study_id;
    bool created = false;
};

struct ServiceOptions {
    AppConfig config;
    std::shared_ptr<const inference::InferenceBackend> backend;  // built from config.backend when null
    std::function<std::string()> clock;                         // ISO-8601 UTC; system clock when empty
};

/// Screening workflow over an append-only event log under
/// config.store_path: events.jsonl plus studies/<id>/{original,enhanced}/.
/// All derived state is rebuilt from the log on construction through the
/// same apply path used for live writes.
class ScreeningService {
public:
    explicit ScreeningService(ServiceOptions options);
    ~ScreeningService();

    ScreeningService(const ScreeningService&) = delete;
    ScreeningService& operator=(const ScreeningService&) = delete;

    /// Idempotent for identical content; Conflict for a reused id with
    /// different content.
    RegisterResult register_study(const Study& study);
    RegisterResult register_bundle(const io::Sidecar& sidecar,
                                   const std::vector<std::pair<std::string, std::vector<std::uint8_t>>>& files);

    /// Runs the orchestrator once per study; later calls return the stored
    /// proposal. Backend failures surface as Unavailable and leave the study
    /// pending.
    StudyProposal compute_proposal(const std::string& study_id);

    /// Like compute_proposal but gives up waiting after `timeout`; the
    /// computation continues in the background and a later call picks it up.
    std::optional<StudyProposal> request_proposal(const std::string& study_id, std::chrono::milliseconds timeout);

    std::vector<WorklistEntry> worklist(WorklistSort sort, std::optional<StudyStatus> status = std::nullopt) const;

    void record_decision(const DecisionInput& input);

    [[nodiscard]] bool has_study(const std::string& study_id) const;
    [[nodiscard]] std::optional<StudyProposal> proposal(const std::string& study_id) const;
    [[nodiscard]] nlohmann::json study_json(const std::string& study_id) const;

    /// PNG bytes of an original or enhanced image.
    [[nodiscard]] std::vector<std::uint8_t> image_png(const std::string& study_id, const std::string& image_id,
                                                      const std::string& variant) const;

    /// One analytics record per registered study, in registration order.
    [[nodiscard]] std::vector<analytics::ScreeningEvent> screening_events() const;

    [[nodiscard]] std::vector<StoreEvent> events() const;
    [[nodiscard]] std::vector<std::string> warnings() const;
    [[nodiscard]] const AppConfig& config() const { return options_.config; }
    [[nodiscard]] std::string backend_name() const;

    /// Canonical dump of the derived state (worklist in both sorts plus
    /// stored proposals and decisions), used to compare replays.
    [[nodiscard]] nlohmann::json snapshot() const;

private:
    struct StudyState {
        io::Sidecar sidecar;
        std::string content_hash;
        std::string received_at;
        std::uint64_t registered_seq = 0;
        std::optional<StudyProposal> proposal;
        std::optional<Decision> decision;
    };

    void apply(const StoreEvent& event);
    const StudyState& find(const std::string& study_id) const;
    std::filesystem::path study_dir(const std::string& study_id) const;
    std::string now() const;
    RegisterResult register_checked(const Study& study);

    ServiceOptions options_;
    std::unique_ptr<EventStore> store_;
    std::map<std::string, StudyState> studies_;
    mutable std::shared_mutex state_mutex_;
    mutable std::mutex write_mutex_;
    std::mutex jobs_mutex_;
    std::map<std::string, std::shared_future<StudyProposal>> jobs_;
};

/// SHA-256 over the sidecar and decoded pixels, hex encoded.
std::string content_hash(const Study& study);

std::string utc_now_iso();

}  // namespace retscreen::service
