#include "retscreen/service.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <ctime>

#include "retscreen/enhancement.hpp"
#include "retscreen/error.hpp"
#include "retscreen/orchestrator.hpp"

namespace retscreen::service {
namespace {

using nlohmann::json;

bool safe_name(const std::string& s) {
    if (s.empty() || s == "." || s == "..") return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '-' || c == '_' || c == '.';
    });
}

json second_level_json(const std::optional<analytics::SecondLevel>& sl) {
    if (!sl) return nullptr;
    json grade = nullptr;
    if (sl->grade) {
        grade = *sl->grade == analytics::IcdrGrade::NotGradable ? json("NG") : json(static_cast<int>(*sl->grade));
    }
    return json{{"exam_appointed", sl->exam_appointed}, {"icdr_grade", grade}};
}

std::optional<analytics::SecondLevel> second_level_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    // Reuse the event parser for the grade vocabulary.
    json wrapper{{"study_id", "x"}, {"timestamp", "0000"}, {"second_level", j}};
    return io::screening_event_from_json(wrapper).second_level;
}

int category_rank(const std::optional<ScreeningLabel>& c) {
    if (!c) return 3;
    switch (*c) {
        case ScreeningLabel::NonGradable: return 0;
        case ScreeningLabel::ReferableDR: return 1;
        case ScreeningLabel::NonReferable: return 2;
    }
    return 3;
}

}  // namespace

std::string_view to_string(StudyStatus status) { return status == StudyStatus::Pending ? "pending" : "decided"; }

StudyStatus parse_status(std::string_view text) {
    if (text == "pending") return StudyStatus::Pending;
    if (text == "decided") return StudyStatus::Decided;
    fail(ErrorKind::Precondition, "status must be pending or decided, got '" + std::string(text) + "'");
}

WorklistSort parse_sort(std::string_view text) {
    if (text == "referability") return WorklistSort::Referability;
    if (text == "category") return WorklistSort::Category;
    fail(ErrorKind::Precondition, "sort must be referability or category, got '" + std::string(text) + "'");
}

json to_json(const Decision& d) {
    return json{{"gp_id", d.gp_id},
                {"refer", d.refer},
                {"note", d.note},
                {"decided_at", d.decided_at},
                {"second_level", second_level_json(d.second_level)}};
}

json to_json(const WorklistEntry& e) {
    return json{{"study_id", e.study_id},
                {"received_at", e.received_at},
                {"referral_score", e.referral_score ? json(*e.referral_score) : json(nullptr)},
                {"category", e.category ? json(std::string(to_string(*e.category))) : json(nullptr)},
                {"status", std::string(to_string(e.status))},
                {"gp_decision", e.gp_decision ? to_json(*e.gp_decision) : json(nullptr)}};
}

std::string utc_now_iso() {
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::time_point_cast<std::chrono::seconds>(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now - secs).count();
    const std::time_t t = std::chrono::system_clock::to_time_t(secs);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

std::string content_hash(const Study& study) {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    const std::string sidecar = io::to_json(io::sidecar_of(study)).dump();
    EVP_DigestUpdate(ctx, sidecar.data(), sidecar.size());
    for (const auto& eye : study.eyes) {
        for (const auto& im : eye.images) {
            const std::string dims = std::to_string(im.pixels.width) + "x" + std::to_string(im.pixels.height);
            EVP_DigestUpdate(ctx, dims.data(), dims.size());
            EVP_DigestUpdate(ctx, im.pixels.data.data(), im.pixels.data.size());
        }
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    static const char* digits = "0123456789abcdef";
    for (unsigned i = 0; i < len; ++i) {
        hex += digits[digest[i] >> 4];
        hex += digits[digest[i] & 15];
    }
    return hex;
}

ScreeningService::ScreeningService(ServiceOptions options) : options_(std::move(options)) {
    options_.config.validate();
    if (!options_.backend) {
        inference::RemoteOptions remote;
        remote.timeout = options_.config.timeout;
        remote.retries = options_.config.remote_retries;
        options_.backend = inference::make_backend(options_.config.backend, options_.config.seed, remote);
    }
    std::filesystem::create_directories(options_.config.store_path);
    store_ = std::make_unique<EventStore>(options_.config.store_path / "events.jsonl");
    for (const auto& w : store_->warnings()) std::fprintf(stderr, "warning: %s\n", w.c_str());
    for (const auto& e : store_->events()) apply(e);
}

ScreeningService::~ScreeningService() {
    std::lock_guard lock(jobs_mutex_);
    for (auto& [id, job] : jobs_) job.wait();
}

std::string ScreeningService::now() const { return options_.clock ? options_.clock() : utc_now_iso(); }

std::string ScreeningService::backend_name() const { return options_.backend->name(); }

std::filesystem::path ScreeningService::study_dir(const std::string& study_id) const {
    return options_.config.store_path / "studies" / study_id;
}

void ScreeningService::apply(const StoreEvent& event) {
    std::unique_lock lock(state_mutex_);
    switch (event.kind) {
        case EventKind::StudyRegistered: {
            StudyState s;
            s.sidecar = io::sidecar_from_json(event.payload.at("sidecar"));
            s.content_hash = event.payload.at("content_hash").get<std::string>();
            s.received_at = event.timestamp;
            s.registered_seq = event.seq;
            studies_[event.study_id] = std::move(s);
            break;
        }
        case EventKind::ProposalComputed:
            studies_.at(event.study_id).proposal = io::study_proposal_from_json(event.payload);
            break;
        case EventKind::DecisionRecorded: {
            Decision d;
            d.gp_id = event.payload.at("gp_id").get<std::string>();
            d.refer = event.payload.at("refer").get<bool>();
            d.note = event.payload.value("note", std::string());
            d.decided_at = event.timestamp;
            if (const auto it = event.payload.find("second_level"); it != event.payload.end()) {
                d.second_level = second_level_from(*it);
            }
            studies_.at(event.study_id).decision = std::move(d);
            break;
        }
    }
}

const ScreeningService::StudyState& ScreeningService::find(const std::string& study_id) const {
    const auto it = studies_.find(study_id);
    if (it == studies_.end()) fail(ErrorKind::NotFound, "unknown study " + study_id);
    return it->second;
}

bool ScreeningService::has_study(const std::string& study_id) const {
    std::shared_lock lock(state_mutex_);
    return studies_.count(study_id) > 0;
}

RegisterResult ScreeningService::register_study(const Study& study) {
    const auto problems = validate_study(study);
    if (!problems.empty()) {
        std::string msg = "invalid study:";
        for (const auto& p : problems) msg += " " + p + ";";
        fail(ErrorKind::Precondition, msg);
    }
    return register_checked(study);
}

RegisterResult ScreeningService::register_bundle(
    const io::Sidecar& sidecar, const std::vector<std::pair<std::string, std::vector<std::uint8_t>>>& files) {
    return register_checked(io::assemble_study(sidecar, files));
}

RegisterResult ScreeningService::register_checked(const Study& study) {
    if (!safe_name(study.study_id)) fail(ErrorKind::Precondition, "study_id may only use [A-Za-z0-9._-]");
    for (const auto& eye : study.eyes) {
        for (const auto& im : eye.images) {
            if (!safe_name(im.image_id)) fail(ErrorKind::Precondition, "image file name '" + im.image_id + "' not allowed");
        }
    }
    const std::string hash = content_hash(study);
    std::lock_guard write(write_mutex_);
    {
        std::shared_lock lock(state_mutex_);
        const auto it = studies_.find(study.study_id);
        if (it != studies_.end()) {
            if (it->second.content_hash == hash) return {study.study_id, false};
            fail(ErrorKind::Conflict, "study " + study.study_id + " already registered with different content");
        }
    }
    const auto dir = study_dir(study.study_id) / "original";
    for (const auto& eye : study.eyes) {
        for (const auto& im : eye.images) write_png(im.pixels, dir / im.image_id);
    }
    const auto& event = store_->append(EventKind::StudyRegistered, study.study_id, now(),
                                       json{{"sidecar", io::to_json(io::sidecar_of(study))}, {"content_hash", hash}});
    apply(event);
    return {study.study_id, true};
}

std::optional<StudyProposal> ScreeningService::proposal(const std::string& study_id) const {
    std::shared_lock lock(state_mutex_);
    return find(study_id).proposal;
}

StudyProposal ScreeningService::compute_proposal(const std::string& study_id) {
    io::Sidecar sidecar;
    {
        std::shared_lock lock(state_mutex_);
        const auto& s = find(study_id);
        if (s.proposal) return *s.proposal;
        sidecar = s.sidecar;
    }
    const auto dir = study_dir(study_id);
    const Study study = io::load_study(sidecar, dir / "original");
    StudyProposal computed;
    try {
        computed = orchestrator::screen_study(study, *options_.backend, options_.config.orchestrator());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Transport) fail(ErrorKind::Unavailable, e.what());
        throw;
    }
    for (const auto& eye : study.eyes) {
        for (const auto& im : eye.images) {
            write_png(enhancement::enhance(im.pixels, options_.config.enhance), dir / "enhanced" / im.image_id);
        }
    }

    std::lock_guard write(write_mutex_);
    {
        std::shared_lock lock(state_mutex_);
        const auto& s = find(study_id);
        if (s.proposal) return *s.proposal;
    }
    const auto& event = store_->append(EventKind::ProposalComputed, study_id, now(), io::to_json(computed));
    apply(event);
    std::shared_lock lock(state_mutex_);
    return *find(study_id).proposal;
}

std::optional<StudyProposal> ScreeningService::request_proposal(const std::string& study_id,
                                                                std::chrono::milliseconds timeout) {
    if (auto stored = proposal(study_id)) return stored;
    std::shared_future<StudyProposal> job;
    {
        std::lock_guard lock(jobs_mutex_);
        auto it = jobs_.find(study_id);
        if (it == jobs_.end()) {
            job = std::async(std::launch::async, [this, study_id] { return compute_proposal(study_id); }).share();
            jobs_.emplace(study_id, job);
        } else {
            job = it->second;
        }
    }
    if (job.wait_for(timeout) != std::future_status::ready) return std::nullopt;
    {
        std::lock_guard lock(jobs_mutex_);
        const auto it = jobs_.find(study_id);
        if (it != jobs_.end() && it->second.valid()) jobs_.erase(it);
    }
    return job.get();  // rethrows backend failures; the job is gone so a retry starts afresh
}

std::vector<WorklistEntry> ScreeningService::worklist(WorklistSort sort, std::optional<StudyStatus> status) const {
    std::vector<std::pair<std::uint64_t, WorklistEntry>> rows;
    {
        std::shared_lock lock(state_mutex_);
        for (const auto& [id, s] : studies_) {
            WorklistEntry e;
            e.study_id = id;
            e.received_at = s.received_at;
            e.status = s.decision ? StudyStatus::Decided : StudyStatus::Pending;
            e.gp_decision = s.decision;
            if (s.proposal) {
                double score = 0.0;
                for (const auto& eye : s.proposal->eyes) score = std::max(score, eye.referral_score);
                e.referral_score = score;
                e.category = study_category(*s.proposal);
            }
            if (status && e.status != *status) continue;
            rows.emplace_back(s.registered_seq, std::move(e));
        }
    }
    const auto by_score = [](const auto& a, const auto& b) {
        const double sa = a.second.referral_score.value_or(-1.0);
        const double sb = b.second.referral_score.value_or(-1.0);
        if (sa != sb) return sa > sb;
        if (a.second.received_at != b.second.received_at) return a.second.received_at < b.second.received_at;
        return a.first < b.first;
    };
    if (sort == WorklistSort::Referability) {
        std::sort(rows.begin(), rows.end(), by_score);
    } else {
        std::sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
            const int ra = category_rank(a.second.category), rb = category_rank(b.second.category);
            if (ra != rb) return ra < rb;
            return by_score(a, b);
        });
    }
    std::vector<WorklistEntry> out;
    out.reserve(rows.size());
    for (auto& r : rows) out.push_back(std::move(r.second));
    return out;
}

void ScreeningService::record_decision(const DecisionInput& input) {
    if (input.gp_id.empty()) fail(ErrorKind::Precondition, "decision requires gp_id");
    std::lock_guard write(write_mutex_);
    {
        std::shared_lock lock(state_mutex_);
        const auto& s = find(input.study_id);
        if (!s.proposal) fail(ErrorKind::Ordering, "study " + input.study_id + " has no proposal yet");
        if (s.decision) fail(ErrorKind::Conflict, "study " + input.study_id + " already decided");
    }
    json payload{{"gp_id", input.gp_id}, {"refer", input.refer}, {"note", input.note}};
    if (input.second_level) payload["second_level"] = second_level_json(input.second_level);
    const auto& event = store_->append(EventKind::DecisionRecorded, input.study_id, now(), std::move(payload));
    apply(event);
}

json ScreeningService::study_json(const std::string& study_id) const {
    std::shared_lock lock(state_mutex_);
    const auto& s = find(study_id);
    return json{{"study_id", study_id},
                {"received_at", s.received_at},
                {"status", std::string(to_string(s.decision ? StudyStatus::Decided : StudyStatus::Pending))},
                {"content_hash", s.content_hash},
                {"sidecar", io::to_json(s.sidecar)},
                {"proposal", s.proposal ? io::to_json(*s.proposal) : json(nullptr)},
                {"decision", s.decision ? to_json(*s.decision) : json(nullptr)}};
}

std::vector<std::uint8_t> ScreeningService::image_png(const std::string& study_id, const std::string& image_id,
                                                      const std::string& variant) const {
    if (variant != "original" && variant != "enhanced") {
        fail(ErrorKind::Precondition, "variant must be original or enhanced");
    }
    bool known = false;
    bool has_proposal = false;
    {
        std::shared_lock lock(state_mutex_);
        const auto& s = find(study_id);
        has_proposal = s.proposal.has_value();
        for (const auto& eye : s.sidecar.eyes) {
            for (const auto& im : eye.images) known = known || im.file == image_id;
        }
    }
    if (!known) fail(ErrorKind::NotFound, "study " + study_id + " has no image " + image_id);
    if (variant == "enhanced" && !has_proposal) {
        fail(ErrorKind::Ordering, "enhanced images exist once the proposal is computed");
    }
    const auto path = study_dir(study_id) / variant / image_id;
    if (!std::filesystem::exists(path)) fail(ErrorKind::NotFound, "image file missing from store: " + image_id);
    return read_file_bytes(path);
}

std::vector<analytics::ScreeningEvent> ScreeningService::screening_events() const {
    std::shared_lock lock(state_mutex_);
    std::vector<std::pair<std::uint64_t, analytics::ScreeningEvent>> rows;
    for (const auto& [id, s] : studies_) {
        analytics::ScreeningEvent e;
        e.study_id = id;
        e.timestamp = s.received_at;
        if (s.proposal) {
            analytics::AiProposalRecord ai;
            ai.refer = s.proposal->refer;
            for (const auto& eye : s.proposal->eyes) ai.categories.push_back(eye.category);
            e.ai_proposal = std::move(ai);
        }
        if (s.decision) {
            e.gp_id = s.decision->gp_id;
            e.gp_refer = s.decision->refer;
            e.second_level = s.decision->second_level;
        }
        rows.emplace_back(s.registered_seq, std::move(e));
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<analytics::ScreeningEvent> out;
    for (auto& r : rows) out.push_back(std::move(r.second));
    return out;
}

std::vector<StoreEvent> ScreeningService::events() const {
    std::lock_guard write(write_mutex_);
    return store_->events();
}

std::vector<std::string> ScreeningService::warnings() const { return store_->warnings(); }

json ScreeningService::snapshot() const {
    json referability = json::array(), category = json::array();
    for (const auto& e : worklist(WorklistSort::Referability)) referability.push_back(to_json(e));
    for (const auto& e : worklist(WorklistSort::Category)) category.push_back(to_json(e));
    json studies = json::object();
    std::vector<std::string> ids;
    {
        std::shared_lock lock(state_mutex_);
        for (const auto& [id, s] : studies_) ids.push_back(id);
    }
    for (const auto& id : ids) studies[id] = study_json(id);
    return json{{"worklist_referability", referability}, {"worklist_category", category}, {"studies", studies}};
}

}  // namespace retscreen::service
