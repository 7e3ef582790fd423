#include <httplib.h>

#include <json.hpp>

#include "retscreen/error.hpp"
#include "retscreen/inference.hpp"

namespace retscreen::inference {

namespace {

void split_url(const std::string& url, std::string& origin, std::string& path) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        fail(ErrorKind::Config, "remote backend url must look like http://host:port/path, got '" + url + "'");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    origin = path_start == std::string::npos ? url : url.substr(0, path_start);
    path = path_start == std::string::npos ? "/" : url.substr(path_start);
}

double probability_field(const nlohmann::json& body, const char* key) {
    if (!body.contains(key) || !body[key].is_number()) {
        fail(ErrorKind::Transport, std::string("remote response lacks numeric '") + key + "'");
    }
    const double v = body[key].get<double>();
    if (!(v >= 0.0 && v <= 1.0)) {
        fail(ErrorKind::Transport, std::string("remote response '") + key + "' outside [0,1]");
    }
    return v;
}

}  // namespace

RemoteBackend::RemoteBackend(std::string url, RemoteOptions options)
    : url_(std::move(url)), options_(options) {
    split_url(url_, origin_, path_);
}

RemoteBackend::Response RemoteBackend::infer(const RgbImage& image) const {
    const auto png = encode_png(image);
    const std::string body(png.begin(), png.end());

    // One client per call: no mutable state shared between concurrent callers.
    httplib::Client client(origin_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    std::string last_error;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
        auto res = client.Post(path_, body, "image/png");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            fail(ErrorKind::Transport, "remote inference rejected the request: HTTP " + std::to_string(res->status));
        }
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Transport, std::string("remote response is not JSON: ") + e.what());
        }
        Response out;
        const auto& fs = parsed.value("field_scores", nlohmann::json());
        if (!fs.is_array() || fs.size() != kFieldCategoryCount) {
            fail(ErrorKind::Transport, "remote response field_scores must hold 7 numbers");
        }
        for (std::size_t i = 0; i < kFieldCategoryCount; ++i) {
            if (!fs[i].is_number()) fail(ErrorKind::Transport, "remote field_scores entry is not a number");
            out.field_scores.probs[i] = fs[i].get<double>();
        }
        if (!out.field_scores.is_valid()) {
            fail(ErrorKind::Transport, "remote field_scores are not a probability vector");
        }
        out.raw.dr_prob = probability_field(parsed, "dr_prob");
        out.raw.non_gradability_prob = probability_field(parsed, "non_gradability_prob");
        return out;
    }
    fail(ErrorKind::Transport, "remote inference at " + url_ + " unavailable: " + last_error);
}

FieldScores RemoteBackend::classify_field(const RgbImage& image) const {
    return infer(image).field_scores;
}

double RemoteBackend::score_dr(const RgbImage& image) const {
    return infer(image).raw.dr_prob;
}

double RemoteBackend::score_gradability(const RgbImage& image) const {
    return infer(image).raw.non_gradability_prob;
}

}  // namespace retscreen::inference
