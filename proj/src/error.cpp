#include "retscreen/error.hpp"

namespace retscreen {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Precondition: return "precondition";
        case ErrorKind::Unfittable: return "unfittable";
        case ErrorKind::NonConvergence: return "non_convergence";
        case ErrorKind::Unsupported: return "unsupported_operation";
        case ErrorKind::Transport: return "transport";
        case ErrorKind::Unavailable: return "screening_unavailable";
        case ErrorKind::NotFound: return "not_found";
        case ErrorKind::Conflict: return "conflict";
        case ErrorKind::Ordering: return "ordering";
        case ErrorKind::Config: return "config";
        case ErrorKind::UndefinedRate: return "undefined_rate";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

}  // namespace retscreen
