#include "agentry/relay/protocol.hpp"

namespace agentry::relay {

std::string_view status_name(Status s) {
    switch (s) {
        case Status::Ok: return "ok";
        case Status::AlreadyExists: return "already-exists";
        case Status::Closed: return "closed";
        case Status::NotFound: return "not-found";
        case Status::UnknownEntity: return "unknown-entity";
        case Status::Error: return "error";
    }
    return "unknown";
}

}  // namespace agentry::relay
