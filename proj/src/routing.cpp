#include "hetsq/routing.hpp"

#include "hetsq/error.hpp"

namespace hetsq {

std::string to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::LongestIdleServerFirst: return "lisf";
        case PolicyKind::FastestServerFirst: return "fsf";
        case PolicyKind::SlowestServerFirst: return "ssf";
        case PolicyKind::UniformRandom: return "uniform";
        case PolicyKind::HRandom: return "hrandom";
    }
    return "unknown";
}

PolicyKind parse_policy_kind(const std::string& name) {
    if (name == "lisf") return PolicyKind::LongestIdleServerFirst;
    if (name == "fsf") return PolicyKind::FastestServerFirst;
    if (name == "ssf") return PolicyKind::SlowestServerFirst;
    if (name == "uniform") return PolicyKind::UniformRandom;
    if (name == "hrandom") return PolicyKind::HRandom;
    throw DomainError("unknown routing policy '" + name + "'");
}

}  // namespace hetsq
