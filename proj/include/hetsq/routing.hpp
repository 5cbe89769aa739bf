#pragma once

#include <string>

#include "hetsq/model.hpp"

namespace hetsq {

enum class PolicyKind {
    LongestIdleServerFirst,
    FastestServerFirst,
    SlowestServerFirst,
    UniformRandom,
    HRandom,
};

// Non-idling routing rule. HRandom sends an arrival to idle server k with
// probability proportional to h(mu_k); only values of h are used.
struct RoutingPolicy {
    PolicyKind kind = PolicyKind::UniformRandom;
    ScalarFn h;

    static RoutingPolicy lisf() { return {PolicyKind::LongestIdleServerFirst, {}}; }
    static RoutingPolicy fsf() { return {PolicyKind::FastestServerFirst, {}}; }
    static RoutingPolicy ssf() { return {PolicyKind::SlowestServerFirst, {}}; }
    static RoutingPolicy uniform() { return {PolicyKind::UniformRandom, {}}; }
    static RoutingPolicy h_random(ScalarFn h) { return {PolicyKind::HRandom, std::move(h)}; }
};

std::string to_string(PolicyKind kind);
// Accepts lisf, fsf, ssf, uniform, hrandom (case-sensitive).
PolicyKind parse_policy_kind(const std::string& name);

}  // namespace hetsq
