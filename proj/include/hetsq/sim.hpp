#pragma once

#include <cstdint>
#include <vector>

#include "hetsq/fairness_measure.hpp"
#include "hetsq/model.hpp"
#include "hetsq/routing.hpp"

namespace hetsq {

struct SimulationOptions {
    double horizon = 1000.0;
    double warmup = -1.0;  // negative: 20% of the horizon
    std::uint64_t seed = 1;
    std::uint64_t replication = 0;
    int batches = 20;
    // Idle intervals are kept until cumulative scaled idleness in the window
    // reaches this level, so empirical_fairness can apply any epsilon up to it.
    double epsilon_cap = 0.0;
    bool record_events = false;
    bool check_invariants = true;
};

enum class EventKind : std::uint8_t { Arrival, Departure, Abandonment };

struct EventRecord {
    double time;
    EventKind kind;
    int server;  // -1 when no server is involved
    int queue_length;
};

struct IdleInterval {
    int server;
    double start;
    double end;
};

struct SimulationResult {
    double horizon = 0.0;
    double warmup = 0.0;
    int n = 1;
    double alpha = 1.0;
    int servers = 0;

    std::vector<double> idle_time;      // per server, over [warmup, horizon]
    std::vector<double> idle_fraction;  // idle_time / (horizon - warmup)
    // Batch means of the per-server idle fraction, row-major [server][batch].
    std::vector<double> idle_fraction_batches;
    int batches = 0;

    double scaled_idleness_mean = 0.0;  // time average of n^-alpha I(t)
    double scaled_idleness_se = 0.0;
    double scaled_queue_mean = 0.0;     // time average of n^-alpha (X(t) - N)^+
    double scaled_queue_se = 0.0;
    double queue_mean = 0.0;            // unscaled time average of the queue length
    double idle_mean = 0.0;             // unscaled time average of I(t)

    std::uint64_t arrivals = 0;
    std::uint64_t departures = 0;
    std::uint64_t abandonments = 0;
    std::uint64_t in_system = 0;
    std::uint64_t window_arrivals = 0;
    std::uint64_t window_abandonments = 0;
    double abandonment_fraction = 0.0;  // within the window

    // Epsilon-shift support: cumulative scaled idleness at event epochs and
    // idle intervals recorded until it reaches the cap.
    std::vector<std::pair<double, double>> idleness_curve;
    std::vector<IdleInterval> early_idle;
    double epsilon_cap = 0.0;

    std::vector<EventRecord> events;

    double window() const { return horizon - warmup; }
    // Standard error of server k's idle fraction from batch means.
    double idle_fraction_se(int k) const;
};

// Event-driven simulation of the n-th system: Poisson(n lambda_bar) arrivals,
// exponential(mu_k) services, exponential(gamma) patience, non-idling routing.
// The server count is the population size.
SimulationResult run_simulation(const ModelParams& params, const ServerPopulation& population,
                                const RoutingPolicy& policy, const SimulationOptions& opts);

// Share of idle time accrued after the first instant the cumulative scaled
// idleness exceeds epsilon. Returns a degenerate measure (flag set) if that
// instant is never reached.
FairnessMeasure empirical_fairness(const SimulationResult& result, const ServerPopulation& population,
                                   double epsilon = 0.0);

struct IdlenessBin {
    double midpoint;
    double mean_rate;
    double mean;  // average idle fraction of the servers in the bin
    double se;    // standard error across those servers
    int count;
};

// Servers grouped by rate into equal-width bins over [min rate, max rate];
// empty bins are omitted.
std::vector<IdlenessBin> empirical_conditional_idleness(const SimulationResult& result,
                                                        const ServerPopulation& population, int bins);

struct AllocationBin {
    double lo;
    double hi;
    double mass;  // time average of n^-1 (idle servers with rate in the bin)
    double se;
};

// `rate_grid` gives bin edges; the last bin is closed on the right.
std::vector<AllocationBin> empirical_allocation(const SimulationResult& result,
                                                const ServerPopulation& population,
                                                const std::vector<double>& rate_grid);

}  // namespace hetsq
