#include "hetsq/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <numeric>
#include <queue>

#include "hetsq/error.hpp"
#include "hetsq/rng.hpp"

namespace hetsq {

namespace {

__extension__ typedef unsigned __int128 u128;

// Uniform integer in [0, bound) by multiply-shift; bound > 0.
std::uint64_t draw_below(Rng& rng, std::uint64_t bound) {
    return static_cast<std::uint64_t>((static_cast<u128>(rng()) * bound) >> 64);
}

class Router {
public:
    virtual ~Router() = default;
    virtual void push(int k) = 0;
    virtual int pop(Rng& rng) = 0;
    virtual int size() const = 0;
};

class LisfRouter final : public Router {
public:
    void push(int k) override { order_.push_back(k); }
    int pop(Rng&) override {
        const int k = order_.front();
        order_.pop_front();
        return k;
    }
    int size() const override { return static_cast<int>(order_.size()); }

private:
    std::deque<int> order_;
};

class RankRouter final : public Router {
public:
    RankRouter(const std::vector<double>& rates, bool fastest) {
        const auto n = rates.size();
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        // Position 0 is served first; ties go to the lower index.
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return fastest ? rates[static_cast<std::size_t>(a)] > rates[static_cast<std::size_t>(b)]
                           : rates[static_cast<std::size_t>(a)] < rates[static_cast<std::size_t>(b)];
        });
        rank_.resize(n);
        for (std::size_t i = 0; i < n; ++i) rank_[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
        server_ = std::move(order);
    }
    void push(int k) override { heap_.push(rank_[static_cast<std::size_t>(k)]); }
    int pop(Rng&) override {
        const int r = heap_.top();
        heap_.pop();
        return server_[static_cast<std::size_t>(r)];
    }
    int size() const override { return static_cast<int>(heap_.size()); }

private:
    std::vector<int> rank_;
    std::vector<int> server_;
    std::priority_queue<int, std::vector<int>, std::greater<>> heap_;
};

class UniformRouter final : public Router {
public:
    explicit UniformRouter(std::size_t n) : pos_(n, -1) {}
    void push(int k) override {
        pos_[static_cast<std::size_t>(k)] = static_cast<int>(ids_.size());
        ids_.push_back(k);
    }
    int pop(Rng& rng) override {
        const auto i = static_cast<std::size_t>(draw_below(rng, ids_.size()));
        const int k = ids_[i];
        ids_[i] = ids_.back();
        pos_[static_cast<std::size_t>(ids_[i])] = static_cast<int>(i);
        ids_.pop_back();
        pos_[static_cast<std::size_t>(k)] = -1;
        return k;
    }
    int size() const override { return static_cast<int>(ids_.size()); }

private:
    std::vector<int> ids_;
    std::vector<int> pos_;
};

// Weighted sampling over idle servers with a Fenwick tree of integer
// weights; integer arithmetic keeps decisions exact and scale-free.
class WeightedRouter final : public Router {
public:
    WeightedRouter(const std::vector<double>& rates, const ScalarFn& h) : weight_(rates.size()), tree_(rates.size() + 1, 0) {
        double h_max = 0.0;
        std::vector<double> hv(rates.size());
        for (std::size_t k = 0; k < rates.size(); ++k) {
            hv[k] = h(rates[k]);
            if (!(hv[k] > 0.0) || !std::isfinite(hv[k])) {
                throw DomainError("h-random weight must be positive and finite at every server rate");
            }
            h_max = std::max(h_max, hv[k]);
        }
        for (std::size_t k = 0; k < rates.size(); ++k) {
            weight_[k] = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(hv[k] / h_max * 4294967296.0)));
        }
        top_ = 1;
        while (top_ * 2 <= rates.size()) top_ *= 2;
    }
    void push(int k) override {
        add(static_cast<std::size_t>(k), weight_[static_cast<std::size_t>(k)]);
        ++count_;
        total_ += weight_[static_cast<std::size_t>(k)];
    }
    int pop(Rng& rng) override {
        std::uint64_t target = draw_below(rng, total_);
        std::size_t pos = 0;
        for (std::size_t step = top_; step > 0; step >>= 1) {
            const std::size_t next = pos + step;
            if (next < tree_.size() && tree_[next] <= target) {
                pos = next;
                target -= tree_[next];
            }
        }
        const std::size_t k = pos;  // zero-based server index
        add(k, 0 - weight_[k]);
        --count_;
        total_ -= weight_[k];
        return static_cast<int>(k);
    }
    int size() const override { return count_; }

private:
    void add(std::size_t k, std::uint64_t delta) {
        for (std::size_t i = k + 1; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
    }

    std::vector<std::uint64_t> weight_;
    std::vector<std::uint64_t> tree_;
    std::size_t top_ = 1;
    std::uint64_t total_ = 0;
    int count_ = 0;
};

std::unique_ptr<Router> make_router(const RoutingPolicy& policy, const std::vector<double>& rates) {
    switch (policy.kind) {
        case PolicyKind::LongestIdleServerFirst: return std::make_unique<LisfRouter>();
        case PolicyKind::FastestServerFirst: return std::make_unique<RankRouter>(rates, true);
        case PolicyKind::SlowestServerFirst: return std::make_unique<RankRouter>(rates, false);
        case PolicyKind::UniformRandom: return std::make_unique<UniformRouter>(rates.size());
        case PolicyKind::HRandom:
            if (!policy.h.value) throw DomainError("h-random policy needs a weight function");
            return std::make_unique<WeightedRouter>(rates, policy.h);
    }
    throw DomainError("unknown routing policy");
}

struct Event {
    double time;
    std::uint64_t seq;
    EventKind kind;
    std::uint64_t id;  // server for departures, ticket for abandonments
};

struct Later {
    bool operator()(const Event& a, const Event& b) const {
        return a.time > b.time || (a.time == b.time && a.seq > b.seq);
    }
};

struct Waiting {
    double deadline;
    bool abandoned;
};

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

class Simulator {
public:
    Simulator(const ModelParams& params, const ServerPopulation& pop, const RoutingPolicy& policy,
              const SimulationOptions& opts)
        : params_(params), opts_(opts), rates_(pop.rates()), servers_(static_cast<int>(rates_.size())) {
        warmup_ = opts.warmup < 0.0 ? 0.2 * opts.horizon : opts.warmup;
        batch_len_ = (opts.horizon - warmup_) / opts.batches;
        scale_ = std::pow(static_cast<double>(params.n), -params.alpha);
        router_ = make_router(policy, rates_);
        arrival_rng_ = make_rng(opts.seed, opts.replication, Stream::Arrival);
        service_rng_ = make_rng(opts.seed, opts.replication, Stream::Service);
        patience_rng_ = make_rng(opts.seed, opts.replication, Stream::Patience);
        routing_rng_ = make_rng(opts.seed, opts.replication, Stream::Routing);
        idle_since_.assign(rates_.size(), 0.0);
        busy_.assign(rates_.size(), false);
        idle_batches_.assign(rates_.size() * static_cast<std::size_t>(opts.batches), 0.0);
        idle_time_.assign(rates_.size(), 0.0);
        i_batches_.assign(static_cast<std::size_t>(opts.batches), 0.0);
        q_batches_.assign(static_cast<std::size_t>(opts.batches), 0.0);
        early_ = opts.epsilon_cap > 0.0;
    }

    SimulationResult run() {
        for (int k = 0; k < servers_; ++k) router_->push(k);
        schedule(exponential(arrival_rng_, params_.arrival_rate()), EventKind::Arrival, 0);
        if (early_) curve_.emplace_back(warmup_, 0.0);

        while (!heap_.empty() && heap_.top().time <= opts_.horizon) {
            const Event ev = heap_.top();
            heap_.pop();
            advance(ev.time);
            switch (ev.kind) {
                case EventKind::Arrival: on_arrival(ev.time); break;
                case EventKind::Departure: on_departure(ev.time, static_cast<int>(ev.id)); break;
                case EventKind::Abandonment: on_deadline(ev.time, ev.id); break;
            }
            if (opts_.check_invariants) check();
        }
        advance(opts_.horizon);
        return finish();
    }

private:
    void schedule(double t, EventKind kind, std::uint64_t id) { heap_.push({t, seq_++, kind, id}); }

    // Integrates I(t) and the queue length over [now_, t] and moves the clock.
    void advance(double t) {
        const double a = std::max(now_, warmup_);
        const double b = std::min(t, opts_.horizon);
        if (b > a) {
            const double idle = router_->size();
            const double queue = static_cast<double>(queue_live_);
            spread(a, b, [&](std::size_t batch, double len) {
                i_batches_[batch] += idle * len;
                q_batches_[batch] += queue * len;
            });
            if (early_) {
                const double before = cum_;
                cum_ += scale_ * idle * (b - a);
                if (cum_ >= opts_.epsilon_cap) {
                    const double tau = a + (opts_.epsilon_cap - before) / (scale_ * idle);
                    curve_.emplace_back(tau, opts_.epsilon_cap);
                    for (int k = 0; k < servers_; ++k) {
                        if (!busy_[static_cast<std::size_t>(k)]) {
                            early_idle_.push_back({k, std::max(idle_since_[static_cast<std::size_t>(k)], warmup_), tau});
                        }
                    }
                    early_ = false;
                } else {
                    curve_.emplace_back(b, cum_);
                }
            }
        }
        now_ = t;
    }

    template <class Fn>
    void spread(double a, double b, Fn&& fn) const {
        const auto last = static_cast<std::size_t>(opts_.batches - 1);
        auto batch_of = [&](double x) {
            return std::min(last, static_cast<std::size_t>(std::max(0.0, (x - warmup_) / batch_len_)));
        };
        for (std::size_t j = batch_of(a); j <= batch_of(b); ++j) {
            const double lo = std::max(a, warmup_ + static_cast<double>(j) * batch_len_);
            const double hi = j == last ? b : std::min(b, warmup_ + static_cast<double>(j + 1) * batch_len_);
            if (hi > lo) fn(j, hi - lo);
        }
    }

    void accrue_idle(int k, double from, double to) {
        const double a = std::max(from, warmup_);
        const double b = std::min(to, opts_.horizon);
        if (!(b > a)) return;
        idle_time_[static_cast<std::size_t>(k)] += b - a;
        const auto row = static_cast<std::size_t>(k) * static_cast<std::size_t>(opts_.batches);
        spread(a, b, [&](std::size_t batch, double len) { idle_batches_[row + batch] += len; });
        if (early_) early_idle_.push_back({k, a, b});
    }

    void start_service(double t, int k) {
        busy_[static_cast<std::size_t>(k)] = true;
        ++busy_count_;
        schedule(t + exponential(service_rng_, rates_[static_cast<std::size_t>(k)]), EventKind::Departure,
                 static_cast<std::uint64_t>(k));
    }

    void on_arrival(double t) {
        ++arrivals_;
        if (t >= warmup_) ++window_arrivals_;
        schedule(t + exponential(arrival_rng_, params_.arrival_rate()), EventKind::Arrival, 0);
        if (router_->size() > 0) {
            const int k = router_->pop(routing_rng_);
            accrue_idle(k, idle_since_[static_cast<std::size_t>(k)], t);
            start_service(t, k);
            log(t, EventKind::Arrival, k);
            return;
        }
        const double deadline = t + exponential(patience_rng_, params_.gamma);
        queue_.push_back({deadline, false});
        ++queue_live_;
        schedule(deadline, EventKind::Abandonment, front_ticket_ + queue_.size() - 1);
        log(t, EventKind::Arrival, -1);
    }

    void drop_abandoned_front() {
        while (!queue_.empty() && queue_.front().abandoned) {
            queue_.pop_front();
            ++front_ticket_;
        }
    }

    void on_departure(double t, int k) {
        ++departures_;
        --busy_count_;
        busy_[static_cast<std::size_t>(k)] = false;
        drop_abandoned_front();
        if (queue_live_ > 0) {
            queue_.pop_front();
            ++front_ticket_;
            --queue_live_;
            start_service(t, k);
        } else {
            idle_since_[static_cast<std::size_t>(k)] = t;
            router_->push(k);
        }
        log(t, EventKind::Departure, k);
    }

    void on_deadline(double t, std::uint64_t ticket) {
        if (ticket < front_ticket_) return;  // already served
        auto& w = queue_[static_cast<std::size_t>(ticket - front_ticket_)];
        if (w.abandoned) return;
        w.abandoned = true;
        --queue_live_;
        ++abandonments_;
        if (t >= warmup_) ++window_abandonments_;
        drop_abandoned_front();
        log(t, EventKind::Abandonment, -1);
    }

    void log(double t, EventKind kind, int server) {
        if (opts_.record_events) events_.push_back({t, kind, server, static_cast<int>(queue_live_)});
    }

    void check() const {
        const int idle = router_->size();
        if (queue_live_ > 0 && idle > 0) throw SimulationError("non-idling violated: customers wait while servers idle");
        if (busy_count_ + idle != servers_) throw SimulationError("server accounting broken");
        if (arrivals_ != departures_ + abandonments_ + static_cast<std::uint64_t>(busy_count_) + queue_live_) {
            throw SimulationError("customer conservation violated");
        }
    }

    SimulationResult finish() {
        for (int k = 0; k < servers_; ++k) {
            if (!busy_[static_cast<std::size_t>(k)]) accrue_idle(k, idle_since_[static_cast<std::size_t>(k)], opts_.horizon);
        }
        SimulationResult r;
        r.horizon = opts_.horizon;
        r.warmup = warmup_;
        r.n = params_.n;
        r.alpha = params_.alpha;
        r.servers = servers_;
        r.batches = opts_.batches;
        const double window = opts_.horizon - warmup_;
        r.idle_time = idle_time_;
        r.idle_fraction.resize(idle_time_.size());
        for (std::size_t k = 0; k < idle_time_.size(); ++k) r.idle_fraction[k] = idle_time_[k] / window;
        r.idle_fraction_batches = idle_batches_;
        for (double& v : r.idle_fraction_batches) v /= batch_len_;

        std::vector<double> ib(i_batches_.size());
        std::vector<double> qb(q_batches_.size());
        for (std::size_t j = 0; j < ib.size(); ++j) {
            ib[j] = i_batches_[j] / batch_len_;
            qb[j] = q_batches_[j] / batch_len_;
        }
        r.idle_mean = mean_of(ib);
        r.queue_mean = mean_of(qb);
        r.scaled_idleness_mean = scale_ * r.idle_mean;
        r.scaled_idleness_se = scale_ * se_of(ib);
        r.scaled_queue_mean = scale_ * r.queue_mean;
        r.scaled_queue_se = scale_ * se_of(qb);

        r.arrivals = arrivals_;
        r.departures = departures_;
        r.abandonments = abandonments_;
        r.in_system = static_cast<std::uint64_t>(busy_count_) + queue_live_;
        r.window_arrivals = window_arrivals_;
        r.window_abandonments = window_abandonments_;
        r.abandonment_fraction =
            window_arrivals_ > 0 ? static_cast<double>(window_abandonments_) / static_cast<double>(window_arrivals_) : 0.0;
        r.epsilon_cap = opts_.epsilon_cap;
        r.idleness_curve = std::move(curve_);
        r.early_idle = std::move(early_idle_);
        r.events = std::move(events_);
        return r;
    }

    ModelParams params_;
    SimulationOptions opts_;
    std::vector<double> rates_;
    int servers_;
    double warmup_ = 0.0;
    double batch_len_ = 1.0;
    double scale_ = 1.0;
    std::unique_ptr<Router> router_;
    Rng arrival_rng_;
    Rng service_rng_;
    Rng patience_rng_;
    Rng routing_rng_;

    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;

    std::deque<Waiting> queue_;
    std::uint64_t front_ticket_ = 0;
    std::uint64_t queue_live_ = 0;

    std::vector<double> idle_since_;
    std::vector<bool> busy_;
    int busy_count_ = 0;

    std::vector<double> idle_time_;
    std::vector<double> idle_batches_;
    std::vector<double> i_batches_;
    std::vector<double> q_batches_;

    std::uint64_t arrivals_ = 0;
    std::uint64_t departures_ = 0;
    std::uint64_t abandonments_ = 0;
    std::uint64_t window_arrivals_ = 0;
    std::uint64_t window_abandonments_ = 0;

    bool early_ = false;
    double cum_ = 0.0;
    std::vector<std::pair<double, double>> curve_;
    std::vector<IdleInterval> early_idle_;
    std::vector<EventRecord> events_;
};

}  // namespace

double SimulationResult::idle_fraction_se(int k) const {
    const auto row = static_cast<std::size_t>(k) * static_cast<std::size_t>(batches);
    std::vector<double> v(idle_fraction_batches.begin() + static_cast<std::ptrdiff_t>(row),
                          idle_fraction_batches.begin() + static_cast<std::ptrdiff_t>(row + static_cast<std::size_t>(batches)));
    return se_of(v);
}

SimulationResult run_simulation(const ModelParams& params, const ServerPopulation& population,
                                const RoutingPolicy& policy, const SimulationOptions& opts) {
    params.validate();
    if (population.empty()) throw DomainError("simulation needs at least one server");
    for (const auto& s : population.servers) {
        if (!(s.mu > 0.0) || !std::isfinite(s.mu)) throw DomainError("server rates must be positive and finite");
    }
    if (!(opts.horizon > 0.0)) throw DomainError("horizon must be positive");
    const double warmup = opts.warmup < 0.0 ? 0.2 * opts.horizon : opts.warmup;
    if (!(warmup < opts.horizon)) throw DomainError("warmup must be shorter than the horizon");
    if (opts.batches < 1) throw DomainError("batches must be at least 1");
    if (opts.epsilon_cap < 0.0) throw DomainError("epsilon_cap must be non-negative");
    return Simulator(params, population, policy, opts).run();
}

FairnessMeasure empirical_fairness(const SimulationResult& result, const ServerPopulation& population,
                                   double epsilon) {
    if (epsilon < 0.0) throw DomainError("epsilon must be non-negative");
    if (population.size() != result.idle_time.size()) throw DomainError("population does not match the result");
    auto degenerate = [] {
        FairnessMeasure m = FairnessMeasure::point_mass(0.0);
        m.degenerate = true;
        return m;
    };
    std::vector<double> weights = result.idle_time;
    if (epsilon > 0.0) {
        if (epsilon > result.epsilon_cap) {
            throw DomainError("epsilon exceeds the epsilon_cap the simulation recorded");
        }
        const auto& curve = result.idleness_curve;
        auto it = std::find_if(curve.begin(), curve.end(), [&](const auto& p) { return p.second >= epsilon; });
        if (it == curve.end()) return degenerate();
        double tau = it->first;
        if (it != curve.begin()) {
            const auto& prev = *(it - 1);
            if (it->second > prev.second) {
                tau = prev.first + (it->first - prev.first) * (epsilon - prev.second) / (it->second - prev.second);
            }
        }
        for (const auto& iv : result.early_idle) {
            const double pre = std::max(0.0, std::min(iv.end, tau) - iv.start);
            weights[static_cast<std::size_t>(iv.server)] -= pre;
        }
        for (double& w : weights) w = std::max(0.0, w);
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) return degenerate();
    return FairnessMeasure::from_weights(population.rates(), std::move(weights));
}

std::vector<IdlenessBin> empirical_conditional_idleness(const SimulationResult& result,
                                                        const ServerPopulation& population, int bins) {
    if (bins < 1) throw DomainError("bins must be at least 1");
    if (population.size() != result.idle_fraction.size()) throw DomainError("population does not match the result");
    const auto rates = population.rates();
    const auto [lo_it, hi_it] = std::minmax_element(rates.begin(), rates.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    const int used = hi > lo ? bins : 1;
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(used));
    for (std::size_t k = 0; k < rates.size(); ++k) {
        const int b = hi > lo ? std::min(used - 1, static_cast<int>((rates[k] - lo) / (hi - lo) * used)) : 0;
        members[static_cast<std::size_t>(b)].push_back(k);
    }
    std::vector<IdlenessBin> out;
    const double width = (hi - lo) / used;
    for (int b = 0; b < used; ++b) {
        const auto& m = members[static_cast<std::size_t>(b)];
        if (m.empty()) continue;
        std::vector<double> v;
        double rate = 0.0;
        for (auto k : m) {
            v.push_back(result.idle_fraction[k]);
            rate += rates[k];
        }
        out.push_back({lo + (b + 0.5) * width, rate / static_cast<double>(m.size()), mean_of(v), se_of(v),
                       static_cast<int>(m.size())});
    }
    return out;
}

std::vector<AllocationBin> empirical_allocation(const SimulationResult& result, const ServerPopulation& population,
                                                const std::vector<double>& rate_grid) {
    if (!(result.window() > 0.0)) throw DomainError("measurement window has zero width");
    if (rate_grid.size() < 2) throw DomainError("rate grid needs at least two edges");
    if (population.size() != result.idle_fraction.size()) throw DomainError("population does not match the result");
    const auto rates = population.rates();
    const std::size_t nb = rate_grid.size() - 1;
    const auto B = static_cast<std::size_t>(result.batches);
    std::vector<double> mass(nb, 0.0);
    std::vector<double> batch_mass(nb * B, 0.0);
    const double inv_n = 1.0 / static_cast<double>(result.n);
    for (std::size_t k = 0; k < rates.size(); ++k) {
        const double x = rates[k];
        if (x < rate_grid.front() || x > rate_grid.back()) continue;
        auto it = std::upper_bound(rate_grid.begin(), rate_grid.end(), x);
        std::size_t b = static_cast<std::size_t>(std::distance(rate_grid.begin(), it));
        b = std::clamp<std::size_t>(b, 1, nb) - 1;
        mass[b] += inv_n * result.idle_fraction[k];
        for (std::size_t j = 0; j < B; ++j) batch_mass[b * B + j] += inv_n * result.idle_fraction_batches[k * B + j];
    }
    std::vector<AllocationBin> out;
    for (std::size_t b = 0; b < nb; ++b) {
        std::vector<double> v(batch_mass.begin() + static_cast<std::ptrdiff_t>(b * B),
                              batch_mass.begin() + static_cast<std::ptrdiff_t>((b + 1) * B));
        out.push_back({rate_grid[b], rate_grid[b + 1], mass[b], se_of(v)});
    }
    return out;
}

}  // namespace hetsq
