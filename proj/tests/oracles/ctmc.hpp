#pragma once

// Brute-force stationary distributions of small Markovian queues, used as
// oracles for the simulator.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

enum class Rule { Uniform, Fastest, Slowest, Weighted };

// Heterogeneous servers, Poisson(lambda) arrivals, exponential(gamma)
// patience, queue truncated at max_queue. State: busy set while no one
// waits, or (all busy, q waiting) for q = 1..max_queue. Returns the
// stationary idle probability of each server.
inline std::vector<double> idle_probabilities(const std::vector<double>& mu, double lambda, double gamma,
                                              Rule rule, int max_queue,
                                              const std::vector<double>& weight = {}) {
    const int N = static_cast<int>(mu.size());
    const int sets = 1 << N;
    const int full = sets - 1;
    const int S = sets + max_queue;
    auto queue_state = [&](int q) { return sets + q - 1; };  // q >= 1

    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(S, S);
    auto add = [&](int from, int to, double rate) {
        Q(from, to) += rate;
        Q(from, from) -= rate;
    };

    for (int b = 0; b < sets; ++b) {
        if (b == full) {
            if (max_queue > 0) add(b, queue_state(1), lambda);
        } else {
            std::vector<int> idle;
            for (int k = 0; k < N; ++k) {
                if (!(b & (1 << k))) idle.push_back(k);
            }
            std::vector<double> p(static_cast<std::size_t>(N), 0.0);
            if (rule == Rule::Uniform) {
                for (int k : idle) p[static_cast<std::size_t>(k)] = 1.0 / static_cast<double>(idle.size());
            } else if (rule == Rule::Weighted) {
                double tot = 0.0;
                for (int k : idle) tot += weight[static_cast<std::size_t>(k)];
                for (int k : idle) p[static_cast<std::size_t>(k)] = weight[static_cast<std::size_t>(k)] / tot;
            } else {
                int best = idle.front();
                for (int k : idle) {
                    const double a = mu[static_cast<std::size_t>(k)];
                    const double c = mu[static_cast<std::size_t>(best)];
                    if (rule == Rule::Fastest ? a > c : a < c) best = k;
                }
                p[static_cast<std::size_t>(best)] = 1.0;
            }
            for (int k : idle) {
                if (p[static_cast<std::size_t>(k)] > 0.0) add(b, b | (1 << k), lambda * p[static_cast<std::size_t>(k)]);
            }
        }
        for (int k = 0; k < N; ++k) {
            if (b & (1 << k)) add(b, b & ~(1 << k), mu[static_cast<std::size_t>(k)]);
        }
    }
    double total_mu = 0.0;
    for (double m : mu) total_mu += m;
    for (int q = 1; q <= max_queue; ++q) {
        const int s = queue_state(q);
        if (q < max_queue) add(s, queue_state(q + 1), lambda);
        const int down = q == 1 ? full : queue_state(q - 1);
        add(s, down, total_mu + q * gamma);
    }

    // pi Q = 0, sum pi = 1: replace one balance equation by normalization.
    Eigen::MatrixXd A = Q.transpose();
    A.row(S - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(S);
    rhs(S - 1) = 1.0;
    const Eigen::VectorXd pi = A.fullPivLu().solve(rhs);

    std::vector<double> idle(static_cast<std::size_t>(N), 0.0);
    for (int b = 0; b < sets; ++b) {
        for (int k = 0; k < N; ++k) {
            if (!(b & (1 << k))) idle[static_cast<std::size_t>(k)] += pi(b);
        }
    }
    return idle;
}

struct BirthDeath {
    double mean_idle;
    double mean_queue;
    double empty;  // P(X = 0)
};

// N identical servers of rate mu with abandonment: birth rate lambda, death
// rate min(x, N) mu + (x - N)^+ gamma, truncated at N + max_queue.
inline BirthDeath homogeneous_queue(int N, double mu, double lambda, double gamma, int max_queue) {
    const int top = N + max_queue;
    std::vector<double> w(static_cast<std::size_t>(top + 1));
    w[0] = 1.0;
    for (int x = 1; x <= top; ++x) {
        const double death = std::min(x, N) * mu + std::max(x - N, 0) * gamma;
        w[static_cast<std::size_t>(x)] = w[static_cast<std::size_t>(x - 1)] * lambda / death;
    }
    double z = 0.0;
    for (double v : w) z += v;
    BirthDeath out{0.0, 0.0, w[0] / z};
    for (int x = 0; x <= top; ++x) {
        const double p = w[static_cast<std::size_t>(x)] / z;
        out.mean_idle += p * std::max(N - x, 0);
        out.mean_queue += p * std::max(x - N, 0);
    }
    return out;
}

}  // namespace oracle
