#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mhc {

// An MCMC run. draws[t] is the state after step t + 1; init is the state
// before step 1.
struct Chain {
  std::string algorithm;
  std::string model;
  std::vector<std::string> names;
  std::vector<bool> discrete;
  std::vector<double> init;
  std::vector<std::vector<double>> draws;
  std::vector<double> log_lik_est;
  std::vector<double> log_prior;
  std::vector<std::uint8_t> accepted;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  double wall_clock_seconds = 0.0;
  std::size_t failed_steps = 0;

  std::size_t length() const { return draws.size(); }
  std::size_t dim() const { return names.size(); }

  double acceptance_rate(std::size_t from = 0) const {
    if (accepted.size() <= from) return 0.0;
    double s = 0.0;
    for (std::size_t t = from; t < accepted.size(); ++t) s += accepted[t];
    return s / static_cast<double>(accepted.size() - from);
  }

  std::vector<double> coordinate(std::size_t j, std::size_t burn_in = 0) const {
    std::vector<double> out;
    for (std::size_t t = burn_in; t < draws.size(); ++t) out.push_back(draws[t][j]);
    return out;
  }

  void reserve(std::size_t T) {
    draws.reserve(T);
    log_lik_est.reserve(T);
    log_prior.reserve(T);
    accepted.reserve(T);
  }

  void push(const std::vector<double>& theta, double ll, double lp, bool acc) {
    draws.push_back(theta);
    log_lik_est.push_back(ll);
    log_prior.push_back(lp);
    accepted.push_back(acc ? 1 : 0);
  }
};

}  // namespace mhc
