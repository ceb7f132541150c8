#include "neon/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace neon {

namespace {

double backup(const TabularMdp& mdp, const std::vector<double>& values, double gamma, int s,
              int a) {
  const std::size_t i = mdp.idx(s, a);
  const double tail = mdp.done[i] ? 0.0 : gamma * values[static_cast<std::size_t>(mdp.next[i])];
  return mdp.reward[i] + tail;
}

}  // namespace

ValueIterationResult value_iteration(const TabularMdp& mdp, double gamma, double tol,
                                     int max_iterations) {
  if (mdp.num_states <= 0 || mdp.num_actions <= 0)
    throw std::invalid_argument("value_iteration: empty MDP");

  ValueIterationResult out;
  out.values.assign(static_cast<std::size_t>(mdp.num_states), 0.0);
  std::vector<double> next(out.values);

  for (out.iterations = 0; out.iterations < max_iterations; ++out.iterations) {
    double residual = 0.0;
    for (int s = 0; s < mdp.num_states; ++s) {
      double best = backup(mdp, out.values, gamma, s, 0);
      for (int a = 1; a < mdp.num_actions; ++a)
        best = std::max(best, backup(mdp, out.values, gamma, s, a));
      residual = std::max(residual, std::fabs(best - out.values[static_cast<std::size_t>(s)]));
      next[static_cast<std::size_t>(s)] = best;
    }
    out.values.swap(next);
    out.residual = residual;
    if (residual <= tol) break;
  }

  out.policy.assign(static_cast<std::size_t>(mdp.num_states), 0);
  for (int s = 0; s < mdp.num_states; ++s) {
    int best_a = 0;
    double best = backup(mdp, out.values, gamma, s, 0);
    for (int a = 1; a < mdp.num_actions; ++a) {
      const double v = backup(mdp, out.values, gamma, s, a);
      if (v > best) {
        best = v;
        best_a = a;
      }
    }
    out.policy[static_cast<std::size_t>(s)] = best_a;
  }
  return out;
}

double bellman_residual(const TabularMdp& mdp, const std::vector<double>& values, double gamma) {
  double residual = 0.0;
  for (int s = 0; s < mdp.num_states; ++s) {
    double best = backup(mdp, values, gamma, s, 0);
    for (int a = 1; a < mdp.num_actions; ++a)
      best = std::max(best, backup(mdp, values, gamma, s, a));
    residual = std::max(residual, std::fabs(best - values[static_cast<std::size_t>(s)]));
  }
  return residual;
}

int TabularQ::greedy(int s) const {
  int best_a = 0;
  double best = at(s, 0);
  for (int a = 1; a < num_actions; ++a) {
    if (at(s, a) > best) {
      best = at(s, a);
      best_a = a;
    }
  }
  return best_a;
}

void tabular_q_update(TabularQ& q, int s, int a, double r, int s_next, bool terminal) {
  double max_next = 0.0;
  if (!terminal) {
    max_next = q.at(s_next, 0);
    for (int an = 1; an < q.num_actions; ++an) max_next = std::max(max_next, q.at(s_next, an));
  }
  const double delta = r + q.gamma * max_next - q.at(s, a);
  q.at(s, a) += q.alpha * delta;
}

double uniform_random_policy_return(const TabularMdp& mdp, int max_steps) {
  std::vector<double> dist(static_cast<std::size_t>(mdp.num_states), 0.0);
  dist[static_cast<std::size_t>(mdp.start_state)] = 1.0;
  const double p_action = 1.0 / static_cast<double>(mdp.num_actions);

  double expected = 0.0;
  std::vector<double> next_dist(dist.size());
  for (int step = 0; step < max_steps; ++step) {
    std::fill(next_dist.begin(), next_dist.end(), 0.0);
    double live_mass = 0.0;
    for (int s = 0; s < mdp.num_states; ++s) {
      const double p = dist[static_cast<std::size_t>(s)];
      if (p == 0.0) continue;
      for (int a = 0; a < mdp.num_actions; ++a) {
        const std::size_t i = mdp.idx(s, a);
        expected += p * p_action * mdp.reward[i];
        if (!mdp.done[i]) {
          next_dist[static_cast<std::size_t>(mdp.next[i])] += p * p_action;
          live_mass += p * p_action;
        }
      }
    }
    dist.swap(next_dist);
    if (live_mass < 1e-15) break;
  }
  return expected;
}

}  // namespace neon
