#pragma once

#include <cstdint>
#include <vector>

namespace neon {

// Finite deterministic MDP with per-transition rewards and episode-ending
// flags. Terminal transitions contribute no successor value.
struct TabularMdp {
  int num_states = 0;
  int num_actions = 0;
  int start_state = 0;
  std::vector<int> next;        // state*num_actions + action -> successor
  std::vector<double> reward;   // state*num_actions + action
  std::vector<std::uint8_t> done;  // state*num_actions + action

  std::size_t idx(int s, int a) const {
    return static_cast<std::size_t>(s) * num_actions + static_cast<std::size_t>(a);
  }
};

struct ValueIterationResult {
  std::vector<double> values;
  std::vector<int> policy;   // greedy, lowest-index tie-break
  double residual = 0.0;     // final Bellman residual (sup norm)
  int iterations = 0;
};

ValueIterationResult value_iteration(const TabularMdp& mdp, double gamma, double tol = 1e-10,
                                     int max_iterations = 1000000);

// sup-norm Bellman residual of a value vector.
double bellman_residual(const TabularMdp& mdp, const std::vector<double>& values, double gamma);

// Q-value table over (state, action); unvisited entries are 0.
struct TabularQ {
  int num_states = 0;
  int num_actions = 0;
  double alpha = 0.1;
  double gamma = 0.99;
  std::vector<double> q;

  TabularQ(int states, int actions, double alpha, double gamma)
      : num_states(states),
        num_actions(actions),
        alpha(alpha),
        gamma(gamma),
        q(static_cast<std::size_t>(states) * actions, 0.0) {}

  double& at(int s, int a) { return q[static_cast<std::size_t>(s) * num_actions + a]; }
  double at(int s, int a) const { return q[static_cast<std::size_t>(s) * num_actions + a]; }

  int greedy(int s) const;  // lowest-index tie-break
};

// One Q-learning update:
//   delta = r + gamma * max_a Q(s',a) * (1 - terminal) - Q(s,a)
//   Q(s,a) += alpha * delta
void tabular_q_update(TabularQ& q, int s, int a, double r, int s_next, bool terminal);

// Exact expected undiscounted return of the uniform-random policy, by
// propagating the state distribution through the (acyclic) MDP.
double uniform_random_policy_return(const TabularMdp& mdp, int max_steps = 1000000);

}  // namespace neon
