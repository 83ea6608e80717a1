#pragma once

#include "marl/mdp.hpp"

#include <cstdint>
#include <functional>
#include <span>

namespace marl {

/// Local primal-dual estimate held by one agent.
struct AgentState {
    int index = 0;
    Matrix mu;      ///< occupancy estimate, kept in U
    Vector v;       ///< value estimate, kept in V
    Matrix mu_mix;  ///< post-consensus occupancy buffer
    Vector v_mix;   ///< post-consensus value buffer
};

/// Read-only snapshot handed to observers after every completed iteration.
struct RunView {
    std::int64_t iteration = 0;          ///< number of completed iterations
    std::span<const AgentState> agents;
    const Matrix& mu_bar;                ///< network average of mu_i
    const Vector& v_bar;                 ///< network average of v_i
    const Matrix& mu_bar_sum;            ///< sum of mu_bar over completed iterations
};

using Observer = std::function<void(const RunView&)>;

} // namespace marl
