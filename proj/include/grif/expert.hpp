#pragma once

#include <optional>

#include "grif/rng.hpp"
#include "grif/sim.hpp"

namespace grif::sim {

// Greedy scripted demonstrator: approach the subject, grasp, carry to the
// destination planned from the initial state, release. Completes every
// feasible task well inside the 40-step horizon.
class ExpertController {
public:
    // Throws std::runtime_error if the task is infeasible in s0.
    ExpertController(const SimState& s0, const TaskSpec& task);

    Action act(const SimState& state) const;
    bool done(const SimState& state) const;  // subject released at destination

private:
    TaskSpec task_;
    int dest_x_ = 0, dest_y_ = 0;
};

// Single-step rule shortcut used where no carry plan is needed yet: on the
// subject cell and empty-handed it closes the gripper, otherwise it moves
// toward the subject.
Action scripted_expert(const SimState& state, const TaskSpec& task);

// Roll out the expert from s0 for at most `horizon` steps. Optional uniform
// action noise perturbs dx/dy before clamping (unlabeled play data).
Trajectory run_expert(const SimState& s0, const TaskSpec& task, int horizon, Rng* noise_rng = nullptr,
                      double noise = 0.0);

}  // namespace grif::sim
