#include "grif/expert.hpp"

#include <cmath>
#include <stdexcept>

namespace grif::sim {

namespace {

float toward(float from, float to) {
    const float d = to - from;
    return std::min(1.0f, std::max(-1.0f, d));
}

bool at(float x, float y, float tx, float ty) {
    return std::abs(x - tx) < 1e-4f && std::abs(y - ty) < 1e-4f;
}

}  // namespace

ExpertController::ExpertController(const SimState& s0, const TaskSpec& task) : task_(task) {
    if (find_object(s0.scene, task.subject) < 0)
        throw std::runtime_error("expert: subject not in scene");
    if (!feasible(s0, task)) throw std::runtime_error("expert: infeasible task");
    // Recompute the same plan feasible() validated.
    const auto dest = [&]() -> std::pair<int, int> {
        // feasible() guarantees a destination; re-derive it via the sim's
        // planner by probing candidate cells in the same order.
        const int subj = find_object(s0.scene, task.subject);
        const int sx = static_cast<int>(std::lround(s0.scene.objects[subj].x));
        const int sy = static_cast<int>(std::lround(s0.scene.objects[subj].y));
        switch (task.kind) {
            case TaskKind::place_on: {
                const int tgt = find_object(s0.scene, task.target_type);
                return {static_cast<int>(std::lround(s0.scene.objects[tgt].x)),
                        static_cast<int>(std::lround(s0.scene.objects[tgt].y))};
            }
            case TaskKind::move_dir: {
                const int dx = task.direction == 0 ? -1 : task.direction == 1 ? 1 : 0;
                const int dy = task.direction == 2 ? 1 : task.direction == 3 ? -1 : 0;
                const int subj_idx = subj;
                for (int dist = 3; dist >= 2; --dist) {
                    const int tx = sx + dx * dist, ty = sy + dy * dist;
                    if (drop_legal_at(s0, subj_idx, tx, ty)) return {tx, ty};
                }
                break;
            }
            case TaskKind::move_relative: {
                const int ref = find_object(s0.scene, task.ref_type);
                const int rx = static_cast<int>(std::lround(s0.scene.objects[ref].x));
                const int ry = static_cast<int>(std::lround(s0.scene.objects[ref].y));
                if (static_cast<Relation>(task.relation) == Relation::in_front_of) return {rx, ry + 1};
                const int nx[4] = {rx - 1, rx + 1, rx, rx};
                const int ny[4] = {ry, ry, ry - 1, ry + 1};
                for (int i = 0; i < 4; ++i) {
                    if (nx[i] == sx && ny[i] == sy) continue;
                    if (drop_legal_at(s0, subj, nx[i], ny[i])) return {nx[i], ny[i]};
                }
                break;
            }
        }
        throw std::runtime_error("expert: infeasible task");
    }();
    dest_x_ = dest.first;
    dest_y_ = dest.second;
}

Action ExpertController::act(const SimState& state) const {
    const int subj = find_object(state.scene, task_.subject);
    Action a;
    if (state.held != subj) {
        // Approach the subject and grasp.
        const float tx = state.scene.objects[subj].x;
        const float ty = state.scene.objects[subj].y;
        if (at(state.gripper_x, state.gripper_y, tx, ty)) {
            a.grip = 1.0f;
        } else {
            a.dx = toward(state.gripper_x, tx);
            a.dy = toward(state.gripper_y, ty);
            a.grip = state.held == subj ? 1.0f : 0.0f;
        }
    } else {
        // Carry to the destination and release.
        const float tx = static_cast<float>(dest_x_);
        const float ty = static_cast<float>(dest_y_);
        if (at(state.gripper_x, state.gripper_y, tx, ty)) {
            a.grip = -1.0f;
        } else {
            a.dx = toward(state.gripper_x, tx);
            a.dy = toward(state.gripper_y, ty);
            a.grip = 1.0f;  // keep holding
        }
    }
    return a;
}

bool ExpertController::done(const SimState& state) const {
    const int subj = find_object(state.scene, task_.subject);
    if (state.held == subj) return false;
    return static_cast<int>(std::lround(state.scene.objects[subj].x)) == dest_x_ &&
           static_cast<int>(std::lround(state.scene.objects[subj].y)) == dest_y_;
}

Action scripted_expert(const SimState& state, const TaskSpec& task) {
    const int subj = find_object(state.scene, task.subject);
    if (subj < 0) throw std::runtime_error("expert: subject not in scene");
    if (feasible(state, task)) {
        ExpertController ctl(state, task);
        return ctl.act(state);
    }
    // No plan from here; fall back to approaching the subject.
    Action a;
    const auto& o = state.scene.objects[subj];
    if (at(state.gripper_x, state.gripper_y, o.x, o.y) && state.held < 0) {
        a.grip = 1.0f;
    } else {
        a.dx = toward(state.gripper_x, o.x);
        a.dy = toward(state.gripper_y, o.y);
    }
    return a;
}

Trajectory run_expert(const SimState& s0, const TaskSpec& task, int horizon, Rng* noise_rng, double noise) {
    ExpertController ctl(s0, task);
    Trajectory traj;
    traj.task = task;
    traj.scene_id = s0.scene.scene_id;
    traj.states.push_back(s0);
    SimState cur = s0;
    for (int t = 0; t < horizon; ++t) {
        Action a = ctl.act(cur);
        if (noise_rng && noise > 0.0) {
            a.dx = static_cast<float>(a.dx + noise_rng->uniform(-noise, noise));
            a.dy = static_cast<float>(a.dy + noise_rng->uniform(-noise, noise));
        }
        cur = step(cur, a);
        traj.actions.push_back(a);
        traj.states.push_back(cur);
        if (ctl.done(cur)) break;
    }
    return traj;
}

}  // namespace grif::sim
