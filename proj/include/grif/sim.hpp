#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "grif/rng.hpp"
#include "grif/tensor.hpp"

namespace grif::sim {

// ---------------------------------------------------------------------------
// object vocabulary
// ---------------------------------------------------------------------------

enum class ObjectType : uint8_t { pepper = 0, pan, knife, cloth, pot, mushroom, spoon, towel };
inline constexpr int kNumTypes = 8;

bool is_container(ObjectType t);
const char* type_name(ObjectType t);
std::optional<ObjectType> type_from_name(const std::string& name);

// ---------------------------------------------------------------------------
// world state
// ---------------------------------------------------------------------------

struct ObjectInstance {
    uint8_t type = 0;  // ObjectType
    float x = 0, y = 0;  // cell units; integral when at rest
};

struct Scene {
    int grid_w = 12;
    int grid_h = 12;
    std::vector<ObjectInstance> objects;  // 2..5, distinct types
    uint32_t scene_id = 0;
};

struct SimState {
    Scene scene;
    float gripper_x = 0, gripper_y = 0;
    int held = -1;  // object index or -1
    int t = 0;
};

// dx, dy in cells per step, grip > 0 closes; all clamped to [-1, 1].
struct Action {
    float dx = 0, dy = 0, grip = 0;
};

enum class TaskKind : uint8_t { place_on = 0, move_dir, move_relative };
enum class Direction : uint8_t { left = 0, right, front, back };  // front = +y
enum class Relation : uint8_t { next_to = 0, in_front_of };

inline constexpr uint8_t kNone = 255;

struct TaskSpec {
    TaskKind kind = TaskKind::place_on;
    uint8_t subject = 0;        // ObjectType
    uint8_t target_type = kNone;  // place_on
    uint8_t direction = kNone;    // move_dir
    uint8_t ref_type = kNone;     // move_relative
    uint8_t relation = kNone;     // move_relative

    bool operator==(const TaskSpec&) const = default;
};

// (kind, subject) pair; the unit of instruction hold-out.
struct TaskCombo {
    TaskKind kind;
    uint8_t subject;
    bool operator==(const TaskCombo&) const = default;
};
TaskCombo parse_combo(const std::string& text);  // "move_dir:towel"
const char* kind_name(TaskKind k);

struct Trajectory {
    std::vector<SimState> states;   // s_0 .. s_H
    std::vector<Action> actions;    // a_0 .. a_{H-1}
    TaskSpec task;
    std::string instruction;  // empty iff unlabeled
    uint32_t scene_id = 0;
};

// ---------------------------------------------------------------------------
// scene specs
// ---------------------------------------------------------------------------

struct SceneSpec {
    std::string name;
    std::vector<ObjectType> types;  // distinct
};

const std::vector<SceneSpec>& scene_library();
const SceneSpec& scene_by_name(const std::string& name);

// ---------------------------------------------------------------------------
// dynamics
// ---------------------------------------------------------------------------

// Seeded procedural placement on distinct cells; gripper starts at the grid
// center, nothing held.
SimState reset(const SceneSpec& spec, uint64_t seed, int grid_w = 12, int grid_h = 12, uint32_t scene_id = 0);

// Deterministic transition. Off-grid motion clamps to the boundary; closing
// over an at-rest object grasps it (non-containers first); opening drops the
// held object at the nearest legal cell. Never throws: every action is legal.
SimState step(const SimState& state, const Action& action);

// (grid_h, grid_w, 10) feature image: channels 0..7 one-hot object types,
// 8 gripper cell, 9 held flag at the gripper cell.
inline constexpr int kImageChannels = 10;
tc::Tensor render(const SimState& state);

// ---------------------------------------------------------------------------
// tasks
// ---------------------------------------------------------------------------

// All syntactically valid tasks for a scene spec, in deterministic order.
// place_on and move_relative take non-container subjects and container
// targets/refs; move_dir takes any subject.
std::vector<TaskSpec> enumerate_tasks(const SceneSpec& spec);

// Placement-dependent check: the expert plan for this task exists in `state`.
bool feasible(const SimState& state, const TaskSpec& task);

// Success from initial and final states. Grasping any bystander object that
// leaves it displaced is a failure regardless of the goal condition.
bool judge_final(const SimState& s0, const SimState& sH, const TaskSpec& task);

// Full-trajectory judgment. In addition to judge_final, a bystander object
// displaced at any intermediate step fails the episode.
bool judge_success(const Trajectory& traj);

int find_object(const Scene& scene, uint8_t type);  // -1 if absent

// Nearest legal drop cell for object `held_idx` released at the gripper; used
// by step() and by expert planning.
std::optional<std::pair<int, int>> nearest_drop_cell(const SimState& state, int held_idx, float gx, float gy);
bool drop_legal_at(const SimState& state, int held_idx, int cx, int cy);

}  // namespace grif::sim
