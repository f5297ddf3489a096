#include "grif/sim.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace grif::sim {

namespace {

constexpr const char* kTypeNames[kNumTypes] = {"pepper", "pan", "knife", "cloth",
                                               "pot",    "mushroom", "spoon", "towel"};

float clamp1(float v) {
    if (!std::isfinite(v)) return 0.0f;
    return std::min(1.0f, std::max(-1.0f, v));
}

int cell_of(float v) { return static_cast<int>(std::lround(v)); }

}  // namespace

bool is_container(ObjectType t) {
    switch (t) {
        case ObjectType::pan:
        case ObjectType::cloth:
        case ObjectType::pot:
        case ObjectType::towel:
            return true;
        default:
            return false;
    }
}

const char* type_name(ObjectType t) { return kTypeNames[static_cast<int>(t)]; }

std::optional<ObjectType> type_from_name(const std::string& name) {
    for (int i = 0; i < kNumTypes; ++i)
        if (name == kTypeNames[i]) return static_cast<ObjectType>(i);
    return std::nullopt;
}

const char* kind_name(TaskKind k) {
    switch (k) {
        case TaskKind::place_on: return "place_on";
        case TaskKind::move_dir: return "move_dir";
        case TaskKind::move_relative: return "move_relative";
    }
    return "?";
}

TaskCombo parse_combo(const std::string& text) {
    const size_t colon = text.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("task combo '" + text + "' must be kind:subject");
    const std::string kind = text.substr(0, colon);
    const std::string subject = text.substr(colon + 1);
    TaskCombo combo{};
    if (kind == "place_on") combo.kind = TaskKind::place_on;
    else if (kind == "move_dir") combo.kind = TaskKind::move_dir;
    else if (kind == "move_relative") combo.kind = TaskKind::move_relative;
    else throw std::invalid_argument("unknown task kind '" + kind + "'");
    auto t = type_from_name(subject);
    if (!t) throw std::invalid_argument("unknown object type '" + subject + "'");
    combo.subject = static_cast<uint8_t>(*t);
    return combo;
}

// ---------------------------------------------------------------------------
// scene specs
// ---------------------------------------------------------------------------

const std::vector<SceneSpec>& scene_library() {
    using O = ObjectType;
    static const std::vector<SceneSpec> lib = {
        {"train0", {O::pepper, O::pan, O::knife}},
        {"train1", {O::mushroom, O::pot, O::spoon}},
        {"train2", {O::towel, O::knife, O::pepper, O::pot}},
        {"train3", {O::cloth, O::spoon, O::mushroom, O::pan}},
        {"train4", {O::pepper, O::mushroom, O::towel, O::spoon, O::pan}},
        {"train5", {O::knife, O::cloth, O::pot, O::towel}},
        {"evalA", {O::knife, O::pepper, O::towel, O::pot}},
        {"evalB", {O::mushroom, O::towel, O::spoon, O::pot}},
        {"evalC", {O::towel, O::pot}},
    };
    return lib;
}

const SceneSpec& scene_by_name(const std::string& name) {
    for (const auto& s : scene_library())
        if (s.name == name) return s;
    throw std::invalid_argument("unknown scene spec '" + name + "'");
}

// ---------------------------------------------------------------------------
// dynamics
// ---------------------------------------------------------------------------

SimState reset(const SceneSpec& spec, uint64_t seed, int grid_w, int grid_h, uint32_t scene_id) {
    const int n = static_cast<int>(spec.types.size());
    if (n < 2 || n > 5)
        throw std::invalid_argument("reset: scene '" + spec.name + "' must name 2..5 object types, has " +
                                    std::to_string(n));
    if (n > grid_w * grid_h) throw std::invalid_argument("reset: too many objects for grid");
    {
        std::set<ObjectType> distinct(spec.types.begin(), spec.types.end());
        if (static_cast<int>(distinct.size()) != n)
            throw std::invalid_argument("reset: scene '" + spec.name + "' repeats an object type");
    }

    Rng rng(seed);
    SimState s;
    s.scene.grid_w = grid_w;
    s.scene.grid_h = grid_h;
    s.scene.scene_id = scene_id;
    s.gripper_x = static_cast<float>(grid_w / 2);
    s.gripper_y = static_cast<float>(grid_h / 2);
    s.held = -1;
    s.t = 0;

    // Distinct cells via a partial Fisher-Yates over cell indices.
    std::vector<int> cells(static_cast<size_t>(grid_w) * grid_h);
    for (size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
    for (int i = 0; i < n; ++i) {
        const auto j = i + static_cast<int>(rng.below(cells.size() - i));
        std::swap(cells[i], cells[j]);
        ObjectInstance obj;
        obj.type = static_cast<uint8_t>(spec.types[static_cast<size_t>(i)]);
        obj.x = static_cast<float>(cells[i] % grid_w);
        obj.y = static_cast<float>(cells[i] / grid_w);
        s.scene.objects.push_back(obj);
    }
    return s;
}

bool drop_legal_at(const SimState& state, int held_idx, int cx, int cy) {
    if (cx < 0 || cx >= state.scene.grid_w || cy < 0 || cy >= state.scene.grid_h) return false;
    const bool held_is_container = is_container(static_cast<ObjectType>(state.scene.objects[held_idx].type));
    int occupants = 0;
    bool occupant_container = false;
    for (int i = 0; i < static_cast<int>(state.scene.objects.size()); ++i) {
        if (i == held_idx) continue;
        const auto& o = state.scene.objects[i];
        if (cell_of(o.x) == cx && cell_of(o.y) == cy) {
            ++occupants;
            occupant_container = is_container(static_cast<ObjectType>(o.type));
        }
    }
    if (occupants == 0) return true;
    if (occupants > 1) return false;
    // One occupant: the pair must be container + non-container.
    return occupant_container != held_is_container;
}

std::optional<std::pair<int, int>> nearest_drop_cell(const SimState& state, int held_idx, float gx, float gy) {
    const int cx = cell_of(gx), cy = cell_of(gy);
    const int max_r = state.scene.grid_w + state.scene.grid_h;
    for (int r = 0; r <= max_r; ++r) {
        // Cells at Manhattan radius r, scanned in a fixed order.
        for (int dy = -r; dy <= r; ++dy) {
            const int rem = r - std::abs(dy);
            for (int dx : rem == 0 ? std::vector<int>{0} : std::vector<int>{-rem, rem}) {
                const int x = cx + dx, y = cy + dy;
                if (drop_legal_at(state, held_idx, x, y)) return std::make_pair(x, y);
            }
        }
    }
    return std::nullopt;
}

SimState step(const SimState& state, const Action& action) {
    SimState s = state;
    const float dx = clamp1(action.dx);
    const float dy = clamp1(action.dy);
    const float grip = clamp1(action.grip);

    s.gripper_x = std::min(static_cast<float>(s.scene.grid_w - 1), std::max(0.0f, s.gripper_x + dx));
    s.gripper_y = std::min(static_cast<float>(s.scene.grid_h - 1), std::max(0.0f, s.gripper_y + dy));

    if (s.held >= 0) {
        s.scene.objects[s.held].x = s.gripper_x;
        s.scene.objects[s.held].y = s.gripper_y;
    }

    if (grip > 0.0f && s.held < 0) {
        const int cx = cell_of(s.gripper_x), cy = cell_of(s.gripper_y);
        int pick = -1;
        for (int i = 0; i < static_cast<int>(s.scene.objects.size()); ++i) {
            const auto& o = s.scene.objects[i];
            if (cell_of(o.x) == cx && cell_of(o.y) == cy) {
                const bool container = is_container(static_cast<ObjectType>(o.type));
                if (pick < 0 || !container) pick = i;  // non-container sits on top
                if (!container) break;
            }
        }
        if (pick >= 0) {
            s.held = pick;
            s.scene.objects[pick].x = s.gripper_x;
            s.scene.objects[pick].y = s.gripper_y;
        }
    } else if (grip <= 0.0f && s.held >= 0) {
        const auto cell = nearest_drop_cell(s, s.held, s.gripper_x, s.gripper_y);
        if (cell) {
            s.scene.objects[s.held].x = static_cast<float>(cell->first);
            s.scene.objects[s.held].y = static_cast<float>(cell->second);
            s.held = -1;
        }
        // No legal cell anywhere: keep holding.
    }

    s.t = state.t + 1;
    return s;
}

tc::Tensor render(const SimState& state) {
    const int w = state.scene.grid_w, h = state.scene.grid_h;
    std::vector<float> img(static_cast<size_t>(h) * w * kImageChannels, 0.0f);
    auto at = [&](int y, int x, int c) -> float& {
        return img[(static_cast<size_t>(y) * w + x) * kImageChannels + c];
    };
    for (const auto& o : state.scene.objects) {
        const int x = std::min(w - 1, std::max(0, cell_of(o.x)));
        const int y = std::min(h - 1, std::max(0, cell_of(o.y)));
        at(y, x, o.type) = 1.0f;
    }
    const int gx = std::min(w - 1, std::max(0, cell_of(state.gripper_x)));
    const int gy = std::min(h - 1, std::max(0, cell_of(state.gripper_y)));
    at(gy, gx, 8) = 1.0f;
    if (state.held >= 0) at(gy, gx, 9) = 1.0f;
    return tc::Tensor({h, w, kImageChannels}, std::move(img));
}

// ---------------------------------------------------------------------------
// tasks
// ---------------------------------------------------------------------------

std::vector<TaskSpec> enumerate_tasks(const SceneSpec& spec) {
    std::vector<TaskSpec> tasks;
    for (ObjectType subj : spec.types) {
        const bool subj_container = is_container(subj);
        if (!subj_container) {
            for (ObjectType tgt : spec.types) {
                if (tgt == subj || !is_container(tgt)) continue;
                TaskSpec t;
                t.kind = TaskKind::place_on;
                t.subject = static_cast<uint8_t>(subj);
                t.target_type = static_cast<uint8_t>(tgt);
                tasks.push_back(t);
            }
        }
        for (int d = 0; d < 4; ++d) {
            TaskSpec t;
            t.kind = TaskKind::move_dir;
            t.subject = static_cast<uint8_t>(subj);
            t.direction = static_cast<uint8_t>(d);
            tasks.push_back(t);
        }
        if (!subj_container) {
            for (ObjectType ref : spec.types) {
                if (ref == subj || !is_container(ref)) continue;
                for (int rel = 0; rel < 2; ++rel) {
                    TaskSpec t;
                    t.kind = TaskKind::move_relative;
                    t.subject = static_cast<uint8_t>(subj);
                    t.ref_type = static_cast<uint8_t>(ref);
                    t.relation = static_cast<uint8_t>(rel);
                    tasks.push_back(t);
                }
            }
        }
    }
    return tasks;
}

int find_object(const Scene& scene, uint8_t type) {
    for (int i = 0; i < static_cast<int>(scene.objects.size()); ++i)
        if (scene.objects[i].type == type) return i;
    return -1;
}

namespace {

std::pair<int, int> dir_delta(Direction d) {
    switch (d) {
        case Direction::left: return {-1, 0};
        case Direction::right: return {1, 0};
        case Direction::front: return {0, 1};
        case Direction::back: return {0, -1};
    }
    return {0, 0};
}

// The expert's destination cell for a task given the initial state, or
// nullopt when no legal plan exists.
std::optional<std::pair<int, int>> plan_destination(const SimState& s0, const TaskSpec& task) {
    const int subj = find_object(s0.scene, task.subject);
    if (subj < 0) return std::nullopt;
    const int sx = cell_of(s0.scene.objects[subj].x);
    const int sy = cell_of(s0.scene.objects[subj].y);

    switch (task.kind) {
        case TaskKind::place_on: {
            const int tgt = find_object(s0.scene, task.target_type);
            if (tgt < 0 || tgt == subj) return std::nullopt;
            const int tx = cell_of(s0.scene.objects[tgt].x);
            const int ty = cell_of(s0.scene.objects[tgt].y);
            if (!drop_legal_at(s0, subj, tx, ty)) return std::nullopt;
            return std::make_pair(tx, ty);
        }
        case TaskKind::move_dir: {
            const auto [dx, dy] = dir_delta(static_cast<Direction>(task.direction));
            for (int dist = 3; dist >= 2; --dist) {
                const int tx = sx + dx * dist, ty = sy + dy * dist;
                if (drop_legal_at(s0, subj, tx, ty)) return std::make_pair(tx, ty);
            }
            return std::nullopt;
        }
        case TaskKind::move_relative: {
            const int ref = find_object(s0.scene, task.ref_type);
            if (ref < 0 || ref == subj) return std::nullopt;
            const int rx = cell_of(s0.scene.objects[ref].x);
            const int ry = cell_of(s0.scene.objects[ref].y);
            if (static_cast<Relation>(task.relation) == Relation::in_front_of) {
                if (drop_legal_at(s0, subj, rx, ry + 1) &&
                    !(rx == sx && ry + 1 == sy))  // require actual movement
                    return std::make_pair(rx, ry + 1);
                return std::nullopt;
            }
            // next_to: first legal 4-neighbor in fixed order.
            const int nx[4] = {rx - 1, rx + 1, rx, rx};
            const int ny[4] = {ry, ry, ry - 1, ry + 1};
            for (int i = 0; i < 4; ++i) {
                if (nx[i] == sx && ny[i] == sy) continue;
                if (drop_legal_at(s0, subj, nx[i], ny[i])) return std::make_pair(nx[i], ny[i]);
            }
            return std::nullopt;
        }
    }
    return std::nullopt;
}

}  // namespace

bool feasible(const SimState& state, const TaskSpec& task) {
    return plan_destination(state, task).has_value();
}

bool judge_final(const SimState& s0, const SimState& sH, const TaskSpec& task) {
    const int subj0 = find_object(s0.scene, task.subject);
    const int subjH = find_object(sH.scene, task.subject);
    if (subj0 < 0 || subjH < 0) return false;

    // Bystander rule: any non-subject object displaced between the endpoint
    // states fails the episode.
    if (s0.scene.objects.size() != sH.scene.objects.size()) return false;
    for (size_t i = 0; i < s0.scene.objects.size(); ++i) {
        if (static_cast<int>(i) == subj0) continue;
        if (cell_of(s0.scene.objects[i].x) != cell_of(sH.scene.objects[i].x) ||
            cell_of(s0.scene.objects[i].y) != cell_of(sH.scene.objects[i].y))
            return false;
    }

    const int x0 = cell_of(s0.scene.objects[subj0].x), y0 = cell_of(s0.scene.objects[subj0].y);
    const int x1 = cell_of(sH.scene.objects[subjH].x), y1 = cell_of(sH.scene.objects[subjH].y);

    switch (task.kind) {
        case TaskKind::place_on: {
            const int tgt = find_object(sH.scene, task.target_type);
            if (tgt < 0) return false;
            return x1 == cell_of(sH.scene.objects[tgt].x) && y1 == cell_of(sH.scene.objects[tgt].y);
        }
        case TaskKind::move_dir: {
            const auto [dx, dy] = dir_delta(static_cast<Direction>(task.direction));
            const int along = dx * (x1 - x0) + dy * (y1 - y0);
            return along >= 2;
        }
        case TaskKind::move_relative: {
            const int ref = find_object(sH.scene, task.ref_type);
            if (ref < 0) return false;
            const int rx = cell_of(sH.scene.objects[ref].x), ry = cell_of(sH.scene.objects[ref].y);
            if (static_cast<Relation>(task.relation) == Relation::in_front_of)
                return x1 == rx && y1 == ry + 1;
            return std::abs(x1 - rx) + std::abs(y1 - ry) == 1;
        }
    }
    return false;
}

bool judge_success(const Trajectory& traj) {
    if (traj.states.empty()) return false;
    const SimState& s0 = traj.states.front();
    const SimState& sH = traj.states.back();
    const int subj = find_object(s0.scene, traj.task.subject);
    if (subj < 0) return false;
    // Dragging a bystander at any point fails even if it is later restored.
    for (const auto& st : traj.states) {
        for (size_t i = 0; i < st.scene.objects.size(); ++i) {
            if (static_cast<int>(i) == subj) continue;
            if (cell_of(st.scene.objects[i].x) != cell_of(s0.scene.objects[i].x) ||
                cell_of(st.scene.objects[i].y) != cell_of(s0.scene.objects[i].y))
                return false;
        }
    }
    return judge_final(s0, sH, traj.task);
}

}  // namespace grif::sim
