#include <doctest.h>

#include <cmath>

#include "grif/sim.hpp"

using namespace grif;
using sim::ObjectType;

namespace {

sim::SceneSpec spec3() { return {"t3", {ObjectType::pepper, ObjectType::pan, ObjectType::knife}}; }

bool states_equal(const sim::SimState& a, const sim::SimState& b) {
    if (a.gripper_x != b.gripper_x || a.gripper_y != b.gripper_y || a.held != b.held) return false;
    if (a.scene.objects.size() != b.scene.objects.size()) return false;
    for (size_t i = 0; i < a.scene.objects.size(); ++i) {
        if (a.scene.objects[i].type != b.scene.objects[i].type) return false;
        if (a.scene.objects[i].x != b.scene.objects[i].x) return false;
        if (a.scene.objects[i].y != b.scene.objects[i].y) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("reset is deterministic in (spec, seed)") {
    const auto a = sim::reset(spec3(), 17);
    const auto b = sim::reset(spec3(), 17);
    CHECK(states_equal(a, b));
    const auto c = sim::reset(spec3(), 18);
    CHECK(!states_equal(a, c));
}

TEST_CASE("five-object placement has distinct cells") {
    sim::SceneSpec s{"t5", {ObjectType::pepper, ObjectType::pan, ObjectType::knife, ObjectType::pot,
                            ObjectType::towel}};
    const auto st = sim::reset(s, 3);
    REQUIRE(st.scene.objects.size() == 5);
    for (size_t i = 0; i < 5; ++i)
        for (size_t j = i + 1; j < 5; ++j) {
            const bool same = st.scene.objects[i].x == st.scene.objects[j].x &&
                              st.scene.objects[i].y == st.scene.objects[j].y;
            CHECK(!same);
        }
}

TEST_CASE("one hundred seeds never place out of bounds") {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        const auto st = sim::reset(spec3(), seed);
        for (const auto& o : st.scene.objects) {
            CHECK(o.x >= 0);
            CHECK(o.x <= 11);
            CHECK(o.y >= 0);
            CHECK(o.y <= 11);
        }
    }
}

TEST_CASE("reset validates the spec") {
    CHECK_THROWS_AS(sim::reset({"one", {ObjectType::pepper}}, 0), std::invalid_argument);
    CHECK_THROWS_AS(sim::reset({"six", {ObjectType::pepper, ObjectType::pan, ObjectType::knife, ObjectType::pot,
                                        ObjectType::towel, ObjectType::cloth}},
                               0),
                    std::invalid_argument);
    CHECK_THROWS_AS(sim::reset({"dup", {ObjectType::pepper, ObjectType::pepper}}, 0), std::invalid_argument);
}

TEST_CASE("noop action only advances time") {
    const auto s0 = sim::reset(spec3(), 5);
    const auto s1 = sim::step(s0, {0, 0, 0});
    CHECK(states_equal(s0, s1));
    CHECK(s1.t == s0.t + 1);
}

TEST_CASE("pick, carry one cell right, drop") {
    auto st = sim::reset(spec3(), 5);
    // Teleport-by-steps: walk the gripper onto the pepper.
    const int pepper = sim::find_object(st.scene, static_cast<uint8_t>(ObjectType::pepper));
    REQUIRE(pepper >= 0);
    const float px = st.scene.objects[pepper].x, py = st.scene.objects[pepper].y;
    for (int guard = 0; guard < 64; ++guard) {
        const float dx = px - st.gripper_x, dy = py - st.gripper_y;
        if (std::abs(dx) < 1e-6 && std::abs(dy) < 1e-6) break;
        st = sim::step(st, {std::clamp(dx, -1.0f, 1.0f), std::clamp(dy, -1.0f, 1.0f), 0});
    }
    REQUIRE(st.gripper_x == px);
    REQUIRE(st.gripper_y == py);

    st = sim::step(st, {0, 0, 1});  // close
    CHECK(st.held == pepper);
    st = sim::step(st, {1, 0, 1});  // carry right
    CHECK(st.scene.objects[pepper].x == px + 1);
    st = sim::step(st, {0, 0, -1});  // open
    CHECK(st.held == -1);
    CHECK(st.scene.objects[pepper].x == px + 1);
    CHECK(st.scene.objects[pepper].y == py);
}

TEST_CASE("oversized deltas clamp to one cell and the grid edge") {
    auto st = sim::reset(spec3(), 5);
    const float gx = st.gripper_x;
    auto moved = sim::step(st, {5.0f, 0, 0});
    CHECK(moved.gripper_x == gx + 1);
    // Walk to the right edge; position must clamp at grid_w - 1.
    for (int i = 0; i < 30; ++i) moved = sim::step(moved, {1, 0, 0});
    CHECK(moved.gripper_x == 11);
    // Non-finite input is treated as no motion.
    auto frozen = sim::step(moved, {std::numeric_limits<float>::quiet_NaN(), 0, 0});
    CHECK(frozen.gripper_x == 11);
}

TEST_CASE("render: empty scene has empty object channels") {
    sim::SimState st;
    st.gripper_x = 6;
    st.gripper_y = 6;
    const auto img = sim::render(st);
    REQUIRE(img.shape() == std::vector<int>{12, 12, 10});
    double object_sum = 0;
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x)
            for (int c = 0; c < 8; ++c) object_sum += img.data()[(static_cast<size_t>(y) * 12 + x) * 10 + c];
    CHECK(object_sum == 0.0);
    CHECK(img.data()[(6 * 12 + 6) * 10 + 8] == 1.0f);  // gripper mask
}

TEST_CASE("render: object channels sum to the object count") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const auto st = sim::reset(spec3(), seed);
        const auto img = sim::render(st);
        double object_sum = 0;
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 12; ++x)
                for (int c = 0; c < 8; ++c) object_sum += img.data()[(static_cast<size_t>(y) * 12 + x) * 10 + c];
        CHECK(object_sum == doctest::Approx(3.0));
    }
}

TEST_CASE("render is pure") {
    const auto st = sim::reset(spec3(), 31);
    const auto a = sim::render(st);
    const auto b = sim::render(st);
    CHECK(a.data() == b.data());
}

TEST_CASE("held flag channel tracks grasping") {
    auto st = sim::reset(spec3(), 5);
    const int pepper = sim::find_object(st.scene, static_cast<uint8_t>(ObjectType::pepper));
    st.gripper_x = st.scene.objects[pepper].x;
    st.gripper_y = st.scene.objects[pepper].y;
    st = sim::step(st, {0, 0, 1});
    REQUIRE(st.held == pepper);
    const auto img = sim::render(st);
    const int gx = static_cast<int>(std::lround(st.gripper_x)), gy = static_cast<int>(std::lround(st.gripper_y));
    CHECK(img.data()[(static_cast<size_t>(gy) * 12 + gx) * 10 + 9] == 1.0f);
}

TEST_CASE("judge: zero-length trajectory fails move_dir") {
    const auto st = sim::reset(spec3(), 2);
    sim::TaskSpec task;
    task.kind = sim::TaskKind::move_dir;
    task.subject = static_cast<uint8_t>(ObjectType::pepper);
    task.direction = static_cast<uint8_t>(sim::Direction::left);
    CHECK(!sim::judge_final(st, st, task));
}

TEST_CASE("judge: dragging a bystander fails even if the goal is reached") {
    // Scene with pepper and pan; drag the knife (bystander) one cell, then
    // complete place_on(pepper, pan) by hand.
    auto st = sim::reset(spec3(), 8);
    sim::Trajectory traj;
    sim::TaskSpec task;
    task.kind = sim::TaskKind::place_on;
    task.subject = static_cast<uint8_t>(ObjectType::pepper);
    task.target_type = static_cast<uint8_t>(ObjectType::pan);
    traj.task = task;
    traj.states.push_back(st);

    auto walk_to = [&](float tx, float ty, float grip) {
        for (int guard = 0; guard < 64; ++guard) {
            const float dx = tx - st.gripper_x, dy = ty - st.gripper_y;
            if (std::abs(dx) < 1e-6 && std::abs(dy) < 1e-6) break;
            sim::Action a{std::clamp(dx, -1.0f, 1.0f), std::clamp(dy, -1.0f, 1.0f), grip};
            st = sim::step(st, a);
            traj.actions.push_back(a);
            traj.states.push_back(st);
        }
    };
    auto grip_action = [&](float g) {
        sim::Action a{0, 0, g};
        st = sim::step(st, a);
        traj.actions.push_back(a);
        traj.states.push_back(st);
    };

    const int knife = sim::find_object(st.scene, static_cast<uint8_t>(ObjectType::knife));
    const int pepper = sim::find_object(st.scene, static_cast<uint8_t>(ObjectType::pepper));
    const int pan = sim::find_object(st.scene, static_cast<uint8_t>(ObjectType::pan));

    // Drag the knife.
    walk_to(st.scene.objects[knife].x, st.scene.objects[knife].y, 0);
    grip_action(1);
    REQUIRE(st.held == knife);
    walk_to(std::max(0.0f, st.gripper_x - 1), st.gripper_y, 1);
    grip_action(-1);

    // Now do the actual task.
    walk_to(st.scene.objects[pepper].x, st.scene.objects[pepper].y, 0);
    grip_action(1);
    REQUIRE(st.held == pepper);
    walk_to(st.scene.objects[pan].x, st.scene.objects[pan].y, 1);
    grip_action(-1);

    // Goal condition holds...
    const int sx = static_cast<int>(std::lround(st.scene.objects[pepper].x));
    const int tx = static_cast<int>(std::lround(st.scene.objects[pan].x));
    REQUIRE(sx == tx);
    // ...but the dragged bystander fails the episode.
    CHECK(!sim::judge_success(traj));
}

TEST_CASE("drop onto an occupied non-container cell relocates to a legal cell") {
    auto st = sim::reset(spec3(), 8);
    const int pepper = sim::find_object(st.scene, static_cast<uint8_t>(ObjectType::pepper));
    const int knife = sim::find_object(st.scene, static_cast<uint8_t>(ObjectType::knife));
    st.gripper_x = st.scene.objects[pepper].x;
    st.gripper_y = st.scene.objects[pepper].y;
    st = sim::step(st, {0, 0, 1});
    REQUIRE(st.held == pepper);
    // Walk over the knife cell and open: pepper may not rest on the knife.
    for (int guard = 0; guard < 64; ++guard) {
        const float dx = st.scene.objects[knife].x - st.gripper_x;
        const float dy = st.scene.objects[knife].y - st.gripper_y;
        if (std::abs(dx) < 1e-6 && std::abs(dy) < 1e-6) break;
        st = sim::step(st, {std::clamp(dx, -1.0f, 1.0f), std::clamp(dy, -1.0f, 1.0f), 1});
    }
    st = sim::step(st, {0, 0, -1});
    CHECK(st.held == -1);
    const bool same_cell = std::lround(st.scene.objects[pepper].x) == std::lround(st.scene.objects[knife].x) &&
                           std::lround(st.scene.objects[pepper].y) == std::lround(st.scene.objects[knife].y);
    CHECK(!same_cell);
}

TEST_CASE("task enumeration excludes container subjects for place_on") {
    const auto tasks = sim::enumerate_tasks(sim::scene_by_name("train0"));
    for (const auto& t : tasks) {
        if (t.kind == sim::TaskKind::place_on) {
            CHECK(!sim::is_container(static_cast<ObjectType>(t.subject)));
            CHECK(sim::is_container(static_cast<ObjectType>(t.target_type)));
        }
    }
    CHECK(!tasks.empty());
}

}  // TEST_SUITE
