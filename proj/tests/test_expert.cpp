#include <doctest.h>

#include <cmath>

#include "grif/expert.hpp"
#include "grif/instructions.hpp"

using namespace grif;
using sim::ObjectType;

TEST_SUITE("expert") {

TEST_CASE("on the subject and empty-handed, the expert closes the gripper") {
    auto st = sim::reset(sim::scene_by_name("train0"), 4);
    const int pepper = sim::find_object(st.scene, static_cast<uint8_t>(ObjectType::pepper));
    st.gripper_x = st.scene.objects[pepper].x;
    st.gripper_y = st.scene.objects[pepper].y;
    sim::TaskSpec task;
    task.kind = sim::TaskKind::place_on;
    task.subject = static_cast<uint8_t>(ObjectType::pepper);
    task.target_type = static_cast<uint8_t>(ObjectType::pan);
    const auto a = sim::scripted_expert(st, task);
    CHECK(a.grip > 0);
    CHECK(a.dx == 0);
    CHECK(a.dy == 0);
}

TEST_CASE("full place_on rollout is judged successful") {
    const auto& spec = sim::scene_by_name("train0");
    sim::TaskSpec task;
    task.kind = sim::TaskKind::place_on;
    task.subject = static_cast<uint8_t>(ObjectType::pepper);
    task.target_type = static_cast<uint8_t>(ObjectType::pan);
    for (uint64_t seed = 0; seed < 10; ++seed) {
        const auto s0 = sim::reset(spec, seed);
        if (!sim::feasible(s0, task)) continue;
        const auto traj = sim::run_expert(s0, task, 40);
        CHECK(sim::judge_success(traj));
        CHECK(traj.states.size() <= 41);
    }
}

TEST_CASE("expert succeeds on 1000 random feasible tasks within the horizon") {
    Rng rng(2077);
    int attempted = 0, succeeded = 0;
    const auto& lib = sim::scene_library();
    while (attempted < 1000) {
        const auto& spec = lib[rng.below(lib.size())];
        const auto tasks = sim::enumerate_tasks(spec);
        const auto& task = tasks[rng.below(tasks.size())];
        const auto s0 = sim::reset(spec, rng.next_u64());
        if (!sim::feasible(s0, task)) continue;
        ++attempted;
        const auto traj = sim::run_expert(s0, task, 40);
        if (sim::judge_success(traj)) ++succeeded;
        CHECK(traj.actions.size() == traj.states.size() - 1);
        CHECK(static_cast<int>(traj.actions.size()) <= 40);
    }
    CHECK(succeeded == 1000);
}

TEST_CASE("every task kind is judged successful on an expert rollout") {
    const auto& spec = sim::scene_by_name("evalA");  // knife, pepper, towel, pot
    for (const auto& task : sim::enumerate_tasks(spec)) {
        for (uint64_t seed = 0; seed < 40; ++seed) {
            const auto s0 = sim::reset(spec, seed);
            if (!sim::feasible(s0, task)) continue;
            const auto traj = sim::run_expert(s0, task, 40);
            CAPTURE(lang::make_instruction(task));
            CAPTURE(seed);
            CHECK(sim::judge_success(traj));
            break;
        }
    }
}

TEST_CASE("infeasible tasks are rejected at construction") {
    auto st = sim::reset(sim::scene_by_name("train0"), 4);
    sim::TaskSpec task;
    task.kind = sim::TaskKind::place_on;
    task.subject = static_cast<uint8_t>(ObjectType::towel);  // not in train0
    task.target_type = static_cast<uint8_t>(ObjectType::pan);
    CHECK_THROWS_AS(sim::ExpertController(st, task), std::runtime_error);
}

TEST_CASE("move_dir moves at least two cells in the stated direction") {
    const auto& spec = sim::scene_by_name("evalC");  // towel, pot
    for (int d = 0; d < 4; ++d) {
        sim::TaskSpec task;
        task.kind = sim::TaskKind::move_dir;
        task.subject = static_cast<uint8_t>(ObjectType::towel);
        task.direction = static_cast<uint8_t>(d);
        for (uint64_t seed = 0; seed < 50; ++seed) {
            const auto s0 = sim::reset(spec, seed);
            if (!sim::feasible(s0, task)) continue;
            const auto traj = sim::run_expert(s0, task, 40);
            REQUIRE(sim::judge_success(traj));
            break;
        }
    }
}

}  // TEST_SUITE
