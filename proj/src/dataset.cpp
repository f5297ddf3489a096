#include "grif/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <stdexcept>

#include "grif/binio.hpp"
#include "grif/expert.hpp"
#include "grif/instructions.hpp"

namespace grif::data {

namespace {

constexpr char kMagic[9] = {'G', 'R', 'I', 'F', 'D', 'A', 'T', 'A', '\0'};
constexpr uint32_t kVersion = 1;

std::vector<const sim::SceneSpec*> specs_from_csv(const std::string& csv) {
    std::vector<const sim::SceneSpec*> specs;
    for (const auto& name : split_csv(csv)) specs.push_back(&sim::scene_by_name(name));
    if (specs.empty()) throw std::runtime_error("gen-data: no scenes configured");
    return specs;
}

struct GenContext {
    int grid_w, grid_h, horizon;
    std::vector<const sim::SceneSpec*> specs;  // train scenes then unseen eval scenes
    size_t n_train_specs = 0;
    std::vector<sim::TaskCombo> held_out;
};

bool is_held_out(const GenContext& ctx, const sim::TaskSpec& task) {
    for (const auto& combo : ctx.held_out)
        if (combo.kind == task.kind && combo.subject == task.subject) return true;
    return false;
}

// One trajectory for `task` in scene `spec`; reset seeds are redrawn until the
// placement admits the expert plan.
sim::Trajectory generate_trajectory(const GenContext& ctx, const sim::SceneSpec& spec, uint32_t scene_id,
                                    const sim::TaskSpec& task, Rng& rng, double noise) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        const uint64_t reset_seed = rng.next_u64();
        sim::SimState s0 = sim::reset(spec, reset_seed, ctx.grid_w, ctx.grid_h, scene_id);
        if (!sim::feasible(s0, task)) continue;
        Rng noise_rng = rng.child(attempt);
        sim::Trajectory traj =
            sim::run_expert(s0, task, ctx.horizon, noise > 0.0 ? &noise_rng : nullptr, noise);
        if (noise == 0.0 && !sim::judge_success(traj))
            throw std::logic_error("gen-data: expert failed a feasible task");
        return traj;
    }
    throw std::runtime_error(std::string("gen-data: no feasible placement for task ") + sim::kind_name(task.kind) +
                             ":" + sim::type_name(static_cast<sim::ObjectType>(task.subject)) + " in scene " +
                             spec.name);
}

// Fill `out` with `count` trajectories per the scene blocks. Tasks cycle
// through a seeded permutation per scene so coverage is balanced.
void generate_block(const GenContext& ctx, Dataset& out, size_t count, bool annotate, bool exclude_held_out,
                    bool only_held_out, Rng rng, double noise) {
    struct SceneTasks {
        const sim::SceneSpec* spec;
        uint32_t scene_id;
        std::vector<sim::TaskSpec> tasks;
    };
    std::vector<SceneTasks> usable;
    for (size_t i = 0; i < ctx.specs.size(); ++i) {
        SceneTasks st{ctx.specs[i], static_cast<uint32_t>(i), {}};
        for (const auto& t : sim::enumerate_tasks(*ctx.specs[i])) {
            const bool held = is_held_out(ctx, t);
            if (exclude_held_out && held) continue;
            if (only_held_out && !held) continue;
            st.tasks.push_back(t);
        }
        if (only_held_out && i < ctx.n_train_specs) continue;  // held-out eval lives in eval scenes
        if (!st.tasks.empty()) usable.push_back(std::move(st));
    }
    if (usable.empty())
        throw std::runtime_error(exclude_held_out ? "gen-data: held-out set covers all tasks"
                                                  : "gen-data: no tasks available");

    const size_t k = usable.size();
    for (size_t b = 0; b < k; ++b) {
        const size_t block = count / k + (b < count % k ? 1 : 0);
        Rng scene_rng = rng.child(usable[b].scene_id);
        std::vector<uint32_t> order;
        for (size_t j = 0; j < block; ++j) {
            const size_t cursor = j % usable[b].tasks.size();
            if (cursor == 0) order = scene_rng.permutation(static_cast<uint32_t>(usable[b].tasks.size()));
            const sim::TaskSpec& task = usable[b].tasks[order[cursor]];
            Rng traj_rng = scene_rng.child(j);
            sim::Trajectory traj =
                generate_trajectory(ctx, *usable[b].spec, usable[b].scene_id, task, traj_rng, noise);
            if (annotate) traj.instruction = lang::make_instruction(task);
            out.trajectories.push_back(std::move(traj));
        }
    }
}

}  // namespace

GeneratedData generate_datasets(const Config& cfg, uint64_t seed) {
    GenContext ctx;
    ctx.grid_w = static_cast<int>(cfg.get_int("data.grid_w"));
    ctx.grid_h = static_cast<int>(cfg.get_int("data.grid_h"));
    ctx.horizon = static_cast<int>(cfg.get_int("data.horizon"));

    ctx.specs = specs_from_csv(cfg.get_str("data.train_scenes"));
    ctx.n_train_specs = ctx.specs.size();
    for (const auto* ev : specs_from_csv(cfg.get_str("data.eval_scenes"))) {
        const bool dup = std::any_of(ctx.specs.begin(), ctx.specs.end(),
                                     [&](const sim::SceneSpec* s) { return s->name == ev->name; });
        if (!dup) ctx.specs.push_back(ev);
    }
    for (const auto& c : split_csv(cfg.get_str("data.held_out"))) ctx.held_out.push_back(sim::parse_combo(c));

    const size_t n_a = static_cast<size_t>(cfg.get_int("data.n_labeled"));
    size_t n_b = static_cast<size_t>(cfg.get_int("data.n_unlabeled"));
    if (cfg.get_bool("data.ratio_mode"))
        n_b = static_cast<size_t>(std::llround(static_cast<double>(n_a) * 47.0 / 7.0));
    const size_t n_heldout = static_cast<size_t>(cfg.get_int("data.heldout_eval_count"));
    const double noise = cfg.get_real("data.db_action_noise");

    Rng root(seed);
    GeneratedData out;
    generate_block(ctx, out.d_a, n_a, /*annotate=*/true, /*exclude_held_out=*/true, /*only_held_out=*/false,
                   root.child(1), 0.0);
    generate_block(ctx, out.d_b, n_b, /*annotate=*/false, /*exclude_held_out=*/false, /*only_held_out=*/false,
                   root.child(2), noise);
    generate_block(ctx, out.heldout, n_heldout, /*annotate=*/true, /*exclude_held_out=*/false,
                   /*only_held_out=*/true, root.child(3), 0.0);
    return out;
}

Dataset generate_static_captions(const Config& cfg, uint64_t seed) {
    const int grid_w = static_cast<int>(cfg.get_int("data.grid_w"));
    const int grid_h = static_cast<int>(cfg.get_int("data.grid_h"));
    const size_t count = static_cast<size_t>(cfg.get_int("data.pretrain_scenes"));

    // All type subsets of size 2..5, cycled in a seeded shuffle so nearby
    // scenes have distinct captions.
    std::vector<std::vector<sim::ObjectType>> subsets;
    for (int mask = 1; mask < (1 << sim::kNumTypes); ++mask) {
        const int bits = __builtin_popcount(static_cast<unsigned>(mask));
        if (bits < 2 || bits > 5) continue;
        std::vector<sim::ObjectType> types;
        for (int b = 0; b < sim::kNumTypes; ++b)
            if (mask & (1 << b)) types.push_back(static_cast<sim::ObjectType>(b));
        subsets.push_back(std::move(types));
    }

    Rng root(seed);
    const auto order = root.permutation(static_cast<uint32_t>(subsets.size()));
    Dataset out;
    for (size_t j = 0; j < count; ++j) {
        const auto& types = subsets[order[j % order.size()]];
        sim::SceneSpec spec{"static" + std::to_string(j), types};
        sim::SimState s0 = sim::reset(spec, root.child(j).next_u64(), grid_w, grid_h,
                                      static_cast<uint32_t>(j % order.size()));
        sim::Trajectory traj;
        traj.states.push_back(std::move(s0));
        traj.instruction = lang::caption_for_types(types);
        traj.scene_id = static_cast<uint32_t>(j % order.size());
        out.trajectories.push_back(std::move(traj));
    }
    if (out.trajectories.size() < 2) throw std::runtime_error("pretrain: need at least 2 static scenes");
    return out;
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

namespace {

std::string encode_trajectory(const sim::Trajectory& traj) {
    std::string out;
    const auto& s0 = traj.states.at(0);
    const size_t n_states = traj.states.size();
    const size_t n_objects = s0.scene.objects.size();
    if (traj.actions.size() + 1 != n_states)
        throw std::runtime_error("dataset: trajectory has " + std::to_string(traj.actions.size()) + " actions for " +
                                 std::to_string(n_states) + " states");

    bin::put_u32(out, traj.scene_id);
    bin::put_u16(out, static_cast<uint16_t>(n_states));
    bin::put_u8(out, static_cast<uint8_t>(n_objects));
    bin::put_u8(out, static_cast<uint8_t>(traj.task.kind));
    bin::put_u8(out, traj.task.subject);
    bin::put_u8(out, traj.task.target_type);
    bin::put_u8(out, traj.task.direction);
    bin::put_u8(out, traj.task.ref_type);
    bin::put_u8(out, traj.task.relation);
    bin::put_u8(out, traj.instruction.empty() ? 0 : 1);
    bin::put_u8(out, static_cast<uint8_t>(s0.scene.grid_w));
    bin::put_u8(out, static_cast<uint8_t>(s0.scene.grid_h));
    for (const auto& o : s0.scene.objects) bin::put_u8(out, o.type);
    for (const auto& st : traj.states) {
        bin::put_f32(out, st.gripper_x);
        bin::put_f32(out, st.gripper_y);
        bin::put_i16(out, static_cast<int16_t>(st.held));
        for (const auto& o : st.scene.objects) {
            bin::put_f32(out, o.x);
            bin::put_f32(out, o.y);
        }
    }
    for (const auto& a : traj.actions) {
        bin::put_f32(out, a.dx);
        bin::put_f32(out, a.dy);
        bin::put_f32(out, a.grip);
    }
    if (!traj.instruction.empty()) {
        bin::put_u16(out, static_cast<uint16_t>(traj.instruction.size()));
        out.append(traj.instruction);
    }
    return out;
}

sim::Trajectory decode_trajectory(bin::Reader& r) {
    sim::Trajectory traj;
    traj.scene_id = r.u32("scene_id");
    const uint16_t n_states = r.u16("state count");
    const uint8_t n_objects = r.u8("object count");
    traj.task.kind = static_cast<sim::TaskKind>(r.u8("task kind"));
    traj.task.subject = r.u8("task subject");
    traj.task.target_type = r.u8("task target");
    traj.task.direction = r.u8("task direction");
    traj.task.ref_type = r.u8("task ref");
    traj.task.relation = r.u8("task relation");
    const uint8_t has_instruction = r.u8("instruction flag");
    const uint8_t grid_w = r.u8("grid_w");
    const uint8_t grid_h = r.u8("grid_h");
    if (n_states == 0) throw std::runtime_error("dataset: empty trajectory record");

    std::vector<uint8_t> types(n_objects);
    for (auto& t : types) t = r.u8("object type");

    for (uint16_t s = 0; s < n_states; ++s) {
        sim::SimState st;
        st.scene.grid_w = grid_w;
        st.scene.grid_h = grid_h;
        st.scene.scene_id = traj.scene_id;
        st.gripper_x = r.f32("gripper x");
        st.gripper_y = r.f32("gripper y");
        st.held = r.i16("held");
        st.t = s;
        for (uint8_t o = 0; o < n_objects; ++o) {
            sim::ObjectInstance obj;
            obj.type = types[o];
            obj.x = r.f32("object x");
            obj.y = r.f32("object y");
            st.scene.objects.push_back(obj);
        }
        traj.states.push_back(std::move(st));
    }
    for (uint16_t a = 0; a + 1 < n_states; ++a) {
        sim::Action act;
        act.dx = r.f32("action dx");
        act.dy = r.f32("action dy");
        act.grip = r.f32("action grip");
        traj.actions.push_back(act);
    }
    if (has_instruction) {
        const uint16_t len = r.u16("instruction length");
        traj.instruction = r.bytes(len, "instruction");
    }
    return traj;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::string body;
    body.append(kMagic, sizeof(kMagic));
    bin::put_u32(body, kVersion);

    std::string index;
    index.append(kMagic, sizeof(kMagic));
    bin::put_u32(index, kVersion);
    bin::put_u32(index, static_cast<uint32_t>(ds.trajectories.size()));

    for (size_t i = 0; i < ds.trajectories.size(); ++i) {
        const std::string rec = encode_trajectory(ds.trajectories[i]);
        bin::put_u32(index, static_cast<uint32_t>(i));
        bin::put_u32(index, ds.trajectories[i].scene_id);
        bin::put_u64(index, body.size());
        bin::put_u32(index, static_cast<uint32_t>(rec.size()));
        bin::put_u8(index, ds.trajectories[i].instruction.empty() ? 0 : 1);
        bin::put_u32(body, static_cast<uint32_t>(rec.size()));
        body.append(rec);
    }
    bin::write_file(dir + "/trajectories.bin", body);
    bin::write_file(dir + "/index", index);
}

Dataset load_dataset(const std::string& dir) {
    const std::string index_buf = bin::read_file(dir + "/index");
    const std::string body = bin::read_file(dir + "/trajectories.bin");

    bin::Reader idx(index_buf, "dataset index '" + dir + "'");
    if (idx.bytes(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic)))
        throw std::runtime_error("dataset: bad magic in '" + dir + "/index'");
    if (idx.u32("version") != kVersion) throw std::runtime_error("dataset: unsupported index version");

    bin::Reader chk(body, "dataset body '" + dir + "'");
    if (chk.bytes(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic)))
        throw std::runtime_error("dataset: bad magic in '" + dir + "/trajectories.bin'");
    if (chk.u32("version") != kVersion) throw std::runtime_error("dataset: unsupported body version");

    const uint32_t count = idx.u32("count");
    Dataset out;
    out.trajectories.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        (void)idx.u32("id");
        (void)idx.u32("scene_id");
        const uint64_t offset = idx.u64("offset");
        const uint32_t length = idx.u32("length");
        const uint8_t has_instruction = idx.u8("instruction flag");

        bin::Reader rec(body, "dataset record " + std::to_string(i));
        rec.pos = offset;
        const uint32_t stored_len = rec.u32("record length");
        if (stored_len != length) throw std::runtime_error("dataset: index/body length mismatch at record " +
                                                           std::to_string(i));
        const size_t end = rec.pos + length;
        rec.need(length, "record payload");
        sim::Trajectory traj = decode_trajectory(rec);
        if (rec.pos != end) throw std::runtime_error("dataset: record " + std::to_string(i) + " has trailing bytes");
        if (traj.instruction.empty() == (has_instruction != 0))
            throw std::runtime_error("dataset: instruction flag mismatch at record " + std::to_string(i));
        out.trajectories.push_back(std::move(traj));
    }
    return out;
}

}  // namespace grif::data
