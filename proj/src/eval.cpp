#include "grif/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "grif/align.hpp"
#include "grif/expert.hpp"
#include "grif/instructions.hpp"

namespace grif::eval {

// ---------------------------------------------------------------------------
// retrieval
// ---------------------------------------------------------------------------

RetrievalReport retrieval_accuracy(enc::TaskEncoders encoders, const data::Dataset& eval_set, int k,
                                   int batch_size) {
    if (k < 1) throw std::invalid_argument("retrieval: k must be >= 1");
    if (batch_size < 2 || static_cast<size_t>(batch_size) > eval_set.size())
        throw std::invalid_argument("retrieval: batch size " + std::to_string(batch_size) +
                                    " invalid for eval set of " + std::to_string(eval_set.size()));
    enc::TaskEncoders frozen = encoders.detached();

    RetrievalReport report;
    report.k = k;
    report.batch_size = batch_size;

    const size_t n_batches = eval_set.size() / static_cast<size_t>(batch_size);
    for (size_t b = 0; b < n_batches; ++b) {
        std::vector<std::vector<int>> token_batch;
        std::vector<tc::Tensor> imgs;
        std::vector<std::pair<const tc::Tensor*, const tc::Tensor*>> pairs;
        imgs.reserve(static_cast<size_t>(batch_size) * 2);
        for (int i = 0; i < batch_size; ++i) {
            const auto& traj = eval_set.trajectories[b * batch_size + i];
            if (traj.instruction.empty()) throw std::invalid_argument("retrieval: eval set must be labeled");
            token_batch.push_back(lang::tokenize(traj.instruction));
            imgs.push_back(sim::render(traj.states.front()));
            imgs.push_back(sim::render(traj.states.back()));
        }
        for (int i = 0; i < batch_size; ++i) pairs.emplace_back(&imgs[2 * i], &imgs[2 * i + 1]);

        const tc::Tensor z_lang = enc::encode_text_batch(frozen.text, token_batch);
        const tc::Tensor z_goal = frozen.encode_visual_batch(pairs);

        int hits = 0;
        for (int i = 0; i < batch_size; ++i) {
            double own = 0;
            for (int c = 0; c < enc::kEmbedDim; ++c)
                own += static_cast<double>(z_lang.at(i, c)) * z_goal.at(i, c);
            int better = 0;
            for (int j = 0; j < batch_size; ++j) {
                if (j == i) continue;
                double s = 0;
                for (int c = 0; c < enc::kEmbedDim; ++c)
                    s += static_cast<double>(z_lang.at(i, c)) * z_goal.at(j, c);
                if (s > own) ++better;
            }
            if (better < k) ++hits;
        }
        report.per_batch.push_back(static_cast<double>(hits) / batch_size);
        report.successes += hits;
        report.queries += batch_size;
    }
    report.mean = report.queries ? static_cast<double>(report.successes) / report.queries : 0.0;
    report.se = report.queries ? std::sqrt(std::max(0.0, report.mean * (1.0 - report.mean)) / report.queries) : 0.0;
    return report;
}

// ---------------------------------------------------------------------------
// rollouts
// ---------------------------------------------------------------------------

std::vector<EvalTask> build_eval_tasks(const Config& cfg, bool held_out) {
    std::vector<sim::TaskCombo> combos;
    for (const auto& c : split_csv(cfg.get_str("data.held_out"))) combos.push_back(sim::parse_combo(c));
    const int trials = static_cast<int>(cfg.get_int("eval.trials"));
    const int trials_small = static_cast<int>(cfg.get_int("eval.trials_small"));

    std::vector<EvalTask> tasks;
    for (const auto& name : split_csv(cfg.get_str("data.eval_scenes"))) {
        const auto& spec = sim::scene_by_name(name);
        for (const auto& task : sim::enumerate_tasks(spec)) {
            const bool in_held_out =
                std::any_of(combos.begin(), combos.end(), [&](const sim::TaskCombo& c) {
                    return c.kind == task.kind && c.subject == task.subject;
                });
            if (in_held_out != held_out) continue;
            EvalTask et;
            et.spec = &spec;
            et.task = task;
            et.trials = spec.types.size() < 3 ? trials_small : trials;
            et.instruction = lang::make_instruction(task);
            tasks.push_back(std::move(et));
        }
    }
    return tasks;
}

RolloutReport rollout_eval_core(const PolicyFactory& make_policy, const std::vector<EvalTask>& tasks, int horizon,
                                uint64_t seed, const Config& cfg) {
    const int grid_w = static_cast<int>(cfg.get_int("data.grid_w"));
    const int grid_h = static_cast<int>(cfg.get_int("data.grid_h"));
    Rng root(seed);

    RolloutReport report;
    for (size_t ti = 0; ti < tasks.size(); ++ti) {
        const EvalTask& et = tasks[ti];
        RolloutReport::PerTask per;
        per.scene = et.spec->name;
        per.instruction = et.instruction;
        per.trials = et.trials;
        Rng task_rng = root.child(ti);
        for (int trial = 0; trial < et.trials; ++trial) {
            Rng trial_rng = task_rng.child(static_cast<uint64_t>(trial));
            try {
                sim::SimState s0;
                bool placed = false;
                for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
                    s0 = sim::reset(*et.spec, trial_rng.next_u64(), grid_w, grid_h);
                    placed = sim::feasible(s0, et.task);
                }
                if (!placed) throw std::runtime_error("no feasible placement");

                StepPolicy policy = make_policy(et, s0);
                sim::Trajectory traj;
                traj.task = et.task;
                traj.states.push_back(s0);
                sim::SimState cur = s0;
                for (int t = 0; t < horizon; ++t) {
                    const sim::Action a = policy(cur);
                    cur = sim::step(cur, a);
                    traj.actions.push_back(a);
                    traj.states.push_back(cur);
                }
                if (sim::judge_success(traj)) ++per.successes;
            } catch (const std::exception& e) {
                // Recorded as a failed trial, not a crash.
                if (per.note.empty()) per.note = e.what();
            }
        }
        report.successes += per.successes;
        report.trials += per.trials;
        report.tasks.push_back(std::move(per));
    }
    report.mean = report.trials ? static_cast<double>(report.successes) / report.trials : 0.0;
    report.se = report.trials ? std::sqrt(std::max(0.0, report.mean * (1.0 - report.mean)) / report.trials) : 0.0;
    return report;
}

RolloutReport rollout_eval(policy::PolicyParams policy_params, enc::TaskEncoders encoders,
                           const std::vector<EvalTask>& tasks, const Config& cfg, uint64_t seed) {
    const int horizon = static_cast<int>(cfg.get_int("eval.horizon"));
    enc::TaskEncoders frozen = encoders.detached();
    policy::PolicyParams frozen_policy = policy_params.detached();

    PolicyFactory factory = [&frozen, &frozen_policy](const EvalTask& et, const sim::SimState&) -> StepPolicy {
        const tc::Tensor z = enc::encode_text(frozen.text, lang::tokenize(et.instruction));
        policy::PolicyParams p = frozen_policy;
        return [p, z](const sim::SimState& state) mutable { return policy::policy_act(p, state, z); };
    };
    return rollout_eval_core(factory, tasks, horizon, seed, cfg);
}

ZTest two_proportion_ztest(int successes1, int n1, int successes2, int n2) {
    ZTest out;
    if (n1 <= 0 || n2 <= 0) return out;
    const double p1 = static_cast<double>(successes1) / n1;
    const double p2 = static_cast<double>(successes2) / n2;
    const double pooled = static_cast<double>(successes1 + successes2) / (n1 + n2);
    const double denom = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
    if (denom == 0.0) {
        out.z = 0.0;
        out.significant = false;
        return out;
    }
    out.z = (p1 - p2) / denom;
    out.significant = std::abs(out.z) > 1.959964;  // two-sided alpha = 0.05
    return out;
}

// ---------------------------------------------------------------------------
// ablation matrix
// ---------------------------------------------------------------------------

data::Dataset subset_labeled(const data::Dataset& d_a, size_t count) {
    if (count == 0 || count > d_a.size())
        throw std::invalid_argument("subset_labeled: count " + std::to_string(count) + " out of range for " +
                                    std::to_string(d_a.size()));
    // Proportional prefix per scene block keeps grouping and scene balance.
    std::vector<std::pair<uint32_t, size_t>> blocks;  // scene_id, size
    for (const auto& traj : d_a.trajectories) {
        if (blocks.empty() || blocks.back().first != traj.scene_id) blocks.emplace_back(traj.scene_id, 0);
        blocks.back().second += 1;
    }
    data::Dataset out;
    size_t taken = 0, offset = 0;
    for (size_t b = 0; b < blocks.size(); ++b) {
        size_t want = count * blocks[b].second / d_a.size();
        if (b + 1 == blocks.size()) want = count - taken;  // absorb rounding
        want = std::min(want, blocks[b].second);
        for (size_t i = 0; i < want; ++i) out.trajectories.push_back(d_a.trajectories[offset + i]);
        taken += want;
        offset += blocks[b].second;
    }
    // Rounding shortfall: top up from the start in storage order.
    for (size_t i = 0; taken < count && i < d_a.size(); ++i) {
        bool dup = false;
        size_t off2 = 0;
        for (size_t b = 0; b < blocks.size() && !dup; ++b) {
            const size_t want = std::min(count * blocks[b].second / d_a.size(), blocks[b].second);
            if (i >= off2 && i < off2 + want) dup = true;
            off2 += blocks[b].second;
        }
        if (!dup) {
            out.trajectories.push_back(d_a.trajectories[i]);
            ++taken;
        }
    }
    return out;
}

namespace {

struct VariantPlan {
    std::string name;
    enc::TaskEncoders init;  // stage-2 input encoders (cloned per variant)
    std::string mode;        // frozen | joint
    std::string align_loss;  // infonce | cosine | none
    bool use_unlabeled = true;
    bool language_only = false;
};

int even_at_most(size_t n) {
    const int e = static_cast<int>(n - (n % 2));
    return std::max(2, e);
}

}  // namespace

AblationRun run_ablation_matrix(const Config& cfg, uint64_t seed, int threads) {
    AblationRun run;
    run.seed = seed;
    run.config_hash = cfg.hash();

    // Shared artifacts across variants.
    const data::GeneratedData datasets = data::generate_datasets(cfg, seed);
    const data::Dataset captions = data::generate_static_captions(cfg, seed);
    Rng root(seed);
    const enc::PretrainResult pre = enc::pretrain_clip_style(captions, cfg, root.child(5).next_u64());

    auto make_unaligned = [&](enc::GoalMode mode) {
        enc::TaskEncoders e;
        e.text = pre.text.clone();
        e.transition = enc::surgery(pre.image);
        if (mode == enc::GoalMode::goal_single) e.image = pre.image.clone();
        e.goal_mode = mode;
        return e;
    };

    const enc::GoalMode no_start_mode = cfg.get_str("ablate.no_start_mode") == "single"
                                            ? enc::GoalMode::goal_single
                                            : enc::GoalMode::goal_duplicate;

    // Stage-1 alignments used by multiple variants.
    align::AlignOutcome grif_align =
        align::train_align(datasets.d_a, cfg, root.child(10).next_u64(), make_unaligned(enc::GoalMode::transition));
    run.align_logs["align_grif"] = grif_align.log;

    std::optional<align::AlignOutcome> nostart_align, nopretrain_align;
    enc::TaskEncoders random_init;
    {
        Rng enc_rng = root.child(6);
        random_init.text = enc::TextEncoderParams::init(enc_rng);
        random_init.transition = enc::TransitionEncoderParams::init(enc_rng);
        random_init.goal_mode = enc::GoalMode::transition;
    }

    const auto variant_names = split_csv(cfg.get_str("ablate.variants"));
    auto needs = [&](const std::string& v) {
        return std::find(variant_names.begin(), variant_names.end(), v) != variant_names.end();
    };
    if (needs("no_start")) {
        nostart_align = align::train_align(datasets.d_a, cfg, root.child(11).next_u64(), make_unaligned(no_start_mode));
        run.align_logs["align_no_start"] = nostart_align->log;
    }
    if (needs("no_pretrain")) {
        nopretrain_align = align::train_align(datasets.d_a, cfg, root.child(12).next_u64(), random_init.clone());
        run.align_logs["align_no_pretrain"] = nopretrain_align->log;
    }

    // Stage-2 plans.
    std::vector<VariantPlan> plans;
    for (const auto& name : variant_names) {
        VariantPlan p;
        p.name = name;
        if (name == "grif_frozen") {
            p.init = grif_align.encoders.clone();
            p.mode = "frozen";
            p.align_loss = "none";
        } else if (name == "grif_joint") {
            p.init = grif_align.encoders.clone();
            p.mode = "joint";
            p.align_loss = "infonce";
        } else if (name == "grif_labeled") {
            p.init = grif_align.encoders.clone();
            p.mode = "frozen";
            p.align_loss = "none";
            p.use_unlabeled = false;
        } else if (name == "no_align") {
            p.init = make_unaligned(enc::GoalMode::transition);
            p.mode = "joint";
            p.align_loss = "none";
        } else if (name == "no_start") {
            p.init = nostart_align->encoders.clone();
            p.mode = "frozen";
            p.align_loss = "none";
        } else if (name == "no_pretrain") {
            p.init = nopretrain_align->encoders.clone();
            p.mode = "frozen";
            p.align_loss = "none";
        } else if (name == "lcbc") {
            p.init = make_unaligned(enc::GoalMode::transition);
            p.mode = "frozen";
            p.align_loss = "none";
            p.use_unlabeled = false;
            p.language_only = true;
        } else if (name == "llfp") {
            p.init = random_init.clone();
            p.init.text = pre.text.clone();
            p.mode = "joint";
            p.align_loss = "none";
        } else if (name == "bcz") {
            p.init = random_init.clone();
            p.init.text = pre.text.clone();
            p.mode = "joint";
            p.align_loss = "cosine";
        } else {
            throw std::invalid_argument("ablate: unknown variant '" + name + "'");
        }
        plans.push_back(std::move(p));
    }

    const auto heldout_tasks = build_eval_tasks(cfg, /*held_out=*/true);
    const auto indist_tasks = build_eval_tasks(cfg, /*held_out=*/false);
    const int retrieval_batch = static_cast<int>(cfg.get_int("eval.retrieval_batch"));

    run.variants.resize(plans.size());
    std::vector<uint64_t> policy_seeds(plans.size()), rollout_seeds(plans.size());
    for (size_t i = 0; i < plans.size(); ++i) {
        policy_seeds[i] = root.child(100 + i).next_u64();
        rollout_seeds[i] = root.child(300 + i).next_u64();
    }

    std::atomic<size_t> next_job{0};
    auto worker = [&]() {
        for (;;) {
            const size_t i = next_job.fetch_add(1);
            if (i >= plans.size()) return;
            VariantResult& row = run.variants[i];
            row.name = plans[i].name;
            try {
                Config vcfg = cfg;
                vcfg.set("policy.mode", plans[i].mode);
                vcfg.set("policy.align_loss", plans[i].align_loss);
                vcfg.set("policy.use_unlabeled", plans[i].use_unlabeled ? "true" : "false");
                vcfg.set("policy.language_only", plans[i].language_only ? "true" : "false");

                policy::PolicyOutcome trained =
                    policy::train_policy(datasets.d_a, datasets.d_b, plans[i].init, vcfg, policy_seeds[i]);
                row.policy_log = trained.log;

                const RetrievalReport top1 =
                    retrieval_accuracy(trained.encoders, datasets.heldout, 1, retrieval_batch);
                const RetrievalReport top5 =
                    retrieval_accuracy(trained.encoders, datasets.heldout, 5, retrieval_batch);
                row.retrieval_queries = top1.queries;
                row.top1_successes = top1.successes;
                row.top5_successes = top5.successes;

                const RolloutReport held =
                    rollout_eval(trained.policy, trained.encoders, heldout_tasks, vcfg, rollout_seeds[i]);
                row.heldout_successes = held.successes;
                row.heldout_trials = held.trials;
                const RolloutReport ind =
                    rollout_eval(trained.policy, trained.encoders, indist_tasks, vcfg, rollout_seeds[i] + 1);
                row.indist_successes = ind.successes;
                row.indist_trials = ind.trials;
            } catch (const std::exception& e) {
                row.failed = true;
                row.error = e.what();
            }
        }
    };
    const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(plans.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Annotation-count sweep (grounding only).
    if (cfg.get_bool("ablate.sweep")) {
        for (const auto& cs : split_csv(cfg.get_str("ablate.sweep_counts"))) {
            const size_t count = static_cast<size_t>(std::stoll(cs));
            SweepPoint point;
            point.annotations = static_cast<int>(count);
            enc::TaskEncoders trained_enc;
            if (count == datasets.d_a.size()) {
                trained_enc = grif_align.encoders.clone();
            } else {
                const data::Dataset subset = subset_labeled(datasets.d_a, count);
                Config scfg = cfg;
                scfg.set("align.batch",
                         std::to_string(std::min<int>(static_cast<int>(cfg.get_int("align.batch")),
                                                      even_at_most(subset.size()))));
                align::AlignOutcome sweep_align = align::train_align(
                    subset, scfg, root.child(200 + count).next_u64(), make_unaligned(enc::GoalMode::transition));
                run.align_logs["align_sweep_" + cs] = sweep_align.log;
                trained_enc = std::move(sweep_align.encoders);
            }
            const RetrievalReport top1 = retrieval_accuracy(trained_enc, datasets.heldout, 1, retrieval_batch);
            const RetrievalReport top5 = retrieval_accuracy(trained_enc, datasets.heldout, 5, retrieval_batch);
            point.queries = top1.queries;
            point.top1_successes = top1.successes;
            point.top5_successes = top5.successes;
            run.sweep.push_back(point);
        }
    }
    return run;
}

// ---------------------------------------------------------------------------
// report emission
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

void emit_report(const AblationRun& run, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir + "/curves", ec);
    if (ec) throw std::runtime_error("report: cannot create '" + out_dir + "': " + ec.message());

    char hash_buf[32];
    std::snprintf(hash_buf, sizeof(hash_buf), "%016llx", static_cast<unsigned long long>(run.config_hash));

    {
        std::ofstream f(out_dir + "/report.tsv", std::ios::trunc);
        if (!f) throw std::runtime_error("report: cannot write '" + out_dir + "/report.tsv'");
        f << "# config_hash\t" << hash_buf << '\n';
        f << "# seed\t" << run.seed << '\n';
        f << "variant\tstatus\tretrieval_n\ttop1\ttop5\theldout_n\theldout\theldout_se\tindist_n\tindist\t"
             "indist_se\terror\n";
        for (const auto& v : run.variants) {
            const double hse =
                v.heldout_trials ? std::sqrt(std::max(0.0, v.heldout() * (1 - v.heldout())) / v.heldout_trials) : 0.0;
            const double ise =
                v.indist_trials ? std::sqrt(std::max(0.0, v.indist() * (1 - v.indist())) / v.indist_trials) : 0.0;
            f << v.name << '\t' << (v.failed ? "failed" : "ok") << '\t' << v.retrieval_queries << '\t'
              << fmt(v.top1()) << '\t' << fmt(v.top5()) << '\t' << v.heldout_trials << '\t' << fmt(v.heldout())
              << '\t' << fmt(hse) << '\t' << v.indist_trials << '\t' << fmt(v.indist()) << '\t' << fmt(ise) << '\t'
              << (v.failed ? v.error : "-") << '\n';
        }
    }
    {
        std::ofstream f(out_dir + "/sweep.tsv", std::ios::trunc);
        if (!f) throw std::runtime_error("report: cannot write '" + out_dir + "/sweep.tsv'");
        f << "# config_hash\t" << hash_buf << '\n';
        f << "# seed\t" << run.seed << '\n';
        f << "annotations\tqueries\ttop1\ttop5\n";
        for (const auto& p : run.sweep)
            f << p.annotations << '\t' << p.queries << '\t' << fmt(p.top1()) << '\t' << fmt(p.top5()) << '\n';
    }
    for (const auto& v : run.variants) write_metrics(out_dir + "/curves/" + v.name + ".ndjson", v.policy_log);
    for (const auto& [name, log] : run.align_logs) write_metrics(out_dir + "/curves/" + name + ".ndjson", log);
}

std::vector<std::map<std::string, std::string>> parse_report_tsv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("report: cannot open '" + path + "'");
    std::vector<std::map<std::string, std::string>> rows;
    std::vector<std::string> header;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream in(line);
        while (std::getline(in, cell, '\t')) cells.push_back(cell);
        if (header.empty()) {
            header = cells;
            continue;
        }
        std::map<std::string, std::string> row;
        for (size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace grif::eval
