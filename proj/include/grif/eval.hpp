#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "grif/config.hpp"
#include "grif/dataset.hpp"
#include "grif/encoders.hpp"
#include "grif/metrics.hpp"
#include "grif/policy.hpp"

namespace grif::eval {

// ---------------------------------------------------------------------------
// grounding: text -> transition retrieval
// ---------------------------------------------------------------------------

struct RetrievalReport {
    int k = 1;
    int batch_size = 64;
    std::vector<double> per_batch;  // disjoint fixed batches in storage order
    double mean = 0;  // pooled success fraction
    double se = 0;    // binomial standard error over pooled queries
    int successes = 0;
    int queries = 0;
};

// Within each fixed batch, all-pairs cosine between f(instruction) and
// h(s_0, g); a query succeeds iff its own transition ranks in the top k.
// Batches partition the eval set in storage order (scene-grouped, so
// negatives are mostly same-scene). Remainder rows are dropped.
RetrievalReport retrieval_accuracy(enc::TaskEncoders encoders, const data::Dataset& eval_set, int k,
                                   int batch_size);

// ---------------------------------------------------------------------------
// control: instruction-conditioned rollouts
// ---------------------------------------------------------------------------

struct EvalTask {
    const sim::SceneSpec* spec;
    sim::TaskSpec task;
    int trials;
    std::string instruction;  // canonical
};

// Tasks in the configured eval scenes whose (kind, subject) combo membership
// in the held-out set matches `held_out`. Sparse scenes (< 3 objects) get
// eval.trials_small trials, the rest eval.trials.
std::vector<EvalTask> build_eval_tasks(const Config& cfg, bool held_out);

struct RolloutReport {
    struct PerTask {
        std::string scene;
        std::string instruction;
        int successes = 0;
        int trials = 0;
        std::string note;  // failure reason when a task could not run
    };
    std::vector<PerTask> tasks;
    int successes = 0;
    int trials = 0;
    double mean = 0;
    double se = 0;
};

using StepPolicy = std::function<sim::Action(const sim::SimState&)>;
using PolicyFactory = std::function<StepPolicy(const EvalTask&, const sim::SimState& s0)>;

// Seeded resets (re-drawn until the task is feasible), fixed-horizon rollout,
// judgment via the simulator's judge on the full trajectory. Per-task errors
// are recorded as failures with a note, not crashes.
RolloutReport rollout_eval_core(const PolicyFactory& make_policy, const std::vector<EvalTask>& tasks, int horizon,
                                uint64_t seed, const Config& cfg);

// The trained policy executed on its mean action, conditioned on the encoded
// canonical instruction.
RolloutReport rollout_eval(policy::PolicyParams policy, enc::TaskEncoders encoders,
                           const std::vector<EvalTask>& tasks, const Config& cfg, uint64_t seed);

// Two-proportion z-test (pooled variance), two-sided at alpha = 0.05.
struct ZTest {
    double z = 0;
    bool significant = false;
};
ZTest two_proportion_ztest(int successes1, int n1, int successes2, int n2);

// ---------------------------------------------------------------------------
// ablation matrix
// ---------------------------------------------------------------------------

struct VariantResult {
    std::string name;
    bool failed = false;
    std::string error;
    // retrieval (pooled counts kept for cross-seed aggregation)
    int retrieval_queries = 0;
    int top1_successes = 0;
    int top5_successes = 0;
    // rollouts
    int heldout_successes = 0, heldout_trials = 0;
    int indist_successes = 0, indist_trials = 0;
    std::vector<MetricRow> policy_log;

    double top1() const { return retrieval_queries ? static_cast<double>(top1_successes) / retrieval_queries : 0; }
    double top5() const { return retrieval_queries ? static_cast<double>(top5_successes) / retrieval_queries : 0; }
    double heldout() const { return heldout_trials ? static_cast<double>(heldout_successes) / heldout_trials : 0; }
    double indist() const { return indist_trials ? static_cast<double>(indist_successes) / indist_trials : 0; }
};

struct SweepPoint {
    int annotations = 0;
    int queries = 0;
    int top1_successes = 0;
    int top5_successes = 0;
    double top1() const { return queries ? static_cast<double>(top1_successes) / queries : 0; }
    double top5() const { return queries ? static_cast<double>(top5_successes) / queries : 0; }
};

struct AblationRun {
    uint64_t seed = 0;
    uint64_t config_hash = 0;
    std::vector<VariantResult> variants;
    std::vector<SweepPoint> sweep;
    std::map<std::string, std::vector<MetricRow>> align_logs;
};

// Trains every configured variant end-to-end at one seed (shared datasets,
// pretraining, and stage-1 artifacts) and evaluates grounding and control.
// A crashing variant marks its row failed; the others proceed. `threads`
// caps the worker threads used for the per-variant stage-2 jobs.
AblationRun run_ablation_matrix(const Config& cfg, uint64_t seed, int threads = 1);

// First annotation-sweep trajectories of d_a, preserving scene grouping.
data::Dataset subset_labeled(const data::Dataset& d_a, size_t count);

// report.tsv + sweep.tsv + curves/<name>.ndjson under out_dir. Two runs with
// the same seed and config produce byte-identical files.
void emit_report(const AblationRun& run, const std::string& out_dir);

// Round-trip reader for report.tsv: one map per data row, column -> cell.
std::vector<std::map<std::string, std::string>> parse_report_tsv(const std::string& path);

}  // namespace grif::eval
