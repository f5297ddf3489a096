// Command-line pipeline: dataset generation, pseudo-pretraining, weight
// surgery, alignment, policy training, and evaluation. Every subcommand is
// seeded and writes only under --out.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "grif/align.hpp"
#include "grif/checkpoint.hpp"
#include "grif/config.hpp"
#include "grif/dataset.hpp"
#include "grif/encoders.hpp"
#include "grif/eval.hpp"
#include "grif/instructions.hpp"
#include "grif/metrics.hpp"
#include "grif/policy.hpp"

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
    std::string config_path;
    uint64_t seed = 0;
    std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "configuration file (key = value lines)");
    cmd->add_option("--seed", args.seed, "random seed")->required();
    cmd->add_option("--out", args.out, "output directory")->required();
}

grif::Config load_config(const CommonArgs& args) {
    return args.config_path.empty() ? grif::Config() : grif::Config::load(args.config_path);
}

void prepare_out(const CommonArgs& args, const grif::Config& cfg) {
    fs::create_directories(args.out);
    cfg.save_resolved(args.out + "/resolved_config.txt");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"goal-representation alignment pipeline"};
    app.require_subcommand(1);

    CommonArgs gen_args, pre_args, surg_args, align_args, policy_args, retr_args, roll_args, abl_args;
    std::string data_dir, encoders_path, policy_path;
    int threads = 1;

    auto* gen = app.add_subcommand("gen-data", "generate labeled, unlabeled, held-out, and caption datasets");
    add_common(gen, gen_args);

    auto* pre = app.add_subcommand("pretrain", "contrastive caption pretraining of the text and image encoders");
    add_common(pre, pre_args);
    pre->add_option("--data", data_dir, "dataset directory from gen-data")->required();

    auto* surg = app.add_subcommand("surgery", "duplicate-and-halve the image encoder into a transition encoder");
    add_common(surg, surg_args);
    surg->add_option("--encoders", encoders_path, "pretrained encoder checkpoint")->required();

    auto* aln = app.add_subcommand("train-align", "stage 1: align instruction and transition embeddings");
    add_common(aln, align_args);
    aln->add_option("--data", data_dir, "dataset directory from gen-data")->required();
    aln->add_option("--encoders", encoders_path, "initial encoder checkpoint (omit for random init)");

    auto* pol = app.add_subcommand("train-policy", "stage 2: task-conditioned behavioral cloning");
    add_common(pol, policy_args);
    pol->add_option("--data", data_dir, "dataset directory from gen-data")->required();
    pol->add_option("--encoders", encoders_path, "task encoder checkpoint")->required();

    auto* retr = app.add_subcommand("eval-retrieval", "text-to-transition retrieval accuracy");
    add_common(retr, retr_args);
    retr->add_option("--data", data_dir, "dataset directory from gen-data")->required();
    retr->add_option("--encoders", encoders_path, "task encoder checkpoint")->required();

    auto* roll = app.add_subcommand("eval-rollout", "instruction-conditioned rollout success");
    add_common(roll, roll_args);
    roll->add_option("--encoders", encoders_path, "task encoder checkpoint")->required();
    roll->add_option("--policy", policy_path, "policy checkpoint")->required();

    auto* abl = app.add_subcommand("ablate", "train and evaluate the ablation matrix");
    add_common(abl, abl_args);
    abl->add_option("--threads", threads, "worker thread cap for variant jobs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << std::endl;
        return 2;
    }

    try {
        if (gen->parsed()) {
            const auto cfg = load_config(gen_args);
            prepare_out(gen_args, cfg);
            const auto data = grif::data::generate_datasets(cfg, gen_args.seed);
            grif::data::save_dataset(data.d_a, gen_args.out + "/d_a");
            grif::data::save_dataset(data.d_b, gen_args.out + "/d_b");
            grif::data::save_dataset(data.heldout, gen_args.out + "/heldout");
            grif::data::save_dataset(grif::data::generate_static_captions(cfg, gen_args.seed),
                                     gen_args.out + "/pretrain");
            std::cout << "wrote " << data.d_a.size() << " labeled, " << data.d_b.size() << " unlabeled, "
                      << data.heldout.size() << " held-out trajectories to " << gen_args.out << std::endl;
        } else if (pre->parsed()) {
            const auto cfg = load_config(pre_args);
            prepare_out(pre_args, cfg);
            const auto captions = grif::data::load_dataset(data_dir + "/pretrain");
            auto result = grif::enc::pretrain_clip_style(captions, cfg, pre_args.seed);
            grif::NamedTensors named = result.text.named();
            for (auto& e : result.image.named()) named.push_back(std::move(e));
            grif::save_checkpoint(named, pre_args.out + "/encoders.ckpt");
            grif::write_metrics(pre_args.out + "/metrics.ndjson", result.log);
            std::cout << "pretrained encoders -> " << pre_args.out << "/encoders.ckpt" << std::endl;
        } else if (surg->parsed()) {
            const auto cfg = load_config(surg_args);
            prepare_out(surg_args, cfg);
            const auto loaded = grif::load_checkpoint(encoders_path);
            auto text = grif::enc::TextEncoderParams::from_named(loaded);
            auto image = grif::enc::ImageEncoderParams::from_named(loaded);
            const auto transition = grif::enc::surgery(image);
            grif::NamedTensors named;
            named.emplace_back("meta.goal_mode", grif::tc::Tensor::scalar(0.0f));
            for (auto& e : text.named()) named.push_back(std::move(e));
            for (auto& e : image.named()) named.push_back(std::move(e));
            for (auto& e : transition.named()) named.push_back(std::move(e));
            grif::save_checkpoint(named, surg_args.out + "/encoders.ckpt");
            std::cout << "surgery: transition encoder written -> " << surg_args.out << "/encoders.ckpt" << std::endl;
        } else if (aln->parsed()) {
            const auto cfg = load_config(align_args);
            prepare_out(align_args, cfg);
            const auto d_a = grif::data::load_dataset(data_dir + "/d_a");
            grif::enc::TaskEncoders init;
            if (!encoders_path.empty()) {
                init = grif::enc::TaskEncoders::from_named(grif::load_checkpoint(encoders_path));
            } else {
                grif::Rng rng(align_args.seed);
                init.text = grif::enc::TextEncoderParams::init(rng);
                init.transition = grif::enc::TransitionEncoderParams::init(rng);
            }
            init.goal_mode = grif::enc::goal_mode_from_str(cfg.get_str("policy.goal_mode") == "transition"
                                                               ? "transition"
                                                               : cfg.get_str("ablate.no_start_mode"));
            auto result = grif::align::train_align(d_a, cfg, align_args.seed, std::move(init));
            grif::save_checkpoint(result.encoders.named(), align_args.out + "/encoders.ckpt");
            grif::write_metrics(align_args.out + "/metrics.ndjson", result.log);
            std::cout << "aligned encoders -> " << align_args.out << "/encoders.ckpt" << std::endl;
        } else if (pol->parsed()) {
            const auto cfg = load_config(policy_args);
            prepare_out(policy_args, cfg);
            const auto d_a = grif::data::load_dataset(data_dir + "/d_a");
            grif::data::Dataset d_b;
            if (cfg.get_bool("policy.use_unlabeled") && !cfg.get_bool("policy.language_only"))
                d_b = grif::data::load_dataset(data_dir + "/d_b");
            auto encoders = grif::enc::TaskEncoders::from_named(grif::load_checkpoint(encoders_path));
            auto result = grif::policy::train_policy(d_a, d_b, encoders, cfg, policy_args.seed);
            grif::save_checkpoint(result.policy.named(), policy_args.out + "/policy.ckpt");
            grif::save_checkpoint(result.encoders.named(), policy_args.out + "/encoders.ckpt");
            grif::write_metrics(policy_args.out + "/metrics.ndjson", result.log);
            std::cout << "policy -> " << policy_args.out << "/policy.ckpt" << std::endl;
        } else if (retr->parsed()) {
            const auto cfg = load_config(retr_args);
            prepare_out(retr_args, cfg);
            const auto heldout = grif::data::load_dataset(data_dir + "/heldout");
            auto encoders = grif::enc::TaskEncoders::from_named(grif::load_checkpoint(encoders_path));
            const int batch = static_cast<int>(cfg.get_int("eval.retrieval_batch"));
            std::ofstream f(retr_args.out + "/retrieval.tsv", std::ios::trunc);
            f << "k\tbatch\tqueries\taccuracy\tse\n";
            for (int k : {1, 5}) {
                const auto rep = grif::eval::retrieval_accuracy(encoders, heldout, k, batch);
                char line[160];
                std::snprintf(line, sizeof(line), "%d\t%d\t%d\t%.6f\t%.6f\n", k, rep.batch_size, rep.queries,
                              rep.mean, rep.se);
                f << line;
                std::cout << "top-" << k << " retrieval: " << rep.mean << std::endl;
            }
        } else if (roll->parsed()) {
            const auto cfg = load_config(roll_args);
            prepare_out(roll_args, cfg);
            auto encoders = grif::enc::TaskEncoders::from_named(grif::load_checkpoint(encoders_path));
            auto policy = grif::policy::PolicyParams::from_named(grif::load_checkpoint(policy_path));
            std::ofstream f(roll_args.out + "/rollout.tsv", std::ios::trunc);
            f << "split\tscene\tinstruction\tsuccesses\ttrials\tnote\n";
            for (const bool held_out : {true, false}) {
                const auto tasks = grif::eval::build_eval_tasks(cfg, held_out);
                const auto rep = grif::eval::rollout_eval(policy, encoders, tasks, cfg,
                                                          roll_args.seed + (held_out ? 0 : 1));
                for (const auto& t : rep.tasks)
                    f << (held_out ? "heldout" : "indist") << '\t' << t.scene << '\t' << t.instruction << '\t'
                      << t.successes << '\t' << t.trials << '\t' << (t.note.empty() ? "-" : t.note) << '\n';
                std::cout << (held_out ? "held-out" : "in-distribution") << " success: " << rep.mean << " ("
                          << rep.successes << "/" << rep.trials << ")" << std::endl;
            }
        } else if (abl->parsed()) {
            const auto cfg = load_config(abl_args);
            prepare_out(abl_args, cfg);
            const auto run = grif::eval::run_ablation_matrix(cfg, abl_args.seed, threads);
            grif::eval::emit_report(run, abl_args.out);
            std::cout << "ablation report -> " << abl_args.out << "/report.tsv" << std::endl;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
