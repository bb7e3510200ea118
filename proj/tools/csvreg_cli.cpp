// Command-line front end: dataset generation, training, evaluation, the toy
// reproduction tables, the oracle verification suite, and report rendering.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "csvreg/config.hpp"
#include "csvreg/dataset_io.hpp"
#include "csvreg/errors.hpp"
#include "csvreg/experiment.hpp"
#include "csvreg/oracles.hpp"

namespace {

using namespace csvreg;

ExperimentConfig load_or_default(const std::string& config_path) {
    if (config_path.empty()) return parse_config("");
    return load_config_file(config_path);
}

void apply_overrides(ExperimentConfig& cfg, const std::string& method,
                     const std::vector<std::uint64_t>& seeds, const std::string& out,
                     const std::vector<double>& sigma_test) {
    if (!method.empty()) {
        const auto m = parse_method(method);
        if (!m) throw ValidationError("unknown method '" + method + "'");
        cfg.train.method = *m;
        TrainKeysSet set;
        set.lr = set.steps = set.batch_size = true;
        apply_method_defaults(cfg.train, cfg.dataset.kind, set);
    }
    if (!seeds.empty()) cfg.seeds = seeds;
    if (!out.empty()) cfg.out_dir = out;
    if (!sigma_test.empty()) cfg.sigma_test = sigma_test;
}

int cmd_generate(const std::string& config_path, std::uint64_t seed, const std::string& out) {
    ExperimentConfig cfg = load_or_default(config_path);
    const GroupedDataset ds = build_train_dataset(cfg, seed);
    save_dataset(out, ds);
    std::cout << "wrote " << out << " (" << ds.size() << " samples, dim " << ds.dim() << ")\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& checkpoint_dir) {
    const RunReport report = run_experiment(cfg, checkpoint_dir);
    emit_report({report}, cfg.out_dir);
    std::cout << "method " << report.method << ", " << report.runs.size() << " seed(s)\n";
    for (std::size_t i = 0; i < report.runs.front().evals.size(); ++i) {
        std::cout << "  " << report.runs.front().evals[i].tag << ": mean total accuracy "
                  << report.mean_total_accuracy(i) << "%\n";
    }
    std::cout << "report written to " << cfg.out_dir << "\n";
    return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
    if (cfg.dataset.kind != DatasetKind::kToy) {
        throw ValidationError("evaluate drives the toy shift grid; use a toy config");
    }
    const std::uint64_t seed = cfg.seeds.front();
    GroupedDataset train = build_train_dataset(cfg, seed);
    GroupIndex index = build_group_index(train);
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(seed, 7);
    std::ifstream in(checkpoint_path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint: " + checkpoint_path);
    Trainer trainer = Trainer::load_checkpoint(in, train, index, tc);

    ExperimentConfig eval_cfg = cfg;
    for (std::size_t i = 0; i < eval_cfg.sigma_test.size(); ++i) {
        ToySpec spec = ToySpec::defaults();
        spec.sigma_yz = eval_cfg.sigma_test[i];
        const GroupedDataset test =
            gen_toy(spec, eval_cfg.dataset.n_test, derive_seed(seed, stream::kTestData, i));
        const EvalResult r = evaluate_model(trainer.params(), test,
                                            "sigma", eval_cfg.sigma_test[i]);
        std::cout << "sigma_test=" << eval_cfg.sigma_test[i] << ": total " << r.total_accuracy
                  << "%, worst group " << r.worst_accuracy << "%\n";
    }
    return 0;
}

int cmd_reproduce_toy(ExperimentConfig cfg) {
    const auto reports = reproduce_toy_table(cfg);
    emit_report(reports, cfg.out_dir);
    const std::string table = format_toy_table(reports);
    std::ofstream(cfg.out_dir + "/table.txt") << table;
    std::cout << table;
    std::cout << "files written to " << cfg.out_dir << "\n";
    return 0;
}

int cmd_reproduce_cmnist(ExperimentConfig cfg) {
    if (cfg.dataset.kind != DatasetKind::kColoredDigits) {
        throw ValidationError("reproduce-cmnist needs a config with dataset kind colored_digits");
    }
    std::vector<RunReport> reports;
    for (Method m : {Method::kErm, Method::kRcsv}) {
        ExperimentConfig c = cfg;
        c.train.method = m;
        TrainKeysSet set;
        set.lr = set.steps = set.batch_size = true;
        apply_method_defaults(c.train, c.dataset.kind, set);
        reports.push_back(run_experiment(c));
    }
    emit_report(reports, cfg.out_dir);
    const double erm_acc = reports[0].mean_total_accuracy(0);
    const double rcsv_acc = reports[1].mean_total_accuracy(0);
    std::cout << "random-correlation test set: erm " << erm_acc << "%, rcsv " << rcsv_acc
              << "% (delta " << rcsv_acc - erm_acc << ")\n";
    return 0;
}

int cmd_verify(std::uint64_t seed, bool fast, const std::string& out_path) {
    const auto reports = run_oracle_suite(seed, !fast);
    std::ostringstream jsonl;
    bool all_pass = true;
    for (const auto& r : reports) {
        jsonl << to_json_line(r) << "\n";
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.check << "  deviation="
                  << r.max_deviation << " bound=" << r.bound;
        if (!r.note.empty()) std::cout << "  (" << r.note << ")";
        std::cout << "\n";
        all_pass = all_pass && r.pass;
    }
    if (!out_path.empty()) {
        std::ofstream(out_path) << jsonl.str();
        std::cout << "oracle reports written to " << out_path << "\n";
    }
    return all_pass ? 0 : 1;
}

int cmd_report(const std::string& dir) {
    std::ifstream in(dir + "/metrics.json");
    if (!in) throw FormatError("no metrics.json under " + dir);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto reports = report_from_json(ss.str());
    if (!reports.empty() && reports.front().config.dataset.kind == DatasetKind::kToy) {
        std::cout << format_toy_table(reports);
        return 0;
    }
    for (const auto& rep : reports) {
        std::cout << rep.method << ":\n";
        for (std::size_t i = 0; i < rep.runs.front().evals.size(); ++i) {
            std::cout << "  " << rep.runs.front().evals[i].tag << ": mean total accuracy "
                      << rep.mean_total_accuracy(i) << "%\n";
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional-spurious-variation regularized training"};
    app.require_subcommand(1);

    std::string config_path, out, method, checkpoint, dir;
    std::vector<std::uint64_t> seeds;
    std::vector<double> sigma_test;
    std::uint64_t gen_seed = 1, verify_seed = 12345;
    bool fast = false;

    auto* generate = app.add_subcommand("generate", "generate a dataset container file");
    generate->add_option("--config", config_path, "experiment config file");
    generate->add_option("--seed", gen_seed, "generation seed");
    generate->add_option("--out", out, "output container path")->required();

    auto* train = app.add_subcommand("train", "train one method over the configured seeds");
    train->add_option("--config", config_path, "experiment config file");
    train->add_option("--method", method, "method override");
    train->add_option("--seed", seeds, "seed override (repeatable)");
    train->add_option("--out", out, "output directory override");
    train->add_option("--sigma-test", sigma_test, "test shift override (repeatable)");
    train->add_option("--checkpoint-dir", checkpoint, "also save per-seed checkpoints here");

    auto* evaluate = app.add_subcommand("evaluate", "evaluate a saved checkpoint");
    evaluate->add_option("--config", config_path, "experiment config file")->required();
    evaluate->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    evaluate->add_option("--sigma-test", sigma_test, "test shift override (repeatable)");

    auto* toy = app.add_subcommand("reproduce-toy", "all methods x sigma_test toy table");
    toy->add_option("--config", config_path, "experiment config file");
    toy->add_option("--seed", seeds, "seed override (repeatable)");
    toy->add_option("--out", out, "output directory override");
    toy->add_option("--sigma-test", sigma_test, "test shift override (repeatable)");

    auto* cmnist = app.add_subcommand("reproduce-cmnist",
                                      "erm vs rcsv on colored digits (needs IDX files)");
    cmnist->add_option("--config", config_path, "experiment config file")->required();
    cmnist->add_option("--seed", seeds, "seed override (repeatable)");
    cmnist->add_option("--out", out, "output directory override");

    auto* verify = app.add_subcommand("verify", "run the brute-force oracle suite");
    verify->add_option("--seed", verify_seed, "oracle suite seed");
    verify->add_flag("--fast", fast, "skip the slow convergence-trend study");
    verify->add_option("--out", out, "write JSON-lines oracle reports here");

    auto* report = app.add_subcommand("report", "render a previously written report directory");
    report->add_option("--dir", dir, "report directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return cmd_generate(config_path, gen_seed, out);
        if (train->parsed()) {
            ExperimentConfig cfg = load_or_default(config_path);
            apply_overrides(cfg, method, seeds, out, sigma_test);
            return cmd_train(cfg, checkpoint);
        }
        if (evaluate->parsed()) {
            ExperimentConfig cfg = load_or_default(config_path);
            apply_overrides(cfg, "", {}, "", sigma_test);
            return cmd_evaluate(cfg, checkpoint);
        }
        if (toy->parsed()) {
            ExperimentConfig cfg = load_or_default(config_path);
            apply_overrides(cfg, "", seeds, out, sigma_test);
            return cmd_reproduce_toy(cfg);
        }
        if (cmnist->parsed()) {
            ExperimentConfig cfg = load_or_default(config_path);
            apply_overrides(cfg, "", seeds, out, {});
            return cmd_reproduce_cmnist(cfg);
        }
        if (verify->parsed()) return cmd_verify(verify_seed, fast, out);
        if (report->parsed()) return cmd_report(dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
