#include "csvreg/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "csvreg/colorize.hpp"
#include "csvreg/csv_metrics.hpp"
#include "csvreg/dataset_io.hpp"
#include "csvreg/errors.hpp"
#include "csvreg/idx.hpp"
#include "json.hpp"

namespace csvreg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_sigma(double sigma) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", sigma);
    return buf;
}

std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

EvalResult evaluate_model(const ModelParams& params, const GroupedDataset& test,
                          const std::string& tag, double sigma_test) {
    EvalResult r;
    r.tag = tag;
    r.sigma_test = sigma_test;
    r.K_y = test.K_y;
    r.K_z = test.z_observed ? test.K_z : 1;
    r.group_accuracy.assign(r.K_y * r.K_z, kNaN);
    r.group_count.assign(r.K_y * r.K_z, 0);

    std::vector<std::size_t> ids(test.size());
    std::iota(ids.begin(), ids.end(), 0);
    const std::vector<int> pred = predict(params, test.features_of(ids));

    std::vector<std::size_t> correct(r.K_y * r.K_z, 0);
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& s = test.samples[i];
        const std::size_t z = test.z_observed ? static_cast<std::size_t>(s.z) : 0;
        const std::size_t cell = static_cast<std::size_t>(s.y) * r.K_z + z;
        r.group_count[cell] += 1;
        if (pred[i] == s.y) correct[cell] += 1;
    }
    double worst = 101.0, avg = 0.0;
    std::size_t populated = 0, total_n = 0, total_correct = 0;
    for (std::size_t c = 0; c < r.group_count.size(); ++c) {
        if (r.group_count[c] == 0) continue;
        const double acc = 100.0 * static_cast<double>(correct[c]) /
                           static_cast<double>(r.group_count[c]);
        r.group_accuracy[c] = acc;
        worst = std::min(worst, acc);
        avg += acc;
        ++populated;
        total_n += r.group_count[c];
        total_correct += correct[c];
    }
    r.avg_accuracy = populated ? avg / static_cast<double>(populated) : kNaN;
    r.worst_accuracy = populated ? worst : kNaN;
    r.total_accuracy =
        total_n ? 100.0 * static_cast<double>(total_correct) / static_cast<double>(total_n) : kNaN;
    return r;
}

std::optional<double> cosine_similarity_diag(const ModelParams& params,
                                             const std::vector<double>& mu2) {
    if (params.arch != Arch::kLinear || params.output_dim() != 1) {
        throw ValidationError("cosine diagnostic is defined for the single-output linear model");
    }
    const Tensor& w = params.layers.front().weight;  // [dim x 1]
    if (w.rows() < mu2.size()) {
        throw ValidationError("parameter dimension smaller than the spurious block");
    }
    double dot = 0.0, n_theta = 0.0, n_mu = 0.0;
    const std::size_t off = w.rows() - mu2.size();
    for (std::size_t j = 0; j < mu2.size(); ++j) {
        const double t = w.data[off + j];
        dot += t * mu2[j];
        n_theta += t * t;
        n_mu += mu2[j] * mu2[j];
    }
    if (n_theta == 0.0 || n_mu == 0.0) return std::nullopt;
    return std::abs(dot) / (std::sqrt(n_theta) * std::sqrt(n_mu));
}

std::vector<double> dataset_losses(const ModelParams& params, const GroupedDataset& dataset) {
    std::vector<std::size_t> ids(dataset.size());
    std::iota(ids.begin(), ids.end(), 0);
    Tape tape;
    ModelNodes nodes = register_params(tape, params);
    NodeId out = forward(tape, params, nodes, tape.input(dataset.features_of(ids)));
    NodeId losses = per_sample_losses(tape, params, out, dataset.labels_of(ids));
    return tape.value(losses).data;
}

GroupedDataset build_train_dataset(const ExperimentConfig& config, std::uint64_t seed) {
    switch (config.dataset.kind) {
        case DatasetKind::kToy: {
            ToySpec spec = ToySpec::defaults();
            spec.sigma_yz = config.dataset.sigma_train;
            return gen_toy(spec, config.dataset.n_train, derive_seed(seed, stream::kData));
        }
        case DatasetKind::kColoredDigits: {
            const IdxData images = load_idx_file(config.dataset.train_images);
            const IdxData labels = load_idx_file(config.dataset.train_labels);
            if (images.kind != IdxData::Kind::kImages || labels.kind != IdxData::Kind::kLabels) {
                throw FormatError("colored_digits expects an image file and a label file");
            }
            ColorScheme scheme;
            scheme.assignment = ColorAssignment::kFixed1;
            scheme.alpha = config.dataset.alpha;
            return colorize(images.images, labels.labels, scheme, derive_seed(seed, stream::kData));
        }
        case DatasetKind::kFromFile:
            return load_dataset(config.dataset.train_path);
    }
    throw ValidationError("unreachable dataset kind");
}

namespace {

ModelParams make_model(const ExperimentConfig& config, const GroupedDataset& train,
                       std::uint64_t seed) {
    if (config.dataset.kind == DatasetKind::kColoredDigits) {
        Rng rng(derive_seed(seed, stream::kInit));
        return ModelParams::mlp(train.dim(), config.dataset.hidden, train.K_y, rng);
    }
    if (config.dataset.kind == DatasetKind::kToy) {
        return ModelParams::linear(train.dim(), 1, /*with_bias=*/false);
    }
    if (train.K_y == 2) return ModelParams::linear(train.dim(), 1);
    return ModelParams::linear(train.dim(), train.K_y);
}

std::vector<std::pair<std::string, GroupedDataset>> build_test_sets(
    const ExperimentConfig& config, std::uint64_t seed) {
    std::vector<std::pair<std::string, GroupedDataset>> out;
    switch (config.dataset.kind) {
        case DatasetKind::kToy: {
            for (std::size_t i = 0; i < config.sigma_test.size(); ++i) {
                ToySpec spec = ToySpec::defaults();
                spec.sigma_yz = config.sigma_test[i];
                out.emplace_back("sigma=" + format_sigma(config.sigma_test[i]),
                                 gen_toy(spec, config.dataset.n_test,
                                         derive_seed(seed, stream::kTestData, i)));
            }
            break;
        }
        case DatasetKind::kColoredDigits: {
            const IdxData images = load_idx_file(config.dataset.test_images);
            const IdxData labels = load_idx_file(config.dataset.test_labels);
            ColorScheme random_scheme;
            random_scheme.assignment = ColorAssignment::kRandom;
            out.emplace_back("random", colorize(images.images, labels.labels, random_scheme,
                                                derive_seed(seed, stream::kTestData, 0)));
            ColorScheme fixed2;
            fixed2.assignment = ColorAssignment::kFixed2;
            out.emplace_back("fixed_2", colorize(images.images, labels.labels, fixed2,
                                                 derive_seed(seed, stream::kTestData, 1)));
            break;
        }
        case DatasetKind::kFromFile: {
            if (!config.dataset.test_path.empty()) {
                out.emplace_back("test", load_dataset(config.dataset.test_path));
            }
            break;
        }
    }
    return out;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config, const std::string& checkpoint_dir) {
    config.validate();
    RunReport report;
    report.method = method_name(config.train.method);
    report.config = config;

    for (std::uint64_t seed : config.seeds) {
        const auto t0 = std::chrono::steady_clock::now();
        GroupedDataset train = build_train_dataset(config, seed);
        GroupIndex index = build_group_index(train);

        TrainConfig tc = config.train;
        tc.seed = derive_seed(seed, 7);
        Trainer trainer(train, index, tc, make_model(config, train, seed));
        trainer.run();
        if (!checkpoint_dir.empty()) {
            std::error_code ec;
            std::filesystem::create_directories(checkpoint_dir, ec);
            const std::string path = checkpoint_dir + "/" + report.method + "_seed" +
                                     std::to_string(seed) + ".ckpt";
            std::ofstream out(path, std::ios::binary);
            if (!out) throw FormatError("cannot open for writing: " + path);
            trainer.save_checkpoint(out);
        }

        SeedRun run;
        run.seed = seed;
        run.loss_trace = trainer.loss_trace();
        run.penalty_trace = trainer.penalty_trace();

        const std::vector<double> losses = dataset_losses(trainer.params(), train);
        const GroupLossStats stats = group_mean_losses(losses, index);
        run.empirical_csv_final =
            (index.attributes_observed && index.assumption1_ok) ? empirical_csv(stats) : kNaN;
        run.csv_unobserved_final = csv_unobserved(stats.per_class, stats.p_hat);
        for (std::size_t n_k : index.class_counts) {
            if (n_k < 10) run.csv_u_small_class = true;
        }
        if (config.dataset.kind == DatasetKind::kToy) {
            run.cosine_diag = cosine_similarity_diag(trainer.params(), ToySpec::defaults().mu2);
        }
        for (const auto& [tag, test] : build_test_sets(config, seed)) {
            const double sigma =
                config.dataset.kind == DatasetKind::kToy
                    ? config.sigma_test[run.evals.size()]
                    : kNaN;
            run.evals.push_back(evaluate_model(trainer.params(), test, tag, sigma));
        }
        run.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.runs.push_back(std::move(run));
    }
    return report;
}

double RunReport::mean_total_accuracy(std::size_t eval_index) const {
    double acc = 0.0;
    for (const auto& r : runs) acc += r.evals[eval_index].total_accuracy;
    return acc / static_cast<double>(runs.size());
}

double RunReport::stddev_total_accuracy(std::size_t eval_index) const {
    const double m = mean_total_accuracy(eval_index);
    double acc = 0.0;
    for (const auto& r : runs) {
        const double d = r.evals[eval_index].total_accuracy - m;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(runs.size()));
}

double RunReport::mean_cosine() const {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& r : runs) {
        if (r.cosine_diag) {
            acc += *r.cosine_diag;
            ++n;
        }
    }
    return n ? acc / static_cast<double>(n) : kNaN;
}

std::vector<RunReport> reproduce_toy_table(ExperimentConfig base) {
    base.dataset.kind = DatasetKind::kToy;
    std::vector<RunReport> reports;
    for (Method m : {Method::kErm, Method::kErmrsY, Method::kErmrsYz, Method::kGroupDro,
                     Method::kCorrelation, Method::kRcsv, Method::kRcsvU}) {
        ExperimentConfig cfg = base;
        cfg.train.method = m;
        // fresh per-method hyperparameter defaults
        TrainKeysSet set;
        set.lr = set.steps = set.batch_size = true;
        apply_method_defaults(cfg.train, cfg.dataset.kind, set);
        reports.push_back(run_experiment(cfg));
    }
    return reports;
}

std::string format_toy_table(const std::vector<RunReport>& reports) {
    std::ostringstream os;
    if (reports.empty()) return "";
    const auto& sigmas = reports.front().config.sigma_test;
    os << "test accuracy (%) by sigma_test, mean over " << reports.front().config.seeds.size()
       << " seeds (std in parentheses)\n\n";
    os << "method      ";
    for (double s : sigmas) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%13s", format_sigma(s).c_str());
        os << buf;
    }
    os << "       |cos|\n";
    for (const auto& rep : reports) {
        char name[32];
        std::snprintf(name, sizeof(name), "%-12s", rep.method.c_str());
        os << name;
        for (std::size_t i = 0; i < sigmas.size(); ++i) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%7.1f (%3.1f)", rep.mean_total_accuracy(i),
                          rep.stddev_total_accuracy(i));
            os << buf;
        }
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%12.3f", rep.mean_cosine());
        os << buf << "\n";
    }
    os << "\nnote: groups here are the four (y, z) cells; domain-style baselines that read\n"
          "the shift as two domains (y = z vs y != z) would group differently.\n";
    return os.str();
}

std::string results_csv(const std::vector<RunReport>& reports) {
    std::ostringstream os;
    os << "method,seed,slice,metric,value\r\n";
    for (const auto& rep : reports) {
        for (const auto& run : rep.runs) {
            for (const auto& ev : run.evals) {
                os << rep.method << "," << run.seed << "," << ev.tag << ",total_accuracy,"
                   << fmt_full(ev.total_accuracy) << "\r\n";
                os << rep.method << "," << run.seed << "," << ev.tag << ",avg_group_accuracy,"
                   << fmt_full(ev.avg_accuracy) << "\r\n";
                os << rep.method << "," << run.seed << "," << ev.tag << ",worst_group_accuracy,"
                   << fmt_full(ev.worst_accuracy) << "\r\n";
                for (std::size_t k = 0; k < ev.K_y; ++k) {
                    for (std::size_t z = 0; z < ev.K_z; ++z) {
                        const std::size_t cell = k * ev.K_z + z;
                        if (ev.group_count[cell] == 0) continue;
                        os << rep.method << "," << run.seed << "," << ev.tag << ":y" << k << "-z"
                           << z << ",group_accuracy," << fmt_full(ev.group_accuracy[cell])
                           << "\r\n";
                    }
                }
            }
            if (!std::isnan(run.empirical_csv_final)) {
                os << rep.method << "," << run.seed << ",train,empirical_csv,"
                   << fmt_full(run.empirical_csv_final) << "\r\n";
            }
            os << rep.method << "," << run.seed << ",train,csv_unobserved,"
               << fmt_full(run.csv_unobserved_final) << "\r\n";
            if (run.cosine_diag) {
                os << rep.method << "," << run.seed << ",train,cosine_similarity,"
                   << fmt_full(*run.cosine_diag) << "\r\n";
            }
        }
    }
    return os.str();
}

namespace {

nlohmann::json eval_to_json(const EvalResult& e) {
    nlohmann::json j;
    j["tag"] = e.tag;
    if (!std::isnan(e.sigma_test)) j["sigma_test"] = e.sigma_test;
    j["K_y"] = e.K_y;
    j["K_z"] = e.K_z;
    j["group_count"] = e.group_count;
    nlohmann::json accs = nlohmann::json::array();
    for (double a : e.group_accuracy) {
        if (std::isnan(a)) accs.push_back(nullptr);
        else accs.push_back(a);
    }
    j["group_accuracy"] = accs;
    j["avg_accuracy"] = e.avg_accuracy;
    j["total_accuracy"] = e.total_accuracy;
    j["worst_accuracy"] = e.worst_accuracy;
    return j;
}

EvalResult eval_from_json(const nlohmann::json& j) {
    EvalResult e;
    e.tag = j.at("tag").get<std::string>();
    e.sigma_test = j.contains("sigma_test") ? j.at("sigma_test").get<double>() : kNaN;
    e.K_y = j.at("K_y").get<std::size_t>();
    e.K_z = j.at("K_z").get<std::size_t>();
    e.group_count = j.at("group_count").get<std::vector<std::size_t>>();
    for (const auto& a : j.at("group_accuracy")) {
        e.group_accuracy.push_back(a.is_null() ? kNaN : a.get<double>());
    }
    e.avg_accuracy = j.at("avg_accuracy").get<double>();
    e.total_accuracy = j.at("total_accuracy").get<double>();
    e.worst_accuracy = j.at("worst_accuracy").get<double>();
    return e;
}

}  // namespace

std::string report_to_json(const std::vector<RunReport>& reports) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& rep : reports) {
        nlohmann::json r;
        r["method"] = rep.method;
        r["config"] = serialize_config(rep.config);
        nlohmann::json runs = nlohmann::json::array();
        for (const auto& run : rep.runs) {
            nlohmann::json jr;
            jr["seed"] = run.seed;
            nlohmann::json evals = nlohmann::json::array();
            for (const auto& e : run.evals) evals.push_back(eval_to_json(e));
            jr["evals"] = evals;
            if (!std::isnan(run.empirical_csv_final)) {
                jr["empirical_csv_final"] = run.empirical_csv_final;
            }
            jr["csv_unobserved_final"] = run.csv_unobserved_final;
            if (run.csv_u_small_class) jr["csv_u_small_class"] = true;
            if (run.cosine_diag) jr["cosine_diag"] = *run.cosine_diag;
            jr["loss_trace"] = run.loss_trace;
            jr["penalty_trace"] = run.penalty_trace;
            jr["wall_seconds"] = run.wall_seconds;
            runs.push_back(std::move(jr));
        }
        r["runs"] = std::move(runs);
        out.push_back(std::move(r));
    }
    return out.dump(2);
}

std::vector<RunReport> report_from_json(const std::string& text) {
    const nlohmann::json in = nlohmann::json::parse(text);
    std::vector<RunReport> reports;
    for (const auto& r : in) {
        RunReport rep;
        rep.method = r.at("method").get<std::string>();
        rep.config = parse_config(r.at("config").get<std::string>());
        for (const auto& jr : r.at("runs")) {
            SeedRun run;
            run.seed = jr.at("seed").get<std::uint64_t>();
            for (const auto& e : jr.at("evals")) run.evals.push_back(eval_from_json(e));
            run.empirical_csv_final = jr.contains("empirical_csv_final")
                                          ? jr.at("empirical_csv_final").get<double>()
                                          : kNaN;
            run.csv_unobserved_final = jr.at("csv_unobserved_final").get<double>();
            run.csv_u_small_class = jr.value("csv_u_small_class", false);
            if (jr.contains("cosine_diag")) run.cosine_diag = jr.at("cosine_diag").get<double>();
            run.loss_trace = jr.at("loss_trace").get<std::vector<double>>();
            run.penalty_trace = jr.at("penalty_trace").get<std::vector<double>>();
            run.wall_seconds = jr.at("wall_seconds").get<double>();
            rep.runs.push_back(std::move(run));
        }
        reports.push_back(std::move(rep));
    }
    return reports;
}

void emit_report(const std::vector<RunReport>& reports, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw FormatError("cannot create output directory " + dir + ": " + ec.message());

    auto write_file = [&](const std::string& name, const std::string& contents) {
        const std::string path = dir + "/" + name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw FormatError("cannot open for writing: " + path);
        out << contents;
        if (!out) throw FormatError("write failed: " + path);
    };
    write_file("results.csv", results_csv(reports));
    write_file("metrics.json", report_to_json(reports));
    if (!reports.empty()) write_file("config.echo", serialize_config(reports.front().config));
}

}  // namespace csvreg
