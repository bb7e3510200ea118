#include "csvreg/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "csvreg/errors.hpp"

namespace csvreg {

std::string dataset_kind_name(DatasetKind k) {
    switch (k) {
        case DatasetKind::kToy: return "toy";
        case DatasetKind::kColoredDigits: return "colored_digits";
        case DatasetKind::kFromFile: return "from_file";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ValidationError("at least one seed is required");
    for (double s : sigma_test) {
        if (s < -1.0 || s > 1.0) throw ValidationError("sigma_test values must lie in [-1, 1]");
    }
    if (dataset.sigma_train < -1.0 || dataset.sigma_train > 1.0) {
        throw ValidationError("sigma_train must lie in [-1, 1]");
    }
    if (dataset.kind == DatasetKind::kFromFile && dataset.train_path.empty()) {
        throw ValidationError("missing required key 'train_path' for dataset kind from_file");
    }
    if (dataset.kind == DatasetKind::kColoredDigits &&
        (dataset.train_images.empty() || dataset.train_labels.empty())) {
        throw ValidationError(
            "missing required keys 'train_images'/'train_labels' for dataset kind colored_digits");
    }
    train.validate();
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
    return name == o.name && seeds == o.seeds && out_dir == o.out_dir && dataset == o.dataset &&
           serialize_train_config(train) == serialize_train_config(o.train) &&
           sigma_test == o.sigma_test;
}

void apply_method_defaults(TrainConfig& train, DatasetKind kind, const TrainKeysSet& set) {
    if (!set.sampler) train.sampler = default_sampler(train.method);
    const bool toy = kind != DatasetKind::kColoredDigits;
    if (!set.lambda) {
        switch (train.method) {
            case Method::kRcsv: train.lambda = 1.0; break;
            case Method::kRcsvU: train.lambda = toy ? 5.0 : 0.05; break;
            case Method::kCorrelation: train.lambda = 1.0; break;
            default: train.lambda = 0.0; break;
        }
    }
    // The attribute-free method runs with a wider smoothing and the momentum
    // the toy task was tuned with; the observed-attribute method needs the
    // weight decay to keep the margins out of the saturated regime where the
    // penalty loses its signal.
    if (train.method == Method::kRcsvU) {
        if (!set.rho && toy) train.rho = 0.2;
        if (!set.momentum) train.momentum = 0.9;
    }
    if (train.method == Method::kRcsv && toy && !set.weight_decay) {
        train.weight_decay = 0.1;
    }
    if (kind == DatasetKind::kColoredDigits) {
        if (!set.lr) train.lr = 0.05;
        if (!set.momentum) train.momentum = 0.9;
        if (!set.steps) train.steps = 4000;
        if (!set.batch_size) train.batch_size = 128;
    }
}

namespace {

struct RawEntry {
    std::string value;
    std::size_t line;
};

struct RawConfig {
    std::vector<std::pair<std::string, RawEntry>> entries;  // "section.key" -> value

    const RawEntry* find(const std::string& dotted) const {
        for (const auto& [k, v] : entries) {
            if (k == dotted) return &v;
        }
        return nullptr;
    }
};

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_key(const std::string& key, std::size_t line, const std::string& why) {
    throw ValidationError("config key '" + key + "' at line " + std::to_string(line) + ": " + why);
}

double parse_double(const std::string& key, const RawEntry& e) {
    try {
        std::size_t used = 0;
        const double v = std::stod(e.value, &used);
        if (used != e.value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        bad_key(key, e.line, "expected a number, got '" + e.value + "'");
    }
}

std::size_t parse_size(const std::string& key, const RawEntry& e) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(e.value, &used);
        if (used != e.value.size() || v < 0) throw std::invalid_argument("");
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        bad_key(key, e.line, "expected a nonnegative integer, got '" + e.value + "'");
    }
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

const std::set<std::string> kKnownKeys = {
    "experiment.name", "experiment.seeds", "experiment.out_dir",
    "dataset.kind", "dataset.n_train", "dataset.n_test", "dataset.sigma_train",
    "dataset.train_images", "dataset.train_labels", "dataset.test_images", "dataset.test_labels",
    "dataset.alpha", "dataset.hidden", "dataset.train_path", "dataset.test_path",
    "train.method", "train.lambda", "train.rho", "train.gamma", "train.lr", "train.momentum",
    "train.weight_decay", "train.steps", "train.batch_size", "train.sampler", "train.label_shift",
    "train.group_dro_eta", "train.schedule",
    "eval.sigma_test",
};

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    RawConfig raw;
    std::string section;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ValidationError("malformed section header at line " + std::to_string(lineno));
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section != "experiment" && section != "dataset" && section != "train" &&
                section != "eval") {
                throw ValidationError("unknown section '" + section + "' at line " +
                                      std::to_string(lineno));
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("expected 'key = value' at line " + std::to_string(lineno));
        }
        if (section.empty()) {
            throw ValidationError("key outside any [section] at line " + std::to_string(lineno));
        }
        const std::string key = section + "." + trim(line.substr(0, eq));
        if (!kKnownKeys.count(key)) {
            throw ValidationError("unknown key '" + key + "' at line " + std::to_string(lineno));
        }
        raw.entries.emplace_back(key, RawEntry{trim(line.substr(eq + 1)), lineno});
    }

    ExperimentConfig cfg;
    auto str = [&](const char* key, std::string& dst) {
        if (const RawEntry* e = raw.find(key)) dst = e->value;
    };
    str("experiment.name", cfg.name);
    str("experiment.out_dir", cfg.out_dir);
    if (const RawEntry* e = raw.find("experiment.seeds")) {
        cfg.seeds.clear();
        for (const auto& item : split_list(e->value)) {
            try {
                cfg.seeds.push_back(std::stoull(item));
            } catch (const std::exception&) {
                bad_key("experiment.seeds", e->line, "expected integers, got '" + item + "'");
            }
        }
        if (cfg.seeds.empty()) bad_key("experiment.seeds", e->line, "empty seed list");
    }

    if (const RawEntry* e = raw.find("dataset.kind")) {
        if (e->value == "toy") cfg.dataset.kind = DatasetKind::kToy;
        else if (e->value == "colored_digits") cfg.dataset.kind = DatasetKind::kColoredDigits;
        else if (e->value == "from_file") cfg.dataset.kind = DatasetKind::kFromFile;
        else bad_key("dataset.kind", e->line, "expected toy | colored_digits | from_file");
    }
    if (const RawEntry* e = raw.find("dataset.n_train")) cfg.dataset.n_train = parse_size("dataset.n_train", *e);
    if (const RawEntry* e = raw.find("dataset.n_test")) cfg.dataset.n_test = parse_size("dataset.n_test", *e);
    if (const RawEntry* e = raw.find("dataset.sigma_train")) cfg.dataset.sigma_train = parse_double("dataset.sigma_train", *e);
    str("dataset.train_images", cfg.dataset.train_images);
    str("dataset.train_labels", cfg.dataset.train_labels);
    str("dataset.test_images", cfg.dataset.test_images);
    str("dataset.test_labels", cfg.dataset.test_labels);
    if (const RawEntry* e = raw.find("dataset.alpha")) cfg.dataset.alpha = parse_double("dataset.alpha", *e);
    if (const RawEntry* e = raw.find("dataset.hidden")) cfg.dataset.hidden = parse_size("dataset.hidden", *e);
    str("dataset.train_path", cfg.dataset.train_path);
    str("dataset.test_path", cfg.dataset.test_path);

    if (const RawEntry* e = raw.find("train.method")) {
        const auto m = parse_method(e->value);
        if (!m) bad_key("train.method", e->line, "unknown method '" + e->value + "'");
        cfg.train.method = *m;
    }
    if (const RawEntry* e = raw.find("train.lambda")) {
        cfg.train.lambda = parse_double("train.lambda", *e);
        if (cfg.train.lambda < 0.0) bad_key("train.lambda", e->line, "must be nonnegative");
    }
    if (const RawEntry* e = raw.find("train.rho")) {
        cfg.train.rho = parse_double("train.rho", *e);
        if (cfg.train.rho <= 0.0) bad_key("train.rho", e->line, "must be positive");
    }
    if (const RawEntry* e = raw.find("train.gamma")) {
        cfg.train.gamma = parse_double("train.gamma", *e);
        if (cfg.train.gamma <= 0.0 || cfg.train.gamma > 1.0) {
            bad_key("train.gamma", e->line, "must lie in (0, 1]");
        }
    }
    if (const RawEntry* e = raw.find("train.lr")) {
        cfg.train.lr = parse_double("train.lr", *e);
        if (cfg.train.lr <= 0.0) bad_key("train.lr", e->line, "must be positive");
    }
    if (const RawEntry* e = raw.find("train.momentum")) cfg.train.momentum = parse_double("train.momentum", *e);
    if (const RawEntry* e = raw.find("train.weight_decay")) cfg.train.weight_decay = parse_double("train.weight_decay", *e);
    if (const RawEntry* e = raw.find("train.steps")) cfg.train.steps = parse_size("train.steps", *e);
    if (const RawEntry* e = raw.find("train.batch_size")) cfg.train.batch_size = parse_size("train.batch_size", *e);
    if (const RawEntry* e = raw.find("train.sampler")) {
        if (e->value == "uniform") cfg.train.sampler = {SamplerKind::kUniform};
        else if (e->value == "class_balanced") cfg.train.sampler = {SamplerKind::kClassBalanced};
        else if (e->value == "group_balanced") cfg.train.sampler = {SamplerKind::kGroupBalanced};
        else bad_key("train.sampler", e->line, "expected uniform | class_balanced | group_balanced");
    }
    if (const RawEntry* e = raw.find("train.label_shift")) {
        if (e->value == "off") cfg.train.label_shift = LabelShift::kOff;
        else if (e->value == "uniform_class") cfg.train.label_shift = LabelShift::kUniformClass;
        else bad_key("train.label_shift", e->line, "expected off | uniform_class");
    }
    if (const RawEntry* e = raw.find("train.group_dro_eta")) cfg.train.group_dro_eta = parse_double("train.group_dro_eta", *e);
    if (const RawEntry* e = raw.find("train.schedule")) {
        if (e->value == "constant") cfg.train.schedule = Schedule::kConstant;
        else if (e->value == "theorem") cfg.train.schedule = Schedule::kTheoremScaled;
        else bad_key("train.schedule", e->line, "expected constant | theorem");
    }
    if (const RawEntry* e = raw.find("eval.sigma_test")) {
        cfg.sigma_test.clear();
        for (const auto& item : split_list(e->value)) {
            try {
                cfg.sigma_test.push_back(std::stod(item));
            } catch (const std::exception&) {
                bad_key("eval.sigma_test", e->line, "expected numbers, got '" + item + "'");
            }
        }
    }

    TrainKeysSet set;
    set.lambda = raw.find("train.lambda") != nullptr;
    set.rho = raw.find("train.rho") != nullptr;
    set.sampler = raw.find("train.sampler") != nullptr;
    set.lr = raw.find("train.lr") != nullptr;
    set.momentum = raw.find("train.momentum") != nullptr;
    set.weight_decay = raw.find("train.weight_decay") != nullptr;
    set.steps = raw.find("train.steps") != nullptr;
    set.batch_size = raw.find("train.batch_size") != nullptr;
    apply_method_defaults(cfg.train, cfg.dataset.kind, set);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "[experiment]\n";
    os << "name = " << c.name << "\n";
    os << "seeds = ";
    for (std::size_t i = 0; i < c.seeds.size(); ++i) os << (i ? "," : "") << c.seeds[i];
    os << "\n";
    os << "out_dir = " << c.out_dir << "\n\n";

    os << "[dataset]\n";
    os << "kind = " << dataset_kind_name(c.dataset.kind) << "\n";
    os << "n_train = " << c.dataset.n_train << "\n";
    os << "n_test = " << c.dataset.n_test << "\n";
    os << "sigma_train = " << fmt(c.dataset.sigma_train) << "\n";
    if (!c.dataset.train_images.empty()) os << "train_images = " << c.dataset.train_images << "\n";
    if (!c.dataset.train_labels.empty()) os << "train_labels = " << c.dataset.train_labels << "\n";
    if (!c.dataset.test_images.empty()) os << "test_images = " << c.dataset.test_images << "\n";
    if (!c.dataset.test_labels.empty()) os << "test_labels = " << c.dataset.test_labels << "\n";
    os << "alpha = " << fmt(c.dataset.alpha) << "\n";
    os << "hidden = " << c.dataset.hidden << "\n";
    if (!c.dataset.train_path.empty()) os << "train_path = " << c.dataset.train_path << "\n";
    if (!c.dataset.test_path.empty()) os << "test_path = " << c.dataset.test_path << "\n";
    os << "\n[train]\n";
    os << "method = " << method_name(c.train.method) << "\n";
    os << "lambda = " << fmt(c.train.lambda) << "\n";
    os << "rho = " << fmt(c.train.rho) << "\n";
    os << "gamma = " << fmt(c.train.gamma) << "\n";
    os << "lr = " << fmt(c.train.lr) << "\n";
    os << "momentum = " << fmt(c.train.momentum) << "\n";
    os << "weight_decay = " << fmt(c.train.weight_decay) << "\n";
    os << "steps = " << c.train.steps << "\n";
    os << "batch_size = " << c.train.batch_size << "\n";
    switch (c.train.sampler.kind) {
        case SamplerKind::kUniform: os << "sampler = uniform\n"; break;
        case SamplerKind::kClassBalanced: os << "sampler = class_balanced\n"; break;
        case SamplerKind::kGroupBalanced: os << "sampler = group_balanced\n"; break;
    }
    os << "label_shift = " << (c.train.label_shift == LabelShift::kOff ? "off" : "uniform_class")
       << "\n";
    os << "group_dro_eta = " << fmt(c.train.group_dro_eta) << "\n";
    os << "schedule = " << (c.train.schedule == Schedule::kConstant ? "constant" : "theorem")
       << "\n";
    os << "\n[eval]\n";
    os << "sigma_test = ";
    for (std::size_t i = 0; i < c.sigma_test.size(); ++i) {
        os << (i ? "," : "") << fmt(c.sigma_test[i]);
    }
    os << "\n";
    return os.str();
}

}  // namespace csvreg
