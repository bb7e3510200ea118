#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csvreg/trainer.hpp"

namespace csvreg {

enum class DatasetKind { kToy, kColoredDigits, kFromFile };

std::string dataset_kind_name(DatasetKind k);

struct DatasetConfig {
    DatasetKind kind = DatasetKind::kToy;
    std::size_t n_train = 1000;
    std::size_t n_test = 200;
    double sigma_train = 0.99;
    // colored_digits
    std::string train_images, train_labels, test_images, test_labels;
    double alpha = 1.0;
    std::size_t hidden = 64;
    // from_file containers
    std::string train_path, test_path;

    bool operator==(const DatasetConfig&) const = default;
};

/// One experiment: dataset recipe, training recipe, evaluation shifts, seeds.
struct ExperimentConfig {
    std::string name = "experiment";
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::string out_dir = "results";
    DatasetConfig dataset;
    TrainConfig train;
    std::vector<double> sigma_test = {0.0, -0.2, -0.4, -0.6, -0.8, -0.99};

    void validate() const;
    bool operator==(const ExperimentConfig&) const;
};

/// Parses the line-oriented `[section]` / `key = value` / `#`-comment format.
/// Unknown keys, bad types and missing required fields raise ValidationError
/// naming the key and line. Method/dataset hyperparameter defaults are applied
/// for keys the document does not set.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

/// Canonical serialization; parse(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Which train keys a config document set explicitly; defaults are applied to
/// the rest.
struct TrainKeysSet {
    bool lambda = false;
    bool rho = false;
    bool sampler = false;
    bool lr = false;
    bool momentum = false;
    bool weight_decay = false;
    bool steps = false;
    bool batch_size = false;
};

/// Per-(method, dataset) hyperparameter defaults applied on top of a base
/// TrainConfig for keys the document did not set.
void apply_method_defaults(TrainConfig& train, DatasetKind kind, const TrainKeysSet& set);

}  // namespace csvreg
