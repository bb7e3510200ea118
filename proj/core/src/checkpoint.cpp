#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "csvreg/errors.hpp"
#include "csvreg/trainer.hpp"

namespace csvreg {

namespace {

constexpr char kMagic[8] = {'C', 'S', 'V', 'R', 'G', 'C', 'K', '1'};

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError("checkpoint truncated");
    return v;
}

void put_doubles(std::ostream& os, const std::vector<double>& v) {
    put<std::uint64_t>(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_doubles(std::istream& is) {
    const std::uint64_t n = get<std::uint64_t>(is);
    if (n > (std::uint64_t(1) << 32)) throw FormatError("checkpoint block too large");
    std::vector<double> v(n);
    if (n > 0) {
        is.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    if (!is) throw FormatError("checkpoint truncated in double block");
    return v;
}

void put_tensor(std::ostream& os, const Tensor& t) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) put<std::uint64_t>(os, d);
    put_doubles(os, t.data);
}

Tensor get_tensor(std::istream& is) {
    std::vector<std::size_t> shape(get<std::uint32_t>(is));
    for (auto& d : shape) d = get<std::uint64_t>(is);
    std::vector<double> data = get_doubles(is);
    return Tensor(std::move(shape), std::move(data));
}

void put_string(std::ostream& os, const std::string& s) {
    put<std::uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
    std::string s(get<std::uint64_t>(is), '\0');
    is.read(s.data(), static_cast<std::streamsize>(s.size()));
    if (!is) throw FormatError("checkpoint truncated in string block");
    return s;
}

void put_rng(std::ostream& os, const Rng& rng) {
    std::ostringstream tmp;
    rng.save(tmp);
    put_string(os, tmp.str());
}

void get_rng(std::istream& is, Rng& rng) {
    std::istringstream tmp(get_string(is));
    rng.load(tmp);
}

}  // namespace

void Trainer::save_checkpoint(std::ostream& os) const {
    os.write(kMagic, sizeof(kMagic));
    put<std::uint64_t>(os, config_hash(config_));
    put<std::uint64_t>(os, step_);

    put<std::uint8_t>(os, params_.arch == Arch::kLinear ? 0 : 1);
    put<std::uint8_t>(os, params_.has_bias ? 1 : 0);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(params_.layers.size()));
    for (const auto& l : params_.layers) {
        put_tensor(os, l.weight);
        put_tensor(os, l.bias);
    }

    put<double>(os, dual_.gamma);
    put<double>(os, dual_.rho);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(dual_.F.size()));
    for (const auto& f : dual_.F) put_doubles(os, f);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(dual_.u.size()));
    for (const auto& u : dual_.u) put_doubles(os, u);

    put_doubles(os, dro_weights_);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(momentum_.size()));
    for (const auto& m : momentum_) put_tensor(os, m);
    put_doubles(os, loss_trace_);
    put_doubles(os, penalty_trace_);
    put_rng(os, rng_uniform_);
    put_rng(os, rng_penalty_);
}

Trainer Trainer::load_checkpoint(std::istream& is, const GroupedDataset& dataset,
                                 const GroupIndex& index, const TrainConfig& config) {
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("checkpoint: bad magic");
    }
    const std::uint64_t stored_hash = get<std::uint64_t>(is);
    if (stored_hash != config_hash(config)) {
        throw FormatError("checkpoint config hash does not match the supplied config");
    }
    const std::uint64_t step = get<std::uint64_t>(is);

    ModelParams params;
    params.arch = get<std::uint8_t>(is) == 0 ? Arch::kLinear : Arch::kMlp;
    params.has_bias = get<std::uint8_t>(is) != 0;
    const std::uint32_t n_layers = get<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        ModelParams::Layer l;
        l.weight = get_tensor(is);
        l.bias = get_tensor(is);
        params.layers.push_back(std::move(l));
    }

    Trainer t(dataset, index, config, std::move(params));
    t.step_ = step;
    t.dual_.gamma = get<double>(is);
    t.dual_.rho = get<double>(is);
    t.dual_.F.resize(get<std::uint32_t>(is));
    for (auto& f : t.dual_.F) f = get_doubles(is);
    t.dual_.u.resize(get<std::uint32_t>(is));
    for (auto& u : t.dual_.u) u = get_doubles(is);
    t.dro_weights_ = get_doubles(is);
    t.momentum_.clear();
    const std::uint32_t n_mom = get<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < n_mom; ++i) t.momentum_.push_back(get_tensor(is));
    t.loss_trace_ = get_doubles(is);
    t.penalty_trace_ = get_doubles(is);
    get_rng(is, t.rng_uniform_);
    get_rng(is, t.rng_penalty_);
    return t;
}

}  // namespace csvreg
