#include "csvreg/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "csvreg/errors.hpp"

namespace csvreg {

namespace {

constexpr char kMagic[8] = {'C', 'S', 'V', 'R', 'G', 'D', 'S', '1'};

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError("dataset container truncated");
    return v;
}

}  // namespace

void write_dataset(std::ostream& os, const GroupedDataset& dataset) {
    dataset.validate();
    os.write(kMagic, sizeof(kMagic));
    put<std::uint8_t>(os, dataset.z_observed ? 1 : 0);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(dataset.K_y));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(dataset.K_z));
    put<std::uint64_t>(os, dataset.size());
    put<std::uint32_t>(os, static_cast<std::uint32_t>(dataset.dim()));
    put<std::uint64_t>(os, dataset.seed);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(dataset.provenance.size()));
    os.write(dataset.provenance.data(), static_cast<std::streamsize>(dataset.provenance.size()));
    for (const auto& s : dataset.samples) {
        put<std::uint16_t>(os, static_cast<std::uint16_t>(s.y));
        put<std::uint16_t>(os, dataset.z_observed ? static_cast<std::uint16_t>(s.z) : 0xFFFF);
        os.write(reinterpret_cast<const char*>(s.features.data()),
                 static_cast<std::streamsize>(s.features.size() * sizeof(double)));
    }
}

GroupedDataset read_dataset(std::istream& is) {
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("dataset container: bad magic");
    }
    GroupedDataset ds;
    ds.z_observed = get<std::uint8_t>(is) != 0;
    ds.K_y = get<std::uint32_t>(is);
    ds.K_z = get<std::uint32_t>(is);
    const std::uint64_t n = get<std::uint64_t>(is);
    const std::uint32_t dim = get<std::uint32_t>(is);
    if (n > (std::uint64_t(1) << 32) || dim > (1u << 24)) {
        throw FormatError("dataset container header claims an implausible size");
    }
    ds.seed = get<std::uint64_t>(is);
    const std::uint32_t prov_len = get<std::uint32_t>(is);
    ds.provenance.resize(prov_len);
    is.read(ds.provenance.data(), prov_len);
    if (!is) throw FormatError("dataset container truncated in provenance");

    ds.samples.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        GroupedSample& s = ds.samples[i];
        s.y = get<std::uint16_t>(is);
        const std::uint16_t z = get<std::uint16_t>(is);
        s.z = z == 0xFFFF ? kUnobservedAttribute : static_cast<int>(z);
        s.features.resize(dim);
        is.read(reinterpret_cast<char*>(s.features.data()),
                static_cast<std::streamsize>(dim * sizeof(double)));
        if (!is) throw FormatError("dataset container truncated in record " + std::to_string(i));
    }
    ds.validate();
    return ds;
}

void save_dataset(const std::string& path, const GroupedDataset& dataset) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path);
    write_dataset(out, dataset);
}

GroupedDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open for reading: " + path);
    return read_dataset(in);
}

}  // namespace csvreg
