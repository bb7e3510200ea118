#include "csvreg/idx.hpp"

#include <fstream>

#include "csvreg/errors.hpp"

namespace csvreg {

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
    if (offset + 4 > bytes.size()) {
        throw FormatError("IDX truncated: need 4 bytes at offset " + std::to_string(offset) +
                          ", have " + std::to_string(bytes.size() - offset));
    }
    return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
           (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

}  // namespace

IdxData parse_idx(const std::vector<std::uint8_t>& bytes) {
    const std::uint32_t magic = read_be32(bytes, 0);
    constexpr std::uint32_t kLabelMagic = 0x00000801;
    constexpr std::uint32_t kImageMagic = 0x00000803;
    if (magic != kLabelMagic && magic != kImageMagic) {
        throw FormatError("IDX bad magic at offset 0: got 0x" + [&] {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%08x", magic);
            return std::string(buf);
        }());
    }
    const std::size_t ndims = magic == kLabelMagic ? 1 : 3;
    std::vector<std::size_t> dims(ndims);
    std::size_t total = 1;
    for (std::size_t i = 0; i < ndims; ++i) {
        const std::uint32_t d = read_be32(bytes, 4 + 4 * i);
        dims[i] = d;
        if (d != 0 && total > (std::size_t(1) << 40) / d) {
            throw FormatError("IDX dimension overflow at offset " + std::to_string(4 + 4 * i));
        }
        total *= d;
    }
    const std::size_t payload_offset = 4 + 4 * ndims;
    if (bytes.size() != payload_offset + total) {
        throw FormatError("IDX payload length mismatch at offset " + std::to_string(payload_offset) +
                          ": expected " + std::to_string(total) + " bytes, have " +
                          std::to_string(bytes.size() - payload_offset));
    }

    IdxData out;
    if (magic == kLabelMagic) {
        out.kind = IdxData::Kind::kLabels;
        out.labels.resize(total);
        for (std::size_t i = 0; i < total; ++i) {
            out.labels[i] = static_cast<int>(bytes[payload_offset + i]);
        }
    } else {
        out.kind = IdxData::Kind::kImages;
        out.images = Tensor::zeros(dims);
        for (std::size_t i = 0; i < total; ++i) {
            out.images.data[i] = static_cast<double>(bytes[payload_offset + i]) / 255.0;
        }
    }
    return out;
}

IdxData load_idx_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open IDX file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_idx(bytes);
}

}  // namespace csvreg
