#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csvreg/tensor.hpp"

namespace csvreg {

/// Decoded IDX payload: images [count x rows x cols] scaled to [0,1], or a
/// label vector, depending on the magic number.
struct IdxData {
    enum class Kind { kImages, kLabels };
    Kind kind;
    Tensor images;            // kImages
    std::vector<int> labels;  // kLabels
};

/// Parses the MNIST IDX binary layout: big-endian magic (0x00000801 labels,
/// 0x00000803 images), big-endian 4-byte dimension sizes, then a row-major
/// unsigned-byte payload. Errors carry the byte offset of the problem.
IdxData parse_idx(const std::vector<std::uint8_t>& bytes);

IdxData load_idx_file(const std::string& path);

}  // namespace csvreg
