#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "csvreg/dataset.hpp"
#include "csvreg/tensor.hpp"

namespace csvreg {

using Rgb = std::array<double, 3>;

enum class ColorAssignment { kFixed1, kFixed2, kRandom };

/// Colorization of grayscale digits: 20 colors, the first 10 are foreground
/// candidates and the last 10 background candidates. The fixed schemes map each
/// digit class to a deterministic (foreground, background) pair via two
/// distinct bijections; the random scheme draws both colors per sample.
/// `alpha` < 1 turns a fixed scheme into a mixture: floor(alpha * n) samples
/// keep the fixed assignment, the rest are colored at random.
struct ColorScheme {
    std::vector<Rgb> palette = default_palette();
    ColorAssignment assignment = ColorAssignment::kFixed1;
    double alpha = 1.0;

    static std::vector<Rgb> default_palette();
    void validate() const;
};

/// Turns [n x r x c] grayscale images plus digit labels into a GroupedDataset:
/// images are 2x2 mean-pooled to half resolution, rendered as
/// p * foreground + (1-p) * background per pixel, and flattened to RGB
/// features. The spurious attribute z is the foreground color index.
GroupedDataset colorize(const Tensor& images, const std::vector<int>& labels,
                        const ColorScheme& scheme, std::uint64_t seed);

}  // namespace csvreg
