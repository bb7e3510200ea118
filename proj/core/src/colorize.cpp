#include "csvreg/colorize.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

#include "csvreg/errors.hpp"

namespace csvreg {

std::vector<Rgb> ColorScheme::default_palette() {
    // 10 saturated foreground colors followed by 10 muted background colors.
    return {
        Rgb{0.894, 0.102, 0.110}, Rgb{0.216, 0.494, 0.722}, Rgb{0.302, 0.686, 0.290},
        Rgb{0.596, 0.306, 0.639}, Rgb{1.000, 0.498, 0.000}, Rgb{0.969, 0.506, 0.749},
        Rgb{0.651, 0.337, 0.157}, Rgb{0.400, 0.761, 0.647}, Rgb{0.902, 0.670, 0.008},
        Rgb{0.369, 0.310, 0.635},
        Rgb{0.992, 0.753, 0.525}, Rgb{0.702, 0.803, 0.890}, Rgb{0.800, 0.922, 0.773},
        Rgb{0.871, 0.796, 0.894}, Rgb{0.996, 0.851, 0.650}, Rgb{0.980, 0.745, 0.835},
        Rgb{0.871, 0.722, 0.529}, Rgb{0.745, 0.898, 0.847}, Rgb{0.965, 0.906, 0.647},
        Rgb{0.757, 0.737, 0.890},
    };
}

void ColorScheme::validate() const {
    if (palette.size() != 20) {
        throw ValidationError("color palette must hold exactly 20 entries (10 fg + 10 bg)");
    }
    std::set<std::array<double, 3>> distinct(palette.begin(), palette.end());
    if (distinct.size() != palette.size()) throw ValidationError("palette entries must be distinct");
    if (alpha < 0.0 || alpha > 1.0) throw ValidationError("mixture alpha must lie in [0, 1]");
}

namespace {

// Two distinct digit -> (foreground, background) bijections.
std::pair<std::size_t, std::size_t> fixed_pair(ColorAssignment a, int digit) {
    const auto d = static_cast<std::size_t>(digit);
    if (a == ColorAssignment::kFixed1) return {d, 10 + d};
    return {(d + 5) % 10, 10 + (d + 3) % 10};
}

}  // namespace

GroupedDataset colorize(const Tensor& images, const std::vector<int>& labels,
                        const ColorScheme& scheme, std::uint64_t seed) {
    scheme.validate();
    if (images.rank() != 3) {
        throw ValidationError("colorize expects [n x rows x cols] images, got " +
                              images.shape_str());
    }
    const std::size_t n = images.shape[0], rows = images.shape[1], cols = images.shape[2];
    if (labels.size() != n) throw ValidationError("label count does not match image count");
    for (int y : labels) {
        if (y < 0 || y >= 10) throw ValidationError("colorize expects 10 digit classes");
    }
    const std::size_t out_r = rows / 2, out_c = cols / 2;

    // Which samples keep the fixed assignment in a mixture: a seeded shuffle,
    // first floor(alpha * n) slots.
    std::vector<std::uint8_t> is_fixed(n, scheme.assignment != ColorAssignment::kRandom);
    Rng rng(derive_seed(seed, stream::kData));
    if (scheme.assignment != ColorAssignment::kRandom && scheme.alpha < 1.0) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = n; i > 1; --i) {  // Fisher-Yates
            std::swap(order[i - 1], order[rng.uniform_index(i)]);
        }
        const auto n_fixed = static_cast<std::size_t>(scheme.alpha * static_cast<double>(n));
        std::fill(is_fixed.begin(), is_fixed.end(), std::uint8_t{0});
        for (std::size_t i = 0; i < n_fixed; ++i) is_fixed[order[i]] = 1;
    }

    GroupedDataset ds;
    ds.K_y = 10;
    ds.K_z = 10;
    ds.z_observed = true;
    ds.seed = seed;
    ds.provenance = "colored_digits";
    ds.samples.reserve(n);

    for (std::size_t i = 0; i < n; ++i) {
        std::size_t fg, bg;
        if (is_fixed[i]) {
            std::tie(fg, bg) = fixed_pair(scheme.assignment, labels[i]);
        } else {
            fg = rng.uniform_index(10);
            bg = 10 + rng.uniform_index(10);
        }
        const Rgb& f = scheme.palette[fg];
        const Rgb& b = scheme.palette[bg];

        GroupedSample s;
        s.y = labels[i];
        s.z = static_cast<int>(fg);
        s.features.resize(out_r * out_c * 3);
        for (std::size_t r = 0; r < out_r; ++r) {
            for (std::size_t c = 0; c < out_c; ++c) {
                const double p = 0.25 * (images.data[(i * rows + 2 * r) * cols + 2 * c] +
                                         images.data[(i * rows + 2 * r) * cols + 2 * c + 1] +
                                         images.data[(i * rows + 2 * r + 1) * cols + 2 * c] +
                                         images.data[(i * rows + 2 * r + 1) * cols + 2 * c + 1]);
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    s.features[(r * out_c + c) * 3 + ch] = p * f[ch] + (1.0 - p) * b[ch];
                }
            }
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace csvreg
