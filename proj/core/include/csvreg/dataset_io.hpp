#pragma once

#include <iosfwd>
#include <string>

#include "csvreg/dataset.hpp"

namespace csvreg {

// Versioned binary container for grouped datasets (see docs/FORMATS.md):
//   magic "CSVRGDS1", u8 z_observed, u32 K_y, u32 K_z, u64 n, u32 dim,
//   u64 seed, u32 provenance length + bytes, then per record
//   u16 y, u16 z (0xFFFF when unobserved), dim x f64 features.
// All integers and doubles little-endian.

void write_dataset(std::ostream& os, const GroupedDataset& dataset);
GroupedDataset read_dataset(std::istream& is);

void save_dataset(const std::string& path, const GroupedDataset& dataset);
GroupedDataset load_dataset(const std::string& path);

}  // namespace csvreg
