#pragma once

#include <filesystem>

#include "aurecon/diffcore/tensor.hpp"

namespace aurecon::data {

using diff::Tensor;

/// Reads a binary PGM (P5) or PPM (P6) file with maxval <= 255 into a
/// (C, H, W) tensor with values in [0, 1]; C is 1 for PGM and 3 for PPM.
Tensor read_image(const std::filesystem::path& path);

/// Writes a (1 | 3, H, W) tensor as PGM / PPM. Values are clamped to [0, 1]
/// and rounded to 8 bits.
void write_image(const std::filesystem::path& path, const Tensor& image);

}  // namespace aurecon::data
