#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dnl/raster.hpp"

namespace dnl {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Entry i colours class id i; entry 0 is unlabeled.
using Palette = std::vector<Rgb>;

/// Black for id 0 followed by `classes` distinct colours.
Palette default_palette(std::size_t classes);

/// Binary PPM (P6, maxval 255) with one pixel per class id.
std::string render_ppm(const LabelRaster& class_map, const Palette& palette);
void write_ppm(const std::filesystem::path& path, const LabelRaster& class_map,
               const Palette& palette);

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Rgb> pixels;
};

Image parse_ppm(const std::string& bytes);
/// Maps each pixel back to the first palette index with its colour.
LabelRaster decode_class_map(const Image& image, const Palette& palette);

}  // namespace dnl
