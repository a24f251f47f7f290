#pragma once

// Flat raster container: a plain-text header next to a raw payload.
//
//   width=<int>
//   height=<int>
//   bands=<int>
//   dtype=f32 | i16
//   layout=bsq
//   data=<payload path, relative to the header's directory>
//
// Blank lines and lines starting with '#' are ignored. The payload is
// little-endian, band-sequential and row-major within each band, so it holds
// exactly width * height * bands * sizeof(dtype) bytes. Label rasters use
// dtype=i16 with bands=1; label 0 marks unlabeled pixels.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dnl/tensor.hpp"

namespace dnl {

enum class RasterType { f32, i16 };

struct RasterHeader {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t bands = 1;
  RasterType dtype = RasterType::f32;
  std::string data;

  std::size_t element_size() const { return dtype == RasterType::f32 ? 4 : 2; }
  std::size_t payload_bytes() const { return width * height * bands * element_size(); }
};

/// Band-sequential float32 cube.
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t bands = 0;
  std::vector<float> values;

  Raster() = default;
  Raster(std::size_t width, std::size_t height, std::size_t bands);

  float& at(std::size_t band, std::size_t row, std::size_t col) {
    return values[(band * height + row) * width + col];
  }
  float at(std::size_t band, std::size_t row, std::size_t col) const {
    return values[(band * height + row) * width + col];
  }
  /// [bands, height, width]; float32 -> float64 is exact.
  Tensor to_tensor() const;
  /// Values are narrowed to float32.
  static Raster from_tensor(const Tensor& cube);
};

/// Single-band int16 class-id raster.
struct LabelRaster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::int16_t> values;

  LabelRaster() = default;
  LabelRaster(std::size_t width, std::size_t height);

  std::int16_t& at(std::size_t row, std::size_t col) { return values[row * width + col]; }
  std::int16_t at(std::size_t row, std::size_t col) const { return values[row * width + col]; }
};

RasterHeader read_raster_header(const std::filesystem::path& header_path);
void write_raster_header(const std::filesystem::path& header_path, const RasterHeader& header);

Raster load_raster(const std::filesystem::path& header_path);
LabelRaster load_labels(const std::filesystem::path& header_path);

/// Writes `<header_path>` and its payload `<stem>.bin` alongside it.
void save_raster(const std::filesystem::path& header_path, const Raster& raster);
void save_labels(const std::filesystem::path& header_path, const LabelRaster& labels);

}  // namespace dnl
