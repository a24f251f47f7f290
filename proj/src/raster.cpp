#include "dnl/raster.hpp"

#include <algorithm>
#include <bit>
#include <fstream>

#include "dnl/errors.hpp"

namespace dnl {
namespace {

constexpr std::size_t kChunk = 1 << 20;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_positive(const std::string& key, const std::string& value,
                           const std::filesystem::path& path) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || v <= 0) {
    throw IoError(path.string() + ": '" + key + "' must be a positive integer, got '" +
                  value + "'");
  }
  return static_cast<std::size_t>(v);
}

std::filesystem::path payload_path(const std::filesystem::path& header_path,
                                   const RasterHeader& header) {
  return header_path.parent_path() / header.data;
}

// Reads the payload in chunks and hands each little-endian element to `sink`.
template <typename Word, typename Sink>
void read_payload(const std::filesystem::path& header_path, const RasterHeader& header,
                  Sink&& sink) {
  const auto path = payload_path(header_path, header);
  std::error_code ec;
  const auto actual = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot open raster payload " + path.string());
  if (actual != header.payload_bytes()) {
    throw IoError("raster payload " + path.string() + " has " + std::to_string(actual) +
                  " bytes, header " + header_path.string() + " implies " +
                  std::to_string(header.payload_bytes()) + " (" + std::to_string(header.width) +
                  "x" + std::to_string(header.height) + "x" + std::to_string(header.bands) +
                  "x" + std::to_string(header.element_size()) + ")");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open raster payload " + path.string());
  std::vector<unsigned char> buffer(kChunk * sizeof(Word));
  std::size_t remaining = header.payload_bytes() / sizeof(Word);
  std::size_t index = 0;
  while (remaining > 0) {
    const std::size_t n = std::min(remaining, kChunk);
    in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(n * sizeof(Word)));
    if (!in) throw IoError("short read from " + path.string());
    for (std::size_t i = 0; i < n; ++i) {
      Word w = 0;
      for (std::size_t b = sizeof(Word); b-- > 0;) {
        w = static_cast<Word>((w << 8) | buffer[i * sizeof(Word) + b]);
      }
      sink(index++, w);
    }
    remaining -= n;
  }
}

template <typename Word, typename Source>
void write_payload(const std::filesystem::path& path, std::size_t count, Source&& source) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write raster payload " + path.string());
  std::vector<unsigned char> buffer;
  buffer.reserve(kChunk * sizeof(Word));
  for (std::size_t i = 0; i < count; ++i) {
    const Word w = source(i);
    for (std::size_t b = 0; b < sizeof(Word); ++b) {
      buffer.push_back(static_cast<unsigned char>((w >> (8 * b)) & 0xffu));
    }
    if (buffer.size() == buffer.capacity() || i + 1 == count) {
      out.write(reinterpret_cast<const char*>(buffer.data()),
                static_cast<std::streamsize>(buffer.size()));
      buffer.clear();
    }
  }
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace

Raster::Raster(std::size_t w, std::size_t h, std::size_t b)
    : width(w), height(h), bands(b), values(w * h * b, 0.0f) {}

Tensor Raster::to_tensor() const {
  std::vector<double> data(values.begin(), values.end());
  return Tensor({bands, height, width}, std::move(data));
}

Raster Raster::from_tensor(const Tensor& cube) {
  expect_rank(cube, 3, "Raster::from_tensor");
  Raster r(cube.dim(2), cube.dim(1), cube.dim(0));
  for (std::size_t i = 0; i < cube.size(); ++i) r.values[i] = static_cast<float>(cube[i]);
  return r;
}

LabelRaster::LabelRaster(std::size_t w, std::size_t h) : width(w), height(h), values(w * h, 0) {}

RasterHeader read_raster_header(const std::filesystem::path& header_path) {
  std::ifstream in(header_path);
  if (!in) throw IoError("cannot open raster header " + header_path.string());
  RasterHeader header;
  bool seen_w = false, seen_h = false, seen_data = false, seen_dtype = false;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw IoError(header_path.string() + ": expected key=value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "width") {
      header.width = parse_positive(key, value, header_path);
      seen_w = true;
    } else if (key == "height") {
      header.height = parse_positive(key, value, header_path);
      seen_h = true;
    } else if (key == "bands") {
      header.bands = parse_positive(key, value, header_path);
    } else if (key == "dtype") {
      if (value == "f32") {
        header.dtype = RasterType::f32;
      } else if (value == "i16") {
        header.dtype = RasterType::i16;
      } else {
        throw IoError(header_path.string() + ": unsupported dtype '" + value +
                      "' (expected f32 or i16)");
      }
      seen_dtype = true;
    } else if (key == "layout") {
      if (value != "bsq") {
        throw IoError(header_path.string() + ": unsupported layout '" + value +
                      "' (only bsq)");
      }
    } else if (key == "data") {
      header.data = value;
      seen_data = !value.empty();
    } else {
      throw IoError(header_path.string() + ": unknown header key '" + key + "'");
    }
  }
  if (!seen_w || !seen_h || !seen_data || !seen_dtype) {
    throw IoError(header_path.string() + ": header needs width, height, dtype and data");
  }
  return header;
}

void write_raster_header(const std::filesystem::path& header_path, const RasterHeader& header) {
  std::ofstream out(header_path, std::ios::trunc);
  if (!out) throw IoError("cannot write raster header " + header_path.string());
  out << "width=" << header.width << '\n'
      << "height=" << header.height << '\n'
      << "bands=" << header.bands << '\n'
      << "dtype=" << (header.dtype == RasterType::f32 ? "f32" : "i16") << '\n'
      << "layout=bsq\n"
      << "data=" << header.data << '\n';
  if (!out) throw IoError("short write to " + header_path.string());
}

Raster load_raster(const std::filesystem::path& header_path) {
  const RasterHeader header = read_raster_header(header_path);
  if (header.dtype != RasterType::f32) {
    throw IoError(header_path.string() + ": expected dtype=f32 for a data raster");
  }
  Raster r(header.width, header.height, header.bands);
  read_payload<std::uint32_t>(header_path, header, [&](std::size_t i, std::uint32_t w) {
    r.values[i] = std::bit_cast<float>(w);
  });
  return r;
}

LabelRaster load_labels(const std::filesystem::path& header_path) {
  const RasterHeader header = read_raster_header(header_path);
  if (header.dtype != RasterType::i16 || header.bands != 1) {
    throw IoError(header_path.string() + ": labels need dtype=i16 and bands=1");
  }
  LabelRaster r(header.width, header.height);
  read_payload<std::uint16_t>(header_path, header, [&](std::size_t i, std::uint16_t w) {
    r.values[i] = std::bit_cast<std::int16_t>(w);
  });
  return r;
}

void save_raster(const std::filesystem::path& header_path, const Raster& raster) {
  RasterHeader header{raster.width, raster.height, raster.bands, RasterType::f32,
                      header_path.stem().string() + ".bin"};
  if (raster.values.size() != header.width * header.height * header.bands) {
    throw IoError("raster value count does not match its dimensions");
  }
  write_payload<std::uint32_t>(payload_path(header_path, header), raster.values.size(),
                               [&](std::size_t i) {
                                 return std::bit_cast<std::uint32_t>(raster.values[i]);
                               });
  write_raster_header(header_path, header);
}

void save_labels(const std::filesystem::path& header_path, const LabelRaster& labels) {
  RasterHeader header{labels.width, labels.height, 1, RasterType::i16,
                      header_path.stem().string() + ".bin"};
  if (labels.values.size() != header.width * header.height) {
    throw IoError("label count does not match raster dimensions");
  }
  write_payload<std::uint16_t>(payload_path(header_path, header), labels.values.size(),
                               [&](std::size_t i) {
                                 return std::bit_cast<std::uint16_t>(labels.values[i]);
                               });
  write_raster_header(header_path, header);
}

}  // namespace dnl
