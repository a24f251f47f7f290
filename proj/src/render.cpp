#include "dnl/render.hpp"

#include <array>
#include <cctype>
#include <fstream>

#include "dnl/errors.hpp"

namespace dnl {

Palette default_palette(std::size_t classes) {
  // First 15 colours follow the usual Houston map legend.
  static constexpr std::array<Rgb, 15> kBase{{{0, 205, 0},
                                              {127, 255, 0},
                                              {46, 139, 87},
                                              {0, 139, 0},
                                              {160, 82, 45},
                                              {0, 255, 255},
                                              {255, 255, 255},
                                              {216, 191, 216},
                                              {255, 0, 0},
                                              {139, 0, 0},
                                              {100, 100, 100},
                                              {255, 255, 0},
                                              {238, 154, 0},
                                              {85, 26, 139},
                                              {255, 127, 80}}};
  Palette p{{0, 0, 0}};
  for (std::size_t i = 0; i < classes; ++i) {
    if (i < kBase.size()) {
      p.push_back(kBase[i]);
    } else {
      // Distinct fallback colours on a 6x6x6 grid, skipping black.
      const std::size_t k = i - kBase.size() + 1;
      p.push_back({static_cast<std::uint8_t>(51 * (k % 6)),
                   static_cast<std::uint8_t>(51 * ((k / 6) % 6)),
                   static_cast<std::uint8_t>(51 * ((k / 36) % 6) + 1)});
    }
  }
  return p;
}

std::string render_ppm(const LabelRaster& class_map, const Palette& palette) {
  std::string out = "P6\n" + std::to_string(class_map.width) + " " +
                    std::to_string(class_map.height) + "\n255\n";
  out.reserve(out.size() + class_map.values.size() * 3);
  for (std::int16_t id : class_map.values) {
    if (id < 0 || static_cast<std::size_t>(id) >= palette.size()) {
      throw IoError("class id " + std::to_string(id) + " has no palette entry (palette has " +
                    std::to_string(palette.size()) + " colours)");
    }
    const Rgb c = palette[static_cast<std::size_t>(id)];
    out.push_back(static_cast<char>(c.r));
    out.push_back(static_cast<char>(c.g));
    out.push_back(static_cast<char>(c.b));
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const LabelRaster& class_map,
               const Palette& palette) {
  const std::string bytes = render_ppm(class_map, palette);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write image " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

Image parse_ppm(const std::string& bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    std::size_t v = 0;
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      ++pos;
    }
    if (pos == start) throw IoError("malformed PPM header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw IoError("not a P6 PPM");
  pos = 2;
  Image img;
  img.width = read_int();
  img.height = read_int();
  if (read_int() != 255) throw IoError("only maxval 255 PPM images are supported");
  ++pos;  // single whitespace byte before the raster
  const std::size_t need = img.width * img.height * 3;
  if (bytes.size() - pos != need) {
    throw IoError("PPM raster has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                  std::to_string(need));
  }
  img.pixels.resize(img.width * img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = {static_cast<std::uint8_t>(bytes[pos + 3 * i]),
                     static_cast<std::uint8_t>(bytes[pos + 3 * i + 1]),
                     static_cast<std::uint8_t>(bytes[pos + 3 * i + 2])};
  }
  return img;
}

LabelRaster decode_class_map(const Image& image, const Palette& palette) {
  LabelRaster out(image.width, image.height);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    std::size_t id = 0;
    while (id < palette.size() && !(palette[id] == image.pixels[i])) ++id;
    if (id == palette.size()) throw IoError("pixel colour not in palette");
    out.values[i] = static_cast<std::int16_t>(id);
  }
  return out;
}

}  // namespace dnl
