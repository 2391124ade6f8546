#pragma once

// PNG images (8-bit RGB, samples mapped to [0, 1] by /255 and back by
// round(255 x) with clamping) and landmark files (JSON array of [x, y]
// pixel-coordinate pairs, origin top-left).

#include <png.h>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mii/error.hpp"
#include "mii/morph.hpp"

namespace mii {

inline RasterImage read_png(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG " + path + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path + ": " + image.message);
  }
  RasterImage out(static_cast<int>(image.width), static_cast<int>(image.height));
  for (std::size_t i = 0; i < buffer.size(); ++i) out.set_sample(i, buffer[i] / 255.0);
  return out;
}

inline std::uint8_t to_byte(double sample) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(sample, 0.0, 1.0) * 255.0));
}

inline void write_png(const std::string& path, const RasterImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(img.sample_count());
  for (std::size_t i = 0; i < buffer.size(); ++i) buffer[i] = to_byte(img.samples()[i]);
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path + ": " + image.message);
  }
}

inline std::vector<Point2> parse_landmarks(const nlohmann::json& j) {
  if (!j.is_array()) throw IoError("landmark file must hold a JSON array");
  std::vector<Point2> out;
  out.reserve(j.size());
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw IoError("landmarks must be [x, y] number pairs");
    }
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

// Reads a 68-point landmark file and checks the points lie inside the image.
inline std::vector<Point2> read_landmarks(const std::string& path, int width, int height) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open landmark file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed landmark file " + path + ": " + e.what());
  }
  auto points = parse_landmarks(j);
  require(points.size() == kFacialLandmarks,
          "landmark file " + path + " must hold 68 points, found " + std::to_string(points.size()));
  for (const auto& p : points) {
    require(p.x >= 0.0 && p.y >= 0.0 && p.x <= width - 1.0 && p.y <= height - 1.0,
            "landmark outside image bounds in " + path);
  }
  return points;
}

inline void write_landmarks(const std::string& path, const std::vector<Point2>& points) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : points) j.push_back({p.x, p.y});
  std::ofstream out(path);
  if (!out) throw IoError("cannot write landmark file " + path);
  out << j.dump() << '\n';
}

}  // namespace mii
