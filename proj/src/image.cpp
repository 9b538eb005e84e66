#include "ruledvo/image.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "ruledvo/errors.hpp"

namespace ruledvo {
namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string comment;
      std::getline(in, comment);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(ch);
  }
  return token;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kInputError, "cannot open " + path.string());
  }
  if (next_token(in) != "P5") {
    throw Error(ErrorCode::kInputError, path.string() + ": not a binary PGM");
  }
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_token(in));
    height = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInputError, path.string() + ": malformed PGM header");
  }
  if (width <= 0 || height <= 0 || maxval != 255) {
    throw Error(ErrorCode::kInputError,
                path.string() + ": only 8-bit PGM images are supported");
  }
  GrayImage image(width, height);
  in.read(reinterpret_cast<char*>(image.pixels.data()),
          static_cast<std::streamsize>(image.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(image.pixels.size())) {
    throw Error(ErrorCode::kInputError, path.string() + ": truncated PGM data");
  }
  return image;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::kInputError, "cannot write " + path.string());
  }
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
}

EdgeMap compute_edge_map(const GrayImage& image, double threshold) {
  if (!(threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "edge threshold must be positive");
  }
  EdgeMap map;
  map.width = image.width;
  map.height = image.height;
  map.threshold = threshold;
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  map.magnitude.assign(n, 0.0f);
  map.direction.assign(n, 0.0f);
  for (int y = 1; y + 1 < image.height; ++y) {
    for (int x = 1; x + 1 < image.width; ++x) {
      auto I = [&](int dx, int dy) {
        return static_cast<int>(image.at(x + dx, y + dy));
      };
      const int gx = (I(1, -1) + 2 * I(1, 0) + I(1, 1)) -
                     (I(-1, -1) + 2 * I(-1, 0) + I(-1, 1));
      const int gy = (I(-1, 1) + 2 * I(0, 1) + I(1, 1)) -
                     (I(-1, -1) + 2 * I(0, -1) + I(1, -1));
      const std::size_t idx = static_cast<std::size_t>(y) * image.width + x;
      const double mag = std::sqrt(static_cast<double>(gx * gx + gy * gy));
      map.magnitude[idx] = static_cast<float>(mag);
      map.direction[idx] = static_cast<float>(std::atan2(gy, gx));
      if (mag >= threshold) map.active.emplace_back(x, y);
    }
  }
  return map;
}

}  // namespace ruledvo
