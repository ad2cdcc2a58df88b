#include "protofaith/netpbm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "protofaith/error.hpp"

namespace protofaith {

namespace {

// Reads one whitespace/comment-separated header token.
std::string next_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c) && c != '#') {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  if (c == '#') in.unget();
  if (tok.empty()) throw IoError("truncated netpbm header in " + path.string());
  return tok;
}

int parse_dim(const std::string& tok, const char* what, const std::filesystem::path& path) {
  try {
    const int v = std::stoi(tok);
    if (v < 1) throw IoError(std::string(what) + " must be positive in " + path.string());
    return v;
  } catch (const IoError&) {
    throw;
  } catch (...) {
    throw IoError(std::string("malformed ") + what + " in " + path.string());
  }
}

std::vector<std::uint8_t> read_payload(std::istream& in, std::size_t n,
                                       const std::filesystem::path& path) {
  std::vector<std::uint8_t> data(n);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw IoError("truncated pixel payload in " + path.string());
  }
  return data;
}

void read_header(std::istream& in, const char* magic, int& width, int& height,
                 const std::filesystem::path& path) {
  const std::string m = next_token(in, path);
  if (m != magic) {
    throw IoError("expected " + std::string(magic) + " magic in " + path.string() + ", got " + m);
  }
  width = parse_dim(next_token(in, path), "width", path);
  height = parse_dim(next_token(in, path), "height", path);
  const std::string maxval = next_token(in, path);
  if (maxval != "255") {
    throw IoError("only maxval 255 is supported, got " + maxval + " in " + path.string());
  }
  // The header ends with exactly one whitespace byte before the payload.
}

}  // namespace

PpmImage load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  PpmImage img;
  read_header(in, "P6", img.width, img.height, path);
  img.rgb = read_payload(in, static_cast<std::size_t>(img.width) * img.height * 3, path);
  return img;
}

void save_ppm(const PpmImage& image, const std::filesystem::path& path) {
  if (image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw ArgumentError("ppm payload does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

PgmImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  PgmImage img;
  read_header(in, "P5", img.width, img.height, path);
  img.gray = read_payload(in, static_cast<std::size_t>(img.width) * img.height, path);
  return img;
}

void save_pgm(const PgmImage& image, const std::filesystem::path& path) {
  if (image.gray.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw ArgumentError("pgm payload does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.gray.data()),
            static_cast<std::streamsize>(image.gray.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

// Bilinear sample of one channel with half-pixel centers and edge clamping.
double bilinear_sample(const std::vector<float>& plane, int h, int w, double sy, double sx) {
  const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, h - 1);
  const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const double fy = std::clamp(sy - y0, 0.0, 1.0);
  const double fx = std::clamp(sx - x0, 0.0, 1.0);
  const auto at = [&](int y, int x) {
    return static_cast<double>(plane[static_cast<std::size_t>(y) * w + x]);
  };
  return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
         fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

}  // namespace

Tensor image_to_tensor(const PpmImage& image, const Normalization& norm, int target_h,
                       int target_w, bool* resized) {
  Tensor raw({3, image.height, image.width});
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * image.width + x) * 3;
      for (int c = 0; c < 3; ++c) {
        raw.at(c, y, x) = static_cast<float>(image.rgb[base + static_cast<std::size_t>(c)]) / 255.0f;
      }
    }
  }

  const bool needs_resize = image.height != target_h || image.width != target_w;
  if (resized) *resized = needs_resize;
  Tensor scaled = needs_resize ? Tensor({3, target_h, target_w}) : std::move(raw);
  if (needs_resize) {
    for (int c = 0; c < 3; ++c) {
      std::vector<float> plane(static_cast<std::size_t>(image.height) * image.width);
      for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
          plane[static_cast<std::size_t>(y) * image.width + x] = raw.at(c, y, x);
        }
      }
      for (int y = 0; y < target_h; ++y) {
        const double sy = (y + 0.5) * static_cast<double>(image.height) / target_h - 0.5;
        for (int x = 0; x < target_w; ++x) {
          const double sx = (x + 0.5) * static_cast<double>(image.width) / target_w - 0.5;
          scaled.at(c, y, x) =
              static_cast<float>(bilinear_sample(plane, image.height, image.width, sy, sx));
        }
      }
    }
  }

  for (int c = 0; c < 3; ++c) {
    const float mean = norm.mean[static_cast<std::size_t>(c)];
    const float stddev = norm.stddev[static_cast<std::size_t>(c)];
    if (stddev == 0.0f) throw ArgumentError("normalization stddev must be nonzero");
    for (int y = 0; y < target_h; ++y) {
      for (int x = 0; x < target_w; ++x) {
        scaled.at(c, y, x) = (scaled.at(c, y, x) - mean) / stddev;
      }
    }
  }
  return scaled;
}

PixelMask segmentation_to_mask(const PgmImage& image, int target_h, int target_w) {
  PixelMask mask = PixelMask::empty(target_h, target_w);
  for (int y = 0; y < target_h; ++y) {
    // Nearest neighbor: object iff the sampled source pixel is > 127.
    const int sy = std::min(image.height - 1,
                            static_cast<int>((y + 0.5) * image.height / target_h));
    for (int x = 0; x < target_w; ++x) {
      const int sx = std::min(image.width - 1,
                              static_cast<int>((x + 0.5) * image.width / target_w));
      if (image.gray[static_cast<std::size_t>(sy) * image.width + sx] > 127) mask.set(y, x);
    }
  }
  return mask;
}

PgmImage saliency_to_pgm(const SaliencyMap& map) {
  PgmImage img;
  img.height = map.values.dim(0);
  img.width = map.values.dim(1);
  img.gray.assign(static_cast<std::size_t>(map.values.numel()), 0);
  const float lo = map.values.min_value();
  const float hi = map.values.max_value();
  if (hi > lo) {
    const double scale = 255.0 / (static_cast<double>(hi) - lo);
    for (std::int64_t i = 0; i < map.values.numel(); ++i) {
      img.gray[static_cast<std::size_t>(i)] =
          static_cast<std::uint8_t>(std::lround((map.values[i] - lo) * scale));
    }
  }
  return img;
}

}  // namespace protofaith
