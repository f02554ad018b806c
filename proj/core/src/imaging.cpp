#include "peanoseg/imaging.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "peanoseg/chain.hpp"
#include "peanoseg/error.hpp"

namespace peanoseg {

namespace {

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  // Next whitespace-delimited token, skipping '#' comments.
  std::string token() {
    std::string tok;
    int c;
    while ((c = in_.get()) != EOF) {
      if (c == '#' && tok.empty()) {
        while ((c = in_.get()) != EOF && c != '\n') {
        }
        continue;
      }
      if (std::isspace(c)) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(static_cast<char>(c));
    }
    return tok;
  }

  double number(const char* what) {
    const std::string tok = token();
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used == tok.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::kBadFormat, std::string("expected ") + what + ", found '" + tok + "'");
  }

  std::size_t count(const char* what) {
    const double v = number(what);
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e8) {
      throw Error(ErrorCode::kBadFormat, std::string(what) + " must be a positive integer");
    }
    return static_cast<std::size_t>(v);
  }

 private:
  std::istream& in_;
};

void read_exact(std::istream& in, void* dst, std::size_t bytes) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) {
    throw Error(ErrorCode::kBadFormat, "truncated pixel data");
  }
}

GrayRaster read_pgm_body(std::istream& in, TokenReader& tokens, bool binary) {
  GrayRaster r;
  r.width = tokens.count("width");
  r.height = tokens.count("height");
  const std::size_t maxval = tokens.count("maxval");
  if (maxval > 65535) throw Error(ErrorCode::kBadFormat, "maxval above 65535");
  r.maxval = static_cast<double>(maxval);
  const std::size_t n = r.width * r.height;
  r.pixels.resize(n);
  if (binary) {
    // Exactly one whitespace byte separates the header from the raster,
    // and TokenReader already consumed it.
    const std::size_t bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(n * bytes);
    read_exact(in, buf.data(), buf.size());
    for (std::size_t i = 0; i < n; ++i) {
      r.pixels[i] = bytes == 1 ? buf[i] : (buf[2 * i] << 8 | buf[2 * i + 1]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = tokens.number("pixel value");
      if (v < 0.0 || v != std::floor(v)) throw Error(ErrorCode::kBadFormat, "bad P2 pixel value");
      r.pixels[i] = v;
    }
  }
  for (double v : r.pixels) {
    if (v > r.maxval) throw Error(ErrorCode::kBadFormat, "pixel value above maxval");
  }
  return r;
}

GrayRaster read_pfm_body(std::istream& in, TokenReader& tokens) {
  GrayRaster r;
  r.width = tokens.count("width");
  r.height = tokens.count("height");
  const double scale = tokens.number("scale");
  if (scale == 0.0) throw Error(ErrorCode::kBadFormat, "PFM scale must be nonzero");
  const bool little = scale < 0.0;
  r.maxval = 0.0;
  const std::size_t n = r.width * r.height;
  std::vector<std::uint32_t> raw(n);
  read_exact(in, raw.data(), n * sizeof(std::uint32_t));
  r.pixels.resize(n);
  const bool host_little = std::endian::native == std::endian::little;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = raw[i];
    if (little != host_little) {
      bits = (bits >> 24) | ((bits >> 8) & 0xff00u) | ((bits << 8) & 0xff0000u) | (bits << 24);
    }
    float f;
    std::memcpy(&f, &bits, sizeof f);
    if (!std::isfinite(f)) throw Error(ErrorCode::kBadFormat, "non-finite PFM value");
    // Rows are stored bottom to top.
    const std::size_t row = r.height - 1 - i / r.width;
    r.pixels[row * r.width + i % r.width] = f;
  }
  return r;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

// Square 2^k window of a raster: the whole raster when it already
// conforms, the centered crop when allowed, otherwise kBadShape.
std::vector<double> conforming_window(const GrayRaster& r, bool crop, GridShape& shape,
                                      const std::filesystem::path& path) {
  if (r.width == r.height) {
    if (auto s = GridShape::from_side(r.width)) {
      shape = *s;
      return r.pixels;
    }
  }
  if (!crop) {
    throw Error(ErrorCode::kBadShape, path.string() + " is " + std::to_string(r.width) + "x" +
                                          std::to_string(r.height) +
                                          ", not a power-of-two square");
  }
  const std::size_t side = std::bit_floor(std::min(r.width, r.height));
  shape = *GridShape::from_side(side);
  const std::size_t col0 = (r.width - side) / 2;
  const std::size_t row0 = (r.height - side) / 2;
  std::vector<double> out(side * side);
  for (std::size_t i = 0; i < side; ++i) {
    for (std::size_t j = 0; j < side; ++j) out[i * side + j] = r.pixels[(row0 + i) * r.width + col0 + j];
  }
  return out;
}

}  // namespace

void LabelImage::validate() const {
  if (labels.size() != shape.n_pixels) {
    throw Error(ErrorCode::kBadShape, "label count does not match the grid");
  }
  for (auto l : labels) {
    if (l < 1 || l > classes) throw Error(ErrorCode::kInvalidArgument, "label outside 1..K");
  }
}

GrayRaster read_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kBadFormat, "cannot open " + path.string());
  TokenReader tokens(in);
  const std::string magic = tokens.token();
  if (magic == "P2") return read_pgm_body(in, tokens, false);
  if (magic == "P5") return read_pgm_body(in, tokens, true);
  if (magic == "Pf") return read_pfm_body(in, tokens);
  throw Error(ErrorCode::kBadFormat, path.string() + ": unsupported magic '" + magic + "'");
}

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> pixels) {
  if (pixels.size() != width * height) throw Error(ErrorCode::kInvalidArgument, "pixel count mismatch");
  auto out = open_for_write(path);
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  finish_write(out, path);
}

void write_pfm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const float> pixels) {
  if (pixels.size() != width * height) throw Error(ErrorCode::kInvalidArgument, "pixel count mismatch");
  static_assert(std::endian::native == std::endian::little, "PFM writer assumes little-endian");
  auto out = open_for_write(path);
  out << "Pf\n" << width << ' ' << height << "\n-1.0\n";
  for (std::size_t row = height; row-- > 0;) {
    out.write(reinterpret_cast<const char*>(pixels.data() + row * width),
              static_cast<std::streamsize>(width * sizeof(float)));
  }
  finish_write(out, path);
}

ObservedImage load_grayscale(const std::filesystem::path& path, bool crop) {
  const GrayRaster raster = read_raster(path);
  ObservedImage image;
  image.values = conforming_window(raster, crop, image.shape, path);
  if (raster.maxval > 0.0 && raster.maxval != 255.0) {
    for (double& v : image.values) v *= 255.0 / raster.maxval;
  }
  return image;
}

LabelImage load_labels(const std::filesystem::path& path, std::size_t classes) {
  if (classes == 0) throw Error(ErrorCode::kInvalidArgument, "need at least one class");
  const GrayRaster raster = read_raster(path);
  LabelImage image;
  const std::vector<double> values = conforming_window(raster, false, image.shape, path);
  std::map<double, std::uint32_t> levels;
  for (double v : values) levels.emplace(v, 0);
  if (levels.size() > classes) {
    throw Error(ErrorCode::kTooManyLevels, path.string() + " has " + std::to_string(levels.size()) +
                                               " levels, more than " + std::to_string(classes));
  }
  std::uint32_t next = 1;
  for (auto& [value, label] : levels) label = next++;
  image.classes = classes;
  image.labels.reserve(values.size());
  for (double v : values) image.labels.push_back(levels[v]);
  return image;
}

void save_segmentation(const LabelImage& labels, const std::filesystem::path& path) {
  labels.validate();
  std::vector<std::uint8_t> pixels(labels.labels.size());
  const double span = labels.classes > 1 ? static_cast<double>(labels.classes - 1) : 1.0;
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * (labels.labels[i] - 1) / span));
  }
  write_pgm(path, labels.shape.side, labels.shape.side, pixels);
}

void save_observation(const ObservedImage& image, const std::filesystem::path& path) {
  const std::size_t side = image.shape.side;
  if (path.extension() == ".pfm") {
    std::vector<float> f(image.values.begin(), image.values.end());
    write_pfm(path, side, side, f);
    return;
  }
  const auto [lo, hi] = std::minmax_element(image.values.begin(), image.values.end());
  const double range = *hi > *lo ? *hi - *lo : 1.0;
  std::vector<std::uint8_t> pixels(image.values.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * (image.values[i] - *lo) / range));
  }
  write_pgm(path, side, side, pixels);
}

ObservedImage synth_noise(const LabelImage& truth, std::span<const double> means,
                          std::span<const double> variances, std::uint64_t seed) {
  truth.validate();
  if (means.size() != truth.classes || variances.size() != truth.classes) {
    throw Error(ErrorCode::kInvalidArgument, "need one mean and one variance per class");
  }
  constexpr double kMinVariance = 1e-6;
  Rng rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  ObservedImage out;
  out.shape = truth.shape;
  out.values.resize(truth.labels.size());
  for (std::size_t s = 0; s < truth.labels.size(); ++s) {
    const std::size_t c = truth.labels[s] - 1;
    const double sd = std::sqrt(std::max(kMinVariance, variances[c]));
    out.values[s] = means[c] + sd * unit(rng);
  }
  return out;
}

double error_rate(const LabelImage& truth, const LabelImage& predicted) {
  if (truth.shape != predicted.shape || truth.labels.size() != predicted.labels.size()) {
    throw Error(ErrorCode::kBadShape, "label images differ in shape");
  }
  const std::size_t k = std::max(truth.classes, predicted.classes);
  if (k > kMaxScoredClasses) {
    throw Error(ErrorCode::kTooManyClasses,
                std::to_string(k) + " classes exceeds the permutation search bound");
  }
  truth.validate();
  predicted.validate();
  if (truth.labels.empty()) return 0.0;

  std::vector<std::size_t> confusion(k * k, 0);  // [predicted][truth]
  for (std::size_t s = 0; s < truth.labels.size(); ++s) {
    ++confusion[(predicted.labels[s] - 1) * k + (truth.labels[s] - 1)];
  }
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t p = 0; p < k; ++p) hits += confusion[p * k + perm[p]];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(truth.labels.size() - best) / static_cast<double>(truth.labels.size());
}

}  // namespace peanoseg
