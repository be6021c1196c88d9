// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "chroma_se/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "chroma_se/error.hpp"

namespace chroma_se::codec {

namespace {

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void PngWarning(png_structp, png_const_charp) {}

}  // namespace

ColorImage EncodeLps(const dsp::LpsMatrix& lps, const ColormapTable& table,
                     const DisplayRange& range) {
  Require(lps.num_bands() == kImageSize && lps.num_frames() == kImageSize,
          ErrorCode::kShapeMismatch,
          "encode_lps: expected 256x256 LPS, got " + std::to_string(lps.num_bands()) +
              "x" + std::to_string(lps.num_frames()));
  range.Validate();
  ColorImage img(kImageSize, kImageSize);
  img.colormap = table.name;
  img.range = range;
  for (int f = 0; f < kImageSize; ++f) {
    const int row = kImageSize - 1 - f;
    for (int t = 0; t < kImageSize; ++t) {
      const int idx = QuantizeIndex(lps.values(f, t), range);
      for (int ch = 0; ch < 3; ++ch) img.at(row, t, ch) = table.component(idx, ch);
    }
  }
  return img;
}

void SaveImage(const ColorImage& img, const std::filesystem::path& path) {
  Require(img.height > 0 && img.width > 0, ErrorCode::kInvalidArgument,
          "save_image: empty image");
  std::vector<png_byte> bytes(img.rgb.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<png_byte>(std::lround(std::clamp(img.rgb[i], 0.0, 1.0) * 255.0));
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int r = 0; r < img.height; ++r) {
    rows[static_cast<std::size_t>(r)] = bytes.data() + static_cast<std::size_t>(r) * img.width * 3;
  }
  const std::string lo = FormatDouble(img.range.lo);
  const std::string hi = FormatDouble(img.range.hi);

  FILE* fp = std::fopen(path.c_str(), "wb");
  if (fp == nullptr) Fail(ErrorCode::kIo, "save_image: cannot open " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, PngWarning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    Fail(ErrorCode::kIo, "save_image: libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    Fail(ErrorCode::kIo, "save_image: libpng write error for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  std::array<png_text, 3> text{};
  const char* keys[3] = {"colormap", "lps_lo", "lps_hi"};
  const std::string* vals[3] = {&img.colormap, &lo, &hi};
  for (int i = 0; i < 3; ++i) {
    text[static_cast<std::size_t>(i)].compression = PNG_TEXT_COMPRESSION_NONE;
    text[static_cast<std::size_t>(i)].key = const_cast<char*>(keys[i]);
    text[static_cast<std::size_t>(i)].text = const_cast<char*>(vals[i]->c_str());
  }
  png_set_text(png, info, text.data(), 3);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) Fail(ErrorCode::kIo, "save_image: close failed for " + path.string());
}

ColorImage LoadImage(const std::filesystem::path& path, bool require_pipeline_size) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (fp == nullptr) Fail(ErrorCode::kNotFound, "load_image: cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    std::fclose(fp);
    Fail(ErrorCode::kMalformed, "load_image: not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, PngWarning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    Fail(ErrorCode::kIo, "load_image: libpng init failed");
  }
  std::vector<png_byte> bytes;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    Fail(ErrorCode::kMalformed, "load_image: corrupt or truncated PNG: " + path.string());
  }
  png_init_io(png, fp);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  bytes.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 r = 0; r < height; ++r) rows[r] = bytes.data() + r * stride;
  png_read_image(png, rows.data());
  png_read_end(png, info);

  ColorImage img(static_cast<int>(height), static_cast<int>(width));
  png_textp text = nullptr;
  int num_text = 0;
  png_get_text(png, info, &text, &num_text);
  bool have_lo = false, have_hi = false;
  for (int i = 0; i < num_text; ++i) {
    const std::string key = text[i].key;
    if (key == "colormap") img.colormap = text[i].text;
    if (key == "lps_lo") { img.range.lo = std::strtod(text[i].text, nullptr); have_lo = true; }
    if (key == "lps_hi") { img.range.hi = std::strtod(text[i].text, nullptr); have_hi = true; }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  if (!have_lo || !have_hi) img.range = DisplayRange{};

  for (png_uint_32 r = 0; r < height; ++r) {
    for (png_uint_32 c = 0; c < width * 3; ++c) {
      img.rgb[r * width * 3 + c] = rows[r][c] / 255.0;
    }
  }
  if (require_pipeline_size) {
    Require(img.height == kImageSize && img.width == kImageSize, ErrorCode::kShapeMismatch,
            "load_image: " + path.string() + " is " + std::to_string(img.height) + "x" +
                std::to_string(img.width) + ", expected 256x256");
  }
  return img;
}

Tensor ImageToTensor(const ColorImage& img) {
  Tensor t(3, img.width, img.height);
  for (int ch = 0; ch < 3; ++ch) {
    for (int col = 0; col < img.width; ++col) {
      for (int f = 0; f < img.height; ++f) t.at(ch, col, f) = img.at(img.height - 1 - f, col, ch);
    }
  }
  return t;
}

ColorImage TensorToImage(const Tensor& t, const std::string& colormap, const DisplayRange& range) {
  Require(t.channels() == 3, ErrorCode::kShapeMismatch, "tensor_to_image: need 3 channels");
  ColorImage img(t.freq(), t.time());
  img.colormap = colormap;
  img.range = range;
  for (int ch = 0; ch < 3; ++ch) {
    for (int col = 0; col < img.width; ++col) {
      for (int f = 0; f < img.height; ++f) img.at(img.height - 1 - f, col, ch) = t.at(ch, col, f);
    }
  }
  return img;
}

ColorImage QuantizeTo8Bit(ColorImage img) {
  for (double& v : img.rgb) v = std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return img;
}

StandardizedImage Standardize(const ColorImage& img) {
  StandardizedImage out;
  const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
  Require(n > 0, ErrorCode::kInvalidArgument, "standardize: empty image");
  for (int ch = 0; ch < 3; ++ch) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += img.rgb[i * 3 + ch];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = img.rgb[i * 3 + ch] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const auto c = static_cast<std::size_t>(ch);
    out.stats.mean[c] = mean;
    // rounding in the mean leaves ~1e-33 of variance on a flat channel
    if (var > 1e-24 * std::max(1.0, mean * mean)) {
      out.stats.stddev[c] = std::sqrt(var);
    } else {
      out.stats.stddev[c] = 1.0;
      out.stats.degenerate[c] = true;
    }
  }
  out.field = ApplyStandardization(img, out.stats);
  for (int ch = 0; ch < 3; ++ch) {
    if (!out.stats.degenerate[static_cast<std::size_t>(ch)]) continue;
    for (double& v : out.field.channel(ch)) v = 0.0;
  }
  return out;
}

Tensor ApplyStandardization(const ColorImage& img, const ChannelStats& stats) {
  Tensor t = ImageToTensor(img);
  for (int ch = 0; ch < 3; ++ch) {
    const auto c = static_cast<std::size_t>(ch);
    for (double& v : t.channel(ch)) v = (v - stats.mean[c]) / stats.stddev[c];
  }
  return t;
}

ColorImage Destandardize(const Tensor& field, const ChannelStats& stats,
                         const std::string& colormap, const DisplayRange& range) {
  Tensor t = field;
  for (int ch = 0; ch < t.channels(); ++ch) {
    const auto c = static_cast<std::size_t>(ch);
    for (double& v : t.channel(ch)) v = v * stats.stddev[c] + stats.mean[c];
  }
  return TensorToImage(t, colormap, range);
}

PixelDataset BuildPixelDataset(std::span<const std::pair<ColorImage, dsp::LpsMatrix>> pairs) {
  PixelDataset ds;
  const Eigen::Index per_image = static_cast<Eigen::Index>(kImageSize) * kImageSize;
  const Eigen::Index total = per_image * static_cast<Eigen::Index>(pairs.size());
  ds.predictors.resize(total, 3);
  ds.targets.resize(total);
  Eigen::Index row = 0;
  for (const auto& [img, lps] : pairs) {
    Require(img.height == kImageSize && img.width == kImageSize && lps.num_bands() == kImageSize &&
                lps.num_frames() == kImageSize,
            ErrorCode::kShapeMismatch, "pixel_dataset: image/LPS pair must be 256x256");
    for (int t = 0; t < kImageSize; ++t) {
      for (int f = 0; f < kImageSize; ++f) {
        const int img_row = kImageSize - 1 - f;
        for (int ch = 0; ch < 3; ++ch) ds.predictors(row, ch) = img.at(img_row, t, ch);
        ds.targets(row) = lps.values(f, t);
        Require(std::isfinite(ds.targets(row)), ErrorCode::kInvalidArgument,
                "pixel_dataset: non-finite LPS target");
        ++row;
      }
    }
  }
  return ds;
}

}  // namespace chroma_se::codec
