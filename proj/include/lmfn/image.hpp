#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmfn/tensor.hpp"

namespace lmfn {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unit-range image stored channel-planar (C, H, W).
struct ImagePlane {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> values;

  static ImagePlane filled(int width, int height, int channels, float v) {
    if (width <= 0 || height <= 0 || (channels != 1 && channels != 3)) {
      throw std::invalid_argument("ImagePlane: invalid dimensions " + std::to_string(width) +
                                  "x" + std::to_string(height) + "x" + std::to_string(channels));
    }
    return ImagePlane{width, height, channels,
                      std::vector<float>(static_cast<std::size_t>(width) * height * channels, v)};
  }

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height + y) * width + x;
  }
  float& at(int c, int y, int x) { return values[index(c, y, x)]; }
  float at(int c, int y, int x) const { return values[index(c, y, x)]; }

  bool same_dims(const ImagePlane& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  std::string dims() const {
    return std::to_string(width) + "x" + std::to_string(height) + "x" + std::to_string(channels);
  }

  void clamp() {
    for (float& v : values) v = std::clamp(v, 0.0f, 1.0f);
  }
};

/// Mirror index without repeating the edge sample: -1 -> 1, n -> n-2.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

inline ImagePlane to_rgb(const ImagePlane& img) {
  if (img.channels == 3) return img;
  ImagePlane out = ImagePlane::filled(img.width, img.height, 3, 0.0f);
  for (int c = 0; c < 3; ++c)
    std::copy(img.values.begin(), img.values.end(),
              out.values.begin() + static_cast<std::ptrdiff_t>(c) * img.width * img.height);
  return out;
}

/// (1, C, H, W) tensor holding the image.
inline Tensor to_tensor(const ImagePlane& img) {
  return Tensor(Shape{1, img.channels, img.height, img.width}, img.values);
}

/// Stacks equally sized images into (N, C, H, W).
inline Tensor to_tensor(const std::vector<ImagePlane>& imgs) {
  if (imgs.empty()) throw std::invalid_argument("to_tensor: no images");
  const ImagePlane& f = imgs.front();
  std::vector<float> data;
  data.reserve(f.values.size() * imgs.size());
  for (const auto& im : imgs) {
    if (!im.same_dims(f)) {
      throw std::invalid_argument("to_tensor: image " + im.dims() + " differs from " + f.dims());
    }
    data.insert(data.end(), im.values.begin(), im.values.end());
  }
  return Tensor(Shape{static_cast<int>(imgs.size()), f.channels, f.height, f.width},
                std::move(data));
}

inline ImagePlane from_tensor(const Tensor& t, int batch_index = 0) {
  const Shape s = t.shape();
  if (s.c != 1 && s.c != 3) {
    throw std::invalid_argument("from_tensor: expected 1 or 3 channels, got " + s.str());
  }
  if (batch_index < 0 || batch_index >= s.n) throw std::out_of_range("from_tensor: batch index");
  ImagePlane img{s.w, s.h, s.c, {}};
  const std::size_t chunk = static_cast<std::size_t>(s.c) * s.plane();
  const auto begin = t.storage().begin() + static_cast<std::ptrdiff_t>(batch_index * chunk);
  img.values.assign(begin, begin + static_cast<std::ptrdiff_t>(chunk));
  return img;
}

/// Extends the bottom and right edges by mirroring.
inline ImagePlane reflect_pad(const ImagePlane& img, int bottom, int right) {
  ImagePlane out = ImagePlane::filled(img.width + right, img.height + bottom, img.channels, 0.0f);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        out.at(c, y, x) = img.at(c, reflect_index(y, img.height), reflect_index(x, img.width));
  return out;
}

inline ImagePlane crop(const ImagePlane& img, int top, int left, int height, int width) {
  if (top < 0 || left < 0 || top + height > img.height || left + width > img.width ||
      height <= 0 || width <= 0) {
    throw std::out_of_range("crop: window exceeds image " + img.dims());
  }
  ImagePlane out = ImagePlane::filled(width, height, img.channels, 0.0f);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out.at(c, y, x) = img.at(c, top + y, left + x);
  return out;
}

/// Reads an 8-bit grayscale or RGB PNG; other color types are converted by libpng.
inline ImagePlane load_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  const std::string p = path.string();
  if (png_image_begin_read_from_file(&image, p.c_str()) == 0) {
    throw ImageIoError("load_png: " + p + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr) == 0) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw ImageIoError("load_png: " + p + ": " + msg);
  }
  const int ch = color ? 3 : 1;
  ImagePlane img = ImagePlane::filled(static_cast<int>(image.width),
                                      static_cast<int>(image.height), ch, 0.0f);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < ch; ++c)
        img.at(c, y, x) =
            buffer[(static_cast<std::size_t>(y) * img.width + x) * ch + c] / 255.0f;
  return img;
}

inline std::uint8_t quantize(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline void save_png(const std::filesystem::path& path, const ImagePlane& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw ImageIoError("save_png: " + path.string() + ": unsupported channel count " +
                       std::to_string(img.channels));
  }
  std::vector<std::uint8_t> buffer(img.values.size());
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        buffer[(static_cast<std::size_t>(y) * img.width + x) * img.channels + c] =
            quantize(img.at(c, y, x));
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::string p = path.string();
  if (png_image_write_to_file(&image, p.c_str(), 0, buffer.data(), 0, nullptr) == 0) {
    throw ImageIoError("save_png: " + p + ": " + image.message);
  }
}

}  // namespace lmfn
