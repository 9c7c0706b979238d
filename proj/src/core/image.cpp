// SPDX-License-Identifier: Apache-2.0
#include "hybridct/core/image.hpp"

#include <png.h>

#include <cstring>

#include "hybridct/core/error.hpp"

namespace hybridct {

void write_png_gray(const std::filesystem::path& path, const GrayImage& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), img.width, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw RuntimeFailure("cannot write PNG " + path.string() + ": " + msg);
  }
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw RuntimeFailure("cannot read PNG " + path.string() + ": " + msg);
  }
  image.format = PNG_FORMAT_GRAY;
  GrayImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw RuntimeFailure("corrupt PNG " + path.string() + ": " + msg);
  }
  return out;
}

}  // namespace hybridct
