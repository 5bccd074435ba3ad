#pragma once

#include <draglab/tensor.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace draglab {

/// 8-bit RGB PNG from a [H, W, 3] tensor in [0, 1] (values are clamped).
std::string encode_png(const Tensor& image);
/// Decodes any PNG into [H, W, 3] floats in [0, 1]; alpha is dropped and
/// grayscale is expanded. Malformed data raises ParseError.
Tensor decode_png(std::string_view bytes);

void write_png(const std::filesystem::path& path, const Tensor& image);
Tensor read_png(const std::filesystem::path& path);

/// Bilinear resize of a [H, W, C] image.
Tensor resize_image(const Tensor& image, int height, int width);

}  // namespace draglab
