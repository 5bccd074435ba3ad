#include <draglab/corpus.hpp>
#include <draglab/image_io.hpp>

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace draglab {

std::string encode_png(const Tensor& image) {
    if (image.rank() != 3 || image.dim(2) != 3) {
        throw ArgumentError("encode_png: expected [H, W, 3], got " + shape_string(image.shape()));
    }
    std::vector<unsigned char> pixels(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double v = std::clamp(static_cast<double>(image[i]), 0.0, 1.0);
        pixels[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.dim(1));
    png.height = static_cast<png_uint_32>(image.dim(0));
    png.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
        throw Error(std::string("encode_png: ") + png.message);
    }
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&png, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
        throw Error(std::string("encode_png: ") + png.message);
    }
    out.resize(size);
    return out;
}

Tensor decode_png(std::string_view bytes) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
        throw ParseError(std::string("invalid PNG: ") + png.message, 0);
    }
    png.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> pixels(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, pixels.data(), 0, nullptr)) {
        const std::string message = png.message;
        png_image_free(&png);
        throw ParseError("invalid PNG: " + message, 0);
    }
    Tensor out({static_cast<int>(png.height), static_cast<int>(png.width), 3});
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<real>(pixels[i] / 255.0);
    return out;
}

void write_png(const std::filesystem::path& path, const Tensor& image) { write_file_atomic(path, encode_png(image)); }

Tensor read_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

Tensor resize_image(const Tensor& image, int height, int width) {
    if (image.rank() != 3 || height < 1 || width < 1) throw ArgumentError("resize_image: bad shape");
    const int h = image.dim(0), w = image.dim(1), c = image.dim(2);
    Tensor out({height, width, c});
    for (int y = 0; y < height; ++y) {
        const double sy = std::clamp((y + 0.5) * h / height - 0.5, 0.0, h - 1.0);
        const int y0 = static_cast<int>(sy), y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - y0;
        for (int x = 0; x < width; ++x) {
            const double sx = std::clamp((x + 0.5) * w / width - 0.5, 0.0, w - 1.0);
            const int x0 = static_cast<int>(sx), x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - x0;
            for (int k = 0; k < c; ++k) {
                auto px = [&](int yy, int xx) {
                    return static_cast<double>(image[(static_cast<std::size_t>(yy) * w + xx) * c + k]);
                };
                const double top = px(y0, x0) * (1 - fx) + px(y0, x1) * fx;
                const double bottom = px(y1, x0) * (1 - fx) + px(y1, x1) * fx;
                out[(static_cast<std::size_t>(y) * width + x) * c + k] = static_cast<real>(top * (1 - fy) + bottom * fy);
            }
        }
    }
    return out;
}

}  // namespace draglab
