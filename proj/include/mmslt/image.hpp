#pragma once

// 8-bit grayscale frames with just enough I/O and geometry for the pipeline:
// binary PGM (P5) read/write, bilinear resize, cropping, and an inverse-mapped
// affine warp used by the video-level augmentation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmslt/rng.hpp"

namespace mmslt {

struct Image {
    int width{0};
    int height{0};
    std::vector<std::uint8_t> pixels;  // row-major

    bool empty() const { return width == 0 || height == 0; }

    std::uint8_t at(int y, int x) const {
        return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                      static_cast<std::size_t>(x)];
    }
    std::uint8_t& at(int y, int x) {
        return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                      static_cast<std::size_t>(x)];
    }

    static Image filled(int w, int h, std::uint8_t v) {
        Image im;
        im.width = w;
        im.height = h;
        im.pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), v);
        return im;
    }

    std::uint64_t digest() const {
        std::uint64_t h = fnv1a(&width, sizeof(width));
        h = fnv1a(&height, sizeof(height), h);
        return fnv1a(pixels.data(), pixels.size(), h);
    }
};

inline void write_pgm(const std::filesystem::path& path, const Image& im) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path.string());
    out << "P5\n" << im.width << " " << im.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(im.pixels.data()),
              static_cast<std::streamsize>(im.pixels.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline Image read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open frame file: " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw std::runtime_error("not a binary PGM (P5): " + path.string());
    auto next_int = [&](const char* what) {
        // skip whitespace and '#' comment lines
        int c = in.peek();
        while (c == '#' || std::isspace(c)) {
            if (c == '#') {
                std::string line;
                std::getline(in, line);
            } else {
                in.get();
            }
            c = in.peek();
        }
        long v = -1;
        in >> v;
        if (!in || v < 0) throw std::runtime_error(std::string("bad PGM ") + what + ": " + path.string());
        return static_cast<int>(v);
    };
    Image im;
    im.width = next_int("width");
    im.height = next_int("height");
    const int maxval = next_int("maxval");
    if (maxval != 255) throw std::runtime_error("unsupported PGM maxval: " + path.string());
    in.get();  // single whitespace after header
    im.pixels.resize(static_cast<std::size_t>(im.width) * static_cast<std::size_t>(im.height));
    in.read(reinterpret_cast<char*>(im.pixels.data()), static_cast<std::streamsize>(im.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(im.pixels.size())) {
        throw std::runtime_error("truncated PGM: " + path.string());
    }
    return im;
}

inline double sample_bilinear(const Image& im, double y, double x) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    auto px = [&](int yy, int xx) -> double {
        if (xx < 0 || yy < 0 || xx >= im.width || yy >= im.height) return 0.0;
        return im.at(yy, xx);
    };
    return px(y0, x0) * (1 - fy) * (1 - fx) + px(y0, x0 + 1) * (1 - fy) * fx +
           px(y0 + 1, x0) * fy * (1 - fx) + px(y0 + 1, x0 + 1) * fy * fx;
}

inline Image resize(const Image& im, int out_w, int out_h) {
    if (im.empty()) throw std::invalid_argument("resize: empty image");
    if (out_w == im.width && out_h == im.height) return im;
    Image out = Image::filled(out_w, out_h, 0);
    const double sx = static_cast<double>(im.width) / out_w;
    const double sy = static_cast<double>(im.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const double v = sample_bilinear(im, (y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5);
            out.at(y, x) = static_cast<std::uint8_t>(std::clamp(v + 0.5, 0.0, 255.0));
        }
    }
    return out;
}

inline Image square_resize(const Image& im, int side) { return resize(im, side, side); }

inline Image crop(const Image& im, int top, int left, int h, int w) {
    if (top < 0 || left < 0 || top + h > im.height || left + w > im.width) {
        throw std::invalid_argument("crop: window out of bounds");
    }
    Image out = Image::filled(w, h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) out.at(y, x) = im.at(top + y, left + x);
    }
    return out;
}

inline Image center_crop(const Image& im, int side) {
    return crop(im, (im.height - side) / 2, (im.width - side) / 2, side, side);
}

// Affine parameters shared by all frames of a video (video-level augmentation).
struct AffineParams {
    double shift_x{0};   // pixels
    double shift_y{0};
    double angle{0};     // radians
    double scale{1.0};
};

// inverse-mapped warp around the image center, zero fill outside
inline Image warp_affine(const Image& im, const AffineParams& p) {
    Image out = Image::filled(im.width, im.height, 0);
    const double cx = (im.width - 1) / 2.0;
    const double cy = (im.height - 1) / 2.0;
    const double cos_a = std::cos(-p.angle);
    const double sin_a = std::sin(-p.angle);
    const double inv_s = 1.0 / p.scale;
    for (int y = 0; y < im.height; ++y) {
        for (int x = 0; x < im.width; ++x) {
            const double dx = x - cx - p.shift_x;
            const double dy = y - cy - p.shift_y;
            const double sx = (cos_a * dx - sin_a * dy) * inv_s + cx;
            const double sy = (sin_a * dx + cos_a * dy) * inv_s + cy;
            const double v = sample_bilinear(im, sy, sx);
            out.at(y, x) = static_cast<std::uint8_t>(std::clamp(v + 0.5, 0.0, 255.0));
        }
    }
    return out;
}

}  // namespace mmslt
