#include "uvtomo/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "binary_io.hpp"
#include "uvtomo/error.hpp"

namespace uvtomo {

namespace {

constexpr std::uint32_t kImageVersion = 1;

// Columns: intensity, semi-axis x, semi-axis y, center x, center y, rotation.
constexpr std::array<Ellipse, 10> kSheppLogan{{
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
    {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
    {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
    {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
}};

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

// Pixel value = mean of f over a kSub x kSub grid of points inside the pixel.
constexpr int kSub = 4;

template <class F>
Image area_sample(int d, F&& f) {
    Image img(d);
    const double h = img.pitch();
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            double acc = 0.0;
            for (int a = 0; a < kSub; ++a)
                for (int b = 0; b < kSub; ++b)
                    acc += f(-1.0 + (c + (b + 0.5) / kSub) * h, -1.0 + (r + (a + 0.5) / kSub) * h);
            img(r, c) = to_f32(acc / (kSub * kSub));
        }
    return img;
}

}  // namespace

Image::Image(int d) : d_(d), pixels_(static_cast<std::size_t>(d) * d, 0.0) {
    if (d <= 0) throw InvalidArgument("image size must be positive");
}

Image::Image(int d, std::vector<double> pixels) : d_(d), pixels_(std::move(pixels)) {
    if (d <= 0) throw InvalidArgument("image size must be positive");
    if (pixels_.size() != static_cast<std::size_t>(d) * d)
        throw InvalidArgument("pixel count does not match d*d");
}

bool Ellipse::contains(double x, double y) const {
    const double phi = angle_deg * std::numbers::pi / 180.0;
    const double c = std::cos(phi), s = std::sin(phi);
    const double dx = x - center_x, dy = y - center_y;
    const double u = dx * c + dy * s;
    const double v = -dx * s + dy * c;
    return (u * u) / (semi_x * semi_x) + (v * v) / (semi_y * semi_y) <= 1.0;
}

std::span<const Ellipse> shepp_logan_ellipses() { return kSheppLogan; }

double ellipse_phantom_value(std::span<const Ellipse> ellipses, double x, double y) {
    if (x * x + y * y > 1.0) return 0.0;
    double v = 0.0;
    for (const auto& e : ellipses)
        if (e.contains(x, y)) v += e.intensity;
    return std::clamp(v, 0.0, 1.0);
}

Image rasterize_ellipses(int d, std::span<const Ellipse> ellipses) {
    return area_sample(d, [&](double x, double y) { return ellipse_phantom_value(ellipses, x, y); });
}

Image shepp_logan(int d) {
    if (d < 8) throw InvalidArgument("shepp_logan requires d >= 8");
    return rasterize_ellipses(d, kSheppLogan);
}

Image random_blobs(int d, std::uint64_t seed) {
    if (d < 8) throw InvalidArgument("random_blobs requires d >= 8");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    struct Shape {
        bool is_rect;
        double cx, cy, ax, ay, angle, value, radius;
    };
    std::vector<Shape> shapes;
    const int wanted = 6;
    for (int attempt = 0; attempt < 2000 && static_cast<int>(shapes.size()) < wanted; ++attempt) {
        Shape s{};
        s.is_rect = unit(rng) < 0.4;
        s.ax = 0.08 + 0.22 * unit(rng);
        s.ay = 0.08 + 0.22 * unit(rng);
        s.radius = std::hypot(s.ax, s.ay);
        const double rho = (0.75 - s.radius) * std::sqrt(unit(rng));
        if (rho < 0.0) continue;
        const double t = 2.0 * std::numbers::pi * unit(rng);
        s.cx = rho * std::cos(t);
        s.cy = rho * std::sin(t);
        s.angle = std::numbers::pi * unit(rng);
        s.value = 0.3 + 0.7 * unit(rng);
        bool overlaps = false;
        for (const auto& o : shapes)
            if (std::hypot(o.cx - s.cx, o.cy - s.cy) < o.radius + s.radius + 0.02) overlaps = true;
        if (!overlaps) shapes.push_back(s);
    }

    return area_sample(d, [&](double x, double y) {
        double v = (x * x + y * y <= 0.85 * 0.85) ? 0.1 : 0.0;
        for (const auto& s : shapes) {
            const double dx = x - s.cx, dy = y - s.cy;
            const double u = dx * std::cos(s.angle) + dy * std::sin(s.angle);
            const double w = -dx * std::sin(s.angle) + dy * std::cos(s.angle);
            const bool inside = s.is_rect ? (std::abs(u) <= s.ax && std::abs(w) <= s.ay)
                                          : (u * u / (s.ax * s.ax) + w * w / (s.ay * s.ay) <= 1.0);
            if (inside) v = s.value;
        }
        return v;
    });
}

Image disc(int d, double radius, double intensity) {
    Image img(d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            const double x = img.x_center(c), y = img.y_center(r);
            if (x * x + y * y <= radius * radius) img(r, c) = intensity;
        }
    return img;
}

Image gaussian_blur(const Image& img, double sigma_px) {
    if (sigma_px <= 0.0) return img;
    const int d = img.size();
    const int radius = static_cast<int>(std::ceil(3.0 * sigma_px));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * k * k / (sigma_px * sigma_px));
        total += kernel[k + radius];
    }
    for (auto& k : kernel) k /= total;

    Image tmp(d), out(d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int cc = c + k;
                if (cc >= 0 && cc < d) acc += kernel[k + radius] * img(r, cc);
            }
            tmp(r, c) = acc;
        }
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int rr = r + k;
                if (rr >= 0 && rr < d) acc += kernel[k + radius] * tmp(rr, c);
            }
            out(r, c) = acc;
        }
    return out;
}

void save_image(const Image& img, const std::filesystem::path& path) {
    detail::ByteWriter w;
    w.magic("UVIM");
    w.u32(kImageVersion);
    w.u32(static_cast<std::uint32_t>(img.size()));
    w.u32(0);
    for (double v : img.data()) {
        if (!std::isfinite(v)) throw FormatError("refusing to save non-finite pixel");
        w.f32(static_cast<float>(v));
    }
    w.write_file(path);
}

Image load_image(const std::filesystem::path& path) {
    auto r = detail::ByteReader::from_file(path);
    r.expect_magic("UVIM");
    if (r.u32() != kImageVersion) throw FormatError("unsupported image version");
    const std::uint32_t d = r.u32();
    r.u32();  // reserved
    if (d == 0 || d > 65536) throw FormatError("bad image size in header");
    const std::size_t n = static_cast<std::size_t>(d) * d;
    if (r.remaining() != n * 4)
        throw FormatError("payload size mismatch: expected " + std::to_string(n * 4) + " bytes, found " +
                          std::to_string(r.remaining()));
    std::vector<double> px(n);
    for (auto& v : px) {
        const float f = r.f32();
        if (!std::isfinite(f)) throw FormatError("non-finite pixel value");
        v = f;
    }
    return Image(static_cast<int>(d), std::move(px));
}

void save_pgm(const Image& img, const std::filesystem::path& path) {
    const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
    const double span = (*hi > *lo) ? *hi - *lo : 1.0;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    const int d = img.size();
    out << "P5\n" << d << " " << d << "\n255\n";
    for (int r = d - 1; r >= 0; --r)
        for (int c = 0; c < d; ++c) {
            const double v = (img(r, c) - *lo) / span;
            out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)))));
        }
}

}  // namespace uvtomo
