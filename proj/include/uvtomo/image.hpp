#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace uvtomo {

// d x d image on the square [-1, 1]^2, row-major. Pixel (r, c) has center
// x = -1 + (c + 0.5) h, y = -1 + (r + 0.5) h with h = 2 / d, so row 0 is the
// bottom of the domain.
class Image {
public:
    Image() = default;
    explicit Image(int d);
    Image(int d, std::vector<double> pixels);

    int size() const { return d_; }
    double pitch() const { return 2.0 / d_; }
    std::size_t count() const { return pixels_.size(); }

    double& operator()(int row, int col) { return pixels_[static_cast<std::size_t>(row) * d_ + col]; }
    double operator()(int row, int col) const { return pixels_[static_cast<std::size_t>(row) * d_ + col]; }

    std::span<double> data() { return pixels_; }
    std::span<const double> data() const { return pixels_; }
    const std::vector<double>& pixels() const { return pixels_; }

    double x_center(int col) const { return -1.0 + (col + 0.5) * pitch(); }
    double y_center(int row) const { return -1.0 + (row + 0.5) * pitch(); }

    bool operator==(const Image&) const = default;

private:
    int d_ = 0;
    std::vector<double> pixels_;
};

struct Ellipse {
    double intensity;
    double semi_x;
    double semi_y;
    double center_x;
    double center_y;
    double angle_deg;

    bool contains(double x, double y) const;
};

// Modified (high contrast) Shepp-Logan table, ten ellipses.
std::span<const Ellipse> shepp_logan_ellipses();

// Analytic phantom value at a point: sum of intensities of the ellipses
// containing it, clamped to [0, 1], zero outside the unit disc.
double ellipse_phantom_value(std::span<const Ellipse> ellipses, double x, double y);

// Rasterize by averaging 4x4 sample points per pixel. Values are rounded to float32 so the
// image survives the raw file format unchanged.
Image rasterize_ellipses(int d, std::span<const Ellipse> ellipses);

Image shepp_logan(int d);

// Seeded piecewise-constant test image: non-overlapping ellipses and
// rectangles inside the unit disc on a faint background disc.
Image random_blobs(int d, std::uint64_t seed);

// Uniform disc of given radius (domain units) and intensity, centered.
Image disc(int d, double radius, double intensity = 1.0);

Image gaussian_blur(const Image& img, double sigma_px);

void save_image(const Image& img, const std::filesystem::path& path);
Image load_image(const std::filesystem::path& path);

// 8-bit binary PGM, min-max scaled, top row = largest y.
void save_pgm(const Image& img, const std::filesystem::path& path);

}  // namespace uvtomo
