#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "uvtomo/image.hpp"

namespace uvtomo {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Uniform bins over [0, pi); bin i is represented by its center (i + 0.5) pi / n.
class AngleGrid {
public:
    explicit AngleGrid(int n_theta);

    int size() const { return static_cast<int>(centers_.size()); }
    double center(int i) const { return centers_[static_cast<std::size_t>(i)]; }
    double step() const;
    const std::vector<double>& centers() const { return centers_; }

private:
    std::vector<double> centers_;
};

// L projection lines of d detector samples each.
struct ProjectionSet {
    RowMatrix lines;
    double sigma = 0.0;
    std::optional<std::vector<std::uint32_t>> angles;
    int n_theta = 0;

    int count() const { return static_cast<int>(lines.rows()); }
    int width() const { return static_cast<int>(lines.cols()); }
    void validate() const;
};

// Joseph-style ray-driven kernel: calls fn(pixel_index, weight) for every
// nonzero weight of detector bin `bin` at angle theta (wrapped into [0, pi)).
// The weights include the step length, so a line integral is sum(w * pixel).
template <typename Fn>
void for_each_ray_weight(int d, double theta, int bin, Fn&& fn);

std::vector<double> project(const Image& img, double theta);
RowMatrix project_all(const Image& img, const AngleGrid& grid);

// Exact adjoints of project / project_all.
Image backproject(std::span<const double> line, double theta, int d);
Image backproject(const RowMatrix& lines, const AngleGrid& grid, int d);

// Precomputed sparse system matrix for one grid; rows are (angle, bin) pairs
// in angle-major order. forward() of row i*d+k sums the kernel weights in the
// same order as project(), so results agree bit for bit.
class Projector {
public:
    Projector(int d, const AngleGrid& grid);

    int image_size() const { return d_; }
    int n_angles() const { return n_theta_; }
    std::size_t nonzeros() const { return values_.size(); }

    void forward(std::span<const double> img, std::span<double> out) const;
    RowMatrix forward(std::span<const double> img) const;
    // Projection onto a single angle bin.
    void forward_angle(std::span<const double> img, int angle, std::span<double> out) const;

    void adjoint(std::span<const double> lines, std::span<double> img) const;
    // img += weight * P_angle^T line
    void adjoint_angle_add(std::span<const double> line, int angle, double weight, std::span<double> img) const;

    // out = sum_i weights[i] * P_i^T P_i x, the normal operator for per-angle
    // line counts (or soft counts).
    void normal(std::span<const double> x, std::span<const double> weights, std::span<double> out) const;

private:
    int d_;
    int n_theta_;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::int32_t> cols_;
    std::vector<double> values_;
};

// Ramp filter with Hann apodization, applied to every line independently.
RowMatrix ramp_filter(const RowMatrix& lines);

// Filtered backprojection using the labeled angles of the set.
Image fbp(const ProjectionSet& sino, const AngleGrid& grid);

void save_projections(const ProjectionSet& set, const std::filesystem::path& path);
ProjectionSet load_projections(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

inline double wrap_angle(double theta) {
    constexpr double pi = 3.14159265358979323846;
    double t = std::fmod(theta, pi);
    if (t < 0.0) t += pi;
    return t;
}

template <typename Fn>
void for_each_ray_weight(int d, double theta, int bin, Fn&& fn) {
    const double h = 2.0 / d;
    const double t = wrap_angle(theta);
    const double c = std::cos(t), s = std::sin(t);
    const double det = -1.0 + (bin + 0.5) * h;
    if (std::abs(c) >= std::abs(s)) {
        // Mostly vertical ray: one sample per image row, interpolate along x.
        const double step = h / std::abs(c);
        for (int r = 0; r < d; ++r) {
            const double y = -1.0 + (r + 0.5) * h;
            const double x = (det - y * s) / c;
            const double u = (x + 1.0) / h - 0.5;
            const double fl = std::floor(u);
            const int c0 = static_cast<int>(fl);
            const double f = u - fl;
            if (c0 >= 0 && c0 < d && f < 1.0) fn(r * d + c0, step * (1.0 - f));
            if (c0 + 1 >= 0 && c0 + 1 < d && f > 0.0) fn(r * d + c0 + 1, step * f);
        }
    } else {
        const double step = h / std::abs(s);
        for (int col = 0; col < d; ++col) {
            const double x = -1.0 + (col + 0.5) * h;
            const double y = (det - x * c) / s;
            const double v = (y + 1.0) / h - 0.5;
            const double fl = std::floor(v);
            const int r0 = static_cast<int>(fl);
            const double f = v - fl;
            if (r0 >= 0 && r0 < d && f < 1.0) fn(r0 * d + col, step * (1.0 - f));
            if (r0 + 1 >= 0 && r0 + 1 < d && f > 0.0) fn((r0 + 1) * d + col, step * f);
        }
    }
}

}  // namespace uvtomo
