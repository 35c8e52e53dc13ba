#include "uvtomo/projector.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "binary_io.hpp"
#include "uvtomo/error.hpp"

namespace uvtomo {

AngleGrid::AngleGrid(int n_theta) {
    if (n_theta <= 0) throw InvalidArgument("angle grid needs at least one bin");
    centers_.resize(static_cast<std::size_t>(n_theta));
    for (int i = 0; i < n_theta; ++i) centers_[static_cast<std::size_t>(i)] = (i + 0.5) * std::numbers::pi / n_theta;
}

double AngleGrid::step() const { return std::numbers::pi / size(); }

void ProjectionSet::validate() const {
    if (n_theta <= 0) throw InvalidArgument("projection set: n_theta must be positive");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgument("projection set: sigma must be >= 0");
    if (!lines.allFinite()) throw InvalidArgument("projection set: non-finite samples");
    if (angles) {
        if (angles->size() != static_cast<std::size_t>(lines.rows()))
            throw InvalidArgument("projection set: angle label count differs from line count");
        for (auto a : *angles)
            if (a >= static_cast<std::uint32_t>(n_theta)) throw InvalidArgument("projection set: angle label out of range");
    }
}

std::vector<double> project(const Image& img, double theta) {
    const int d = img.size();
    std::vector<double> line(static_cast<std::size_t>(d), 0.0);
    const auto px = img.data();
    for (int k = 0; k < d; ++k) {
        double acc = 0.0;
        for_each_ray_weight(d, theta, k, [&](int idx, double w) { acc += w * px[static_cast<std::size_t>(idx)]; });
        line[static_cast<std::size_t>(k)] = acc;
    }
    return line;
}

RowMatrix project_all(const Image& img, const AngleGrid& grid) {
    const int d = img.size();
    RowMatrix out(grid.size(), d);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < grid.size(); ++i) {
        const auto row = project(img, grid.center(i));
        for (int k = 0; k < d; ++k) out(i, k) = row[static_cast<std::size_t>(k)];
    }
    return out;
}

Image backproject(std::span<const double> line, double theta, int d) {
    if (static_cast<int>(line.size()) != d) throw InvalidArgument("backproject: line length differs from image size");
    Image img(d);
    auto px = img.data();
    for (int k = 0; k < d; ++k) {
        const double g = line[static_cast<std::size_t>(k)];
        for_each_ray_weight(d, theta, k, [&](int idx, double w) { px[static_cast<std::size_t>(idx)] += w * g; });
    }
    return img;
}

Image backproject(const RowMatrix& lines, const AngleGrid& grid, int d) {
    if (lines.rows() != grid.size() || lines.cols() != d)
        throw InvalidArgument("backproject: sinogram shape does not match grid");
    Image img(d);
    auto px = img.data();
    for (int i = 0; i < grid.size(); ++i)
        for (int k = 0; k < d; ++k) {
            const double g = lines(i, k);
            for_each_ray_weight(d, grid.center(i), k,
                                [&](int idx, double w) { px[static_cast<std::size_t>(idx)] += w * g; });
        }
    return img;
}

Projector::Projector(int d, const AngleGrid& grid) : d_(d), n_theta_(grid.size()) {
    if (d <= 0) throw InvalidArgument("projector: image size must be positive");
    row_ptr_.reserve(static_cast<std::size_t>(n_theta_) * d + 1);
    row_ptr_.push_back(0);
    for (int i = 0; i < n_theta_; ++i)
        for (int k = 0; k < d; ++k) {
            for_each_ray_weight(d, grid.center(i), k, [&](int idx, double w) {
                cols_.push_back(idx);
                values_.push_back(w);
            });
            row_ptr_.push_back(values_.size());
        }
}

void Projector::forward(std::span<const double> img, std::span<double> out) const {
    if (img.size() != static_cast<std::size_t>(d_) * d_ || out.size() != static_cast<std::size_t>(n_theta_) * d_)
        throw InvalidArgument("projector forward: shape mismatch");
    const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t row = 0; row < rows; ++row) {
        double acc = 0.0;
        for (std::size_t e = row_ptr_[row]; e < row_ptr_[row + 1]; ++e) acc += values_[e] * img[cols_[e]];
        out[row] = acc;
    }
}

RowMatrix Projector::forward(std::span<const double> img) const {
    RowMatrix out(n_theta_, d_);
    forward(img, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
    return out;
}

void Projector::forward_angle(std::span<const double> img, int angle, std::span<double> out) const {
    if (angle < 0 || angle >= n_theta_ || out.size() != static_cast<std::size_t>(d_))
        throw InvalidArgument("projector forward_angle: shape mismatch");
    for (int k = 0; k < d_; ++k) {
        const std::size_t row = static_cast<std::size_t>(angle) * d_ + k;
        double acc = 0.0;
        for (std::size_t e = row_ptr_[row]; e < row_ptr_[row + 1]; ++e) acc += values_[e] * img[cols_[e]];
        out[k] = acc;
    }
}

void Projector::adjoint(std::span<const double> lines, std::span<double> img) const {
    if (img.size() != static_cast<std::size_t>(d_) * d_ || lines.size() != static_cast<std::size_t>(n_theta_) * d_)
        throw InvalidArgument("projector adjoint: shape mismatch");
    std::fill(img.begin(), img.end(), 0.0);
    for (std::size_t row = 0; row < lines.size(); ++row) {
        const double g = lines[row];
        if (g == 0.0) continue;
        for (std::size_t e = row_ptr_[row]; e < row_ptr_[row + 1]; ++e) img[cols_[e]] += values_[e] * g;
    }
}

void Projector::adjoint_angle_add(std::span<const double> line, int angle, double weight,
                                  std::span<double> img) const {
    if (angle < 0 || angle >= n_theta_ || line.size() != static_cast<std::size_t>(d_))
        throw InvalidArgument("projector adjoint_angle_add: shape mismatch");
    for (int k = 0; k < d_; ++k) {
        const double g = weight * line[k];
        if (g == 0.0) continue;
        const std::size_t row = static_cast<std::size_t>(angle) * d_ + k;
        for (std::size_t e = row_ptr_[row]; e < row_ptr_[row + 1]; ++e) img[cols_[e]] += values_[e] * g;
    }
}

void Projector::normal(std::span<const double> x, std::span<const double> weights, std::span<double> out) const {
    if (weights.size() != static_cast<std::size_t>(n_theta_)) throw InvalidArgument("projector normal: weight count");
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> tmp(static_cast<std::size_t>(d_));
    for (int i = 0; i < n_theta_; ++i) {
        if (weights[i] == 0.0) continue;
        forward_angle(x, i, tmp);
        adjoint_angle_add(tmp, i, weights[i], out);
    }
}

RowMatrix ramp_filter(const RowMatrix& lines) {
    const int d = static_cast<int>(lines.cols());
    const double h = 2.0 / d;
    int n = 1;
    while (n < 2 * d) n *= 2;

    // Band-limited ramp sampled in space, then Hann-apodized in frequency.
    std::vector<double> kernel(static_cast<std::size_t>(n), 0.0);
    kernel[0] = 1.0 / (4.0 * h * h);
    for (int j = 1; j < n / 2; ++j) {
        if (j % 2 == 1) {
            const double v = -1.0 / (j * j * std::numbers::pi * std::numbers::pi * h * h);
            kernel[static_cast<std::size_t>(j)] = v;
            kernel[static_cast<std::size_t>(n - j)] = v;
        }
    }
    const int nf = n / 2 + 1;
    std::vector<std::complex<double>> kspec(static_cast<std::size_t>(nf)), lspec(static_cast<std::size_t>(nf));
    std::vector<double> buf(static_cast<std::size_t>(n));

    fftw_plan fwd = fftw_plan_dft_r2c_1d(n, buf.data(), reinterpret_cast<fftw_complex*>(lspec.data()), FFTW_ESTIMATE);
    fftw_plan inv = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(lspec.data()), buf.data(), FFTW_ESTIMATE);

    std::copy(kernel.begin(), kernel.end(), buf.begin());
    fftw_execute(fwd);
    for (int f = 0; f < nf; ++f) {
        const double window = 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * f / n));
        kspec[static_cast<std::size_t>(f)] = lspec[static_cast<std::size_t>(f)] * window;
    }

    RowMatrix out(lines.rows(), d);
    for (Eigen::Index row = 0; row < lines.rows(); ++row) {
        std::fill(buf.begin(), buf.end(), 0.0);
        for (int k = 0; k < d; ++k) buf[static_cast<std::size_t>(k)] = lines(row, k);
        fftw_execute(fwd);
        for (int f = 0; f < nf; ++f) lspec[static_cast<std::size_t>(f)] *= kspec[static_cast<std::size_t>(f)];
        fftw_execute(inv);
        // FFTW's inverse is unnormalized; h is the convolution quadrature weight.
        for (int k = 0; k < d; ++k) out(row, k) = buf[static_cast<std::size_t>(k)] * h / n;
    }
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    return out;
}

Image fbp(const ProjectionSet& sino, const AngleGrid& grid) {
    if (!sino.angles) throw InvalidArgument("fbp requires angle labels");
    if (sino.n_theta != grid.size()) throw InvalidArgument("fbp: grid size differs from dataset n_theta");
    sino.validate();
    const int d = sino.width();
    const double h = 2.0 / d;

    // Filtering is linear, so lines sharing a bin are summed first.
    RowMatrix per_bin = RowMatrix::Zero(grid.size(), d);
    for (int l = 0; l < sino.count(); ++l) per_bin.row((*sino.angles)[static_cast<std::size_t>(l)]) += sino.lines.row(l);
    const RowMatrix filtered = ramp_filter(per_bin);

    Image img(d);
    for (int i = 0; i < grid.size(); ++i) {
        if (per_bin.row(i).isZero(0.0)) continue;
        const double c = std::cos(grid.center(i)), s = std::sin(grid.center(i));
        for (int r = 0; r < d; ++r)
            for (int col = 0; col < d; ++col) {
                const double pos = img.x_center(col) * c + img.y_center(r) * s;
                const double u = (pos + 1.0) / h - 0.5;
                const double fl = std::floor(u);
                const int k0 = static_cast<int>(fl);
                const double f = u - fl;
                double v = 0.0;
                if (k0 >= 0 && k0 < d) v += (1.0 - f) * filtered(i, k0);
                if (k0 + 1 >= 0 && k0 + 1 < d) v += f * filtered(i, k0 + 1);
                img(r, col) += v;
            }
    }
    const double scale = std::numbers::pi / sino.count();
    for (auto& v : img.data()) v *= scale;
    return img;
}

void save_projections(const ProjectionSet& set, const std::filesystem::path& path) {
    set.validate();
    detail::ByteWriter w;
    w.magic("UVTG");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(set.count()));
    w.u32(static_cast<std::uint32_t>(set.width()));
    w.u32(static_cast<std::uint32_t>(set.n_theta));
    w.f64(set.sigma);
    w.u8(set.angles ? 1 : 0);
    w.zeros(7);
    for (Eigen::Index l = 0; l < set.lines.rows(); ++l)
        for (Eigen::Index k = 0; k < set.lines.cols(); ++k) w.f32(static_cast<float>(set.lines(l, k)));
    if (set.angles)
        for (auto a : *set.angles) w.u32(a);
    w.write_file(path);
}

ProjectionSet load_projections(const std::filesystem::path& path) {
    auto r = detail::ByteReader::from_file(path);
    r.expect_magic("UVTG");
    if (r.u32() != 1) throw FormatError("unsupported sinogram version");
    const std::uint32_t count = r.u32();
    const std::uint32_t d = r.u32();
    const std::uint32_t n_theta = r.u32();
    ProjectionSet set;
    set.sigma = r.f64();
    const std::uint8_t has_angles = r.u8();
    r.skip(7);
    if (d == 0 || n_theta == 0) throw FormatError("sinogram header has zero dimension");
    if (has_angles > 1) throw FormatError("sinogram has_angles flag must be 0 or 1");
    if (!(set.sigma >= 0.0) || !std::isfinite(set.sigma)) throw FormatError("sinogram sigma invalid");
    const std::size_t payload = static_cast<std::size_t>(count) * d * 4 + (has_angles ? std::size_t{count} * 4 : 0);
    if (r.remaining() != payload) throw FormatError("sinogram payload size mismatch");
    set.n_theta = static_cast<int>(n_theta);
    set.lines.resize(count, d);
    for (std::uint32_t l = 0; l < count; ++l)
        for (std::uint32_t k = 0; k < d; ++k) {
            const float v = r.f32();
            if (!std::isfinite(v)) throw FormatError("sinogram contains non-finite sample");
            set.lines(l, k) = v;
        }
    if (has_angles) {
        std::vector<std::uint32_t> angles(count);
        for (auto& a : angles) {
            a = r.u32();
            if (a >= n_theta) throw FormatError("sinogram angle label out of range");
        }
        set.angles = std::move(angles);
    }
    return set;
}

}  // namespace uvtomo
