#include "uvtomo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "uvtomo/error.hpp"

namespace uvtomo {

namespace {

void check_same_size(const Image& a, const Image& b) {
    if (a.size() != b.size()) throw InvalidArgument("image dimensions differ");
}

// Pearson correlation, or nullopt when either side has zero variance.
std::optional<double> correlation(const Image& a, const Image& b) {
    const std::size_t n = a.count();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a.data()[i];
        mb += b.data()[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a.data()[i] - ma, db = b.data()[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

double psnr(const Image& recon, const Image& gt) {
    check_same_size(recon, gt);
    double mse = 0.0;
    for (std::size_t i = 0; i < gt.count(); ++i) {
        const double e = recon.data()[i] - gt.data()[i];
        mse += e * e;
    }
    mse /= static_cast<double>(gt.count());
    if (mse == 0.0) return kPsnrCap;
    const double peak = *std::max_element(gt.data().begin(), gt.data().end());
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double cc(const Image& recon, const Image& gt) {
    check_same_size(recon, gt);
    const auto r = correlation(recon, gt);
    if (!r) throw InvalidArgument("cc undefined for a constant image");
    return *r;
}

Image rotate_image(const Image& img, double angle) {
    const int d = img.size();
    const double h = img.pitch();
    const double c = std::cos(angle), s = std::sin(angle);
    Image out(d);
    auto sample = [&](int r, int col) { return (r >= 0 && r < d && col >= 0 && col < d) ? img(r, col) : 0.0; };
    for (int r = 0; r < d; ++r)
        for (int col = 0; col < d; ++col) {
            const double x = img.x_center(col), y = img.y_center(r);
            // out(x) = img(R(-angle) x)
            const double xs = c * x + s * y;
            const double ys = -s * x + c * y;
            const double u = (xs + 1.0) / h - 0.5, v = (ys + 1.0) / h - 0.5;
            const double fu = std::floor(u), fv = std::floor(v);
            const int c0 = static_cast<int>(fu), r0 = static_cast<int>(fv);
            const double a = u - fu, b = v - fv;
            out(r, col) = (1 - a) * (1 - b) * sample(r0, c0) + a * (1 - b) * sample(r0, c0 + 1) +
                          (1 - a) * b * sample(r0 + 1, c0) + a * b * sample(r0 + 1, c0 + 1);
        }
    return out;
}

Image mirror_image(const Image& img) {
    const int d = img.size();
    Image out(d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) out(r, c) = img(r, d - 1 - c);
    return out;
}

double GaugeTransform::angle() const { return rotation_steps * std::numbers::pi / n_theta; }

Image GaugeTransform::apply(const Image& img) const {
    Image out = rotation_steps == 0 ? img : rotate_image(img, angle());
    return mirrored ? mirror_image(out) : out;
}

Pmf GaugeTransform::apply(const Pmf& p) const {
    if (p.size() != n_theta) throw InvalidArgument("gauge transform: pmf size differs from n_theta");
    Pmf out = rotation_steps % n_theta == 0 ? p : shift_pmf(p, rotation_steps);
    return mirrored ? flip_pmf(out) : out;
}

Alignment align_for_eval(const Image& recon, const Image& gt, int n_theta, const std::optional<Pmf>& recon_pmf) {
    check_same_size(recon, gt);
    if (n_theta <= 0) throw InvalidArgument("align_for_eval: n_theta must be positive");
    GaugeTransform best{0, false, n_theta};
    double best_cc = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 2 * n_theta; ++k) {
        const Image rotated = k == 0 ? recon : rotate_image(recon, k * std::numbers::pi / n_theta);
        for (bool mirrored : {false, true}) {
            const auto score = correlation(mirrored ? mirror_image(rotated) : rotated, gt);
            const double v = score.value_or(-std::numeric_limits<double>::infinity());
            if (v > best_cc) {
                best_cc = v;
                best = {k, mirrored, n_theta};
            }
        }
    }
    Alignment out{best.apply(recon), std::nullopt, best, best_cc};
    if (recon_pmf) out.pmf = best.apply(*recon_pmf);
    return out;
}

Evaluation evaluate(const Image& recon, const Image& gt, int n_theta, const std::optional<Pmf>& recon_pmf,
                    const std::optional<Pmf>& gt_pmf) {
    const Alignment a = align_for_eval(recon, gt, n_theta, recon_pmf);
    Evaluation e;
    e.transform = a.transform;
    e.psnr = psnr(a.image, gt);
    e.cc = a.cc;
    e.psnr_unaligned = psnr(recon, gt);
    e.cc_unaligned = correlation(recon, gt);
    if (recon_pmf && gt_pmf) {
        e.tv_distance = tv_distance(*a.pmf, *gt_pmf);
        e.tv_distance_unaligned = tv_distance(*recon_pmf, *gt_pmf);
    }
    return e;
}

}  // namespace uvtomo
