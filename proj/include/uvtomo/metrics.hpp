#pragma once

#include <optional>

#include "uvtomo/angledist.hpp"
#include "uvtomo/image.hpp"

namespace uvtomo {

inline constexpr double kPsnrCap = 300.0;

// 10 log10(max(gt)^2 / MSE), capped at kPsnrCap.
double psnr(const Image& recon, const Image& gt);

// Pearson correlation over pixels; throws InvalidArgument for constant input.
double cc(const Image& recon, const Image& gt);

// Bilinear rotation about the image center by `angle` radians
// (counter-clockwise); samples outside the grid read as zero.
Image rotate_image(const Image& img, double angle);
// x -> -x.
Image mirror_image(const Image& img);

// Rotation by rotation_steps * pi / n_theta, then an optional mirror. The
// same transform maps a PMF by a circular shift of rotation_steps bins and a
// reversal.
struct GaugeTransform {
    int rotation_steps = 0;
    bool mirrored = false;
    int n_theta = 1;

    double angle() const;
    Image apply(const Image& img) const;
    Pmf apply(const Pmf& p) const;
};

struct Alignment {
    Image image;
    std::optional<Pmf> pmf;
    GaugeTransform transform;
    double cc = 0.0;
};

// Searches 2 * n_theta rotations (full turn) with and without mirroring and
// keeps the transform with the highest cc; ties keep the earliest candidate,
// so the identity wins when nothing improves on it.
Alignment align_for_eval(const Image& recon, const Image& gt, int n_theta,
                         const std::optional<Pmf>& recon_pmf = std::nullopt);

struct Evaluation {
    double psnr = 0.0;
    double cc = 0.0;
    std::optional<double> tv_distance;
    double psnr_unaligned = 0.0;
    std::optional<double> cc_unaligned;
    std::optional<double> tv_distance_unaligned;
    GaugeTransform transform;
};

Evaluation evaluate(const Image& recon, const Image& gt, int n_theta, const std::optional<Pmf>& recon_pmf = std::nullopt,
                    const std::optional<Pmf>& gt_pmf = std::nullopt);

}  // namespace uvtomo
