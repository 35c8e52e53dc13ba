#pragma once

#include <cstdint>
#include <limits>

#include "uvtomo/angledist.hpp"
#include "uvtomo/image.hpp"
#include "uvtomo/projector.hpp"

namespace uvtomo {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitFormat = 3, kExitNumerical = 4 };

inline constexpr double kInfiniteSnr = std::numeric_limits<double>::infinity();

// Noise std for a target SNR: sigma^2 = mean_l(|P_l I|^2 / d) / snr. An
// infinite SNR gives sigma = 0.
double sigma_for_snr(const RowMatrix& clean_lines, double snr);

// L lines xi_l = P_{theta_l} I + eps_l with theta_l ~ pmf (bin centers) and
// Gaussian noise at the requested SNR. Angle labels are kept.
ProjectionSet make_dataset(const Image& img, const Pmf& pmf, int count, double snr, Rng& rng);

// Runs one command line; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace uvtomo
