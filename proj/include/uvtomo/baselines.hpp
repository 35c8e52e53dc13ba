#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uvtomo/angledist.hpp"
#include "uvtomo/image.hpp"
#include "uvtomo/projector.hpp"

namespace uvtomo {

// Conjugate gradient on a symmetric positive semidefinite operator, warm
// started from x. Returns the number of iterations run.
int conjugate_gradient(const std::function<void(std::span<const double>, std::span<double>)>& apply,
                       std::span<const double> rhs, std::span<double> x, int max_iters, double tol);

// Lines summed per angle bin and the number of lines per bin; this is all
// the known-angle least-squares problem needs.
struct BinnedData {
    RowMatrix sums;               // n_theta x d
    std::vector<double> counts;   // n_theta
    double sum_squares = 0.0;     // sum of |y_l|^2
};

BinnedData bin_by_angle(const ProjectionSet& sino);

// Isotropic (unsmoothed) discrete TV with forward differences.
double isotropic_tv(std::span<const double> x, int d);

struct AdmmConfig {
    double gamma_tv = 2e-4;
    double rho = 3e-1;
    int n_iters = 200;
    int cg_iters = 20;
    double tol = 1e-7;
};

struct AdmmResult {
    Image image;
    std::vector<double> objective;  // 0.5 |Ax - y|^2 + gamma TV(x), per iteration
    int iterations = 0;
};

// min 0.5 |A x - y|^2 + gamma TV(x), x >= 0, with A the projector at the
// labeled angles. Splittings z = grad x and w = x >= 0; CG for the x-update,
// isotropic shrinkage for z, clamping for w. The returned image is w.
AdmmResult admm_tv(const ProjectionSet& sino, const AdmmConfig& cfg);

enum class EmInit { random, lowpass_gt, fbp_uniform };

EmInit parse_em_init(const std::string& s);
std::string to_string(EmInit init);

struct EmConfig {
    int n_iters = 20;
    double sigma = 0.1;
    bool update_pmf = true;
    EmInit init = EmInit::random;
    int m_step_cg_iters = 10;
    std::uint64_t seed = 0;
    // Gaussian blur std in pixels for lowpass_gt; <= 0 means d / 8.
    double lowpass_sigma_px = 0.0;
};

struct EmResult {
    Image image;
    Pmf pmf;
    Image initial_image;
    // Observed-data log-likelihood at the start of each iteration and after
    // the last one (n_iters + 1 entries).
    std::vector<double> log_likelihood;
    // Expected complete-data log-likelihood Q under each iteration's
    // responsibilities, before and after the M-step.
    std::vector<double> expected_ll_before;
    std::vector<double> expected_ll_after;
};

struct EStep {
    Eigen::MatrixXd responsibilities;  // L x n_theta, rows sum to 1
    Eigen::MatrixXd squared_residuals; // L x n_theta, |xi_l - P_i I|^2
    double log_likelihood = 0.0;
};

EStep em_expectation(const RowMatrix& lines, const RowMatrix& projections, const Pmf& pmf, double sigma);

// reference is required for EmInit::lowpass_gt and ignored otherwise.
EmResult em_reconstruct(const ProjectionSet& sino, const AngleGrid& grid, const EmConfig& cfg,
                        const Image* reference = nullptr);

}  // namespace uvtomo
