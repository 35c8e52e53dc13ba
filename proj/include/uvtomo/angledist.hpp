#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

namespace uvtomo {

using Rng = std::mt19937_64;

inline constexpr double kLogFloor = 1e-12;      // added to p before log()
inline constexpr double kUniformClamp = 1e-12;  // u kept inside [eps, 1 - eps]

// Probability mass function over angle bins.
class Pmf {
public:
    Pmf() = default;
    // Validates: nonnegative, finite, sums to one within 1e-12.
    explicit Pmf(std::vector<double> probs);

    static Pmf uniform(int n);
    static Pmf one_hot(int n, int k);
    // Clips negatives and renormalizes; for values that are a PMF up to rounding.
    static Pmf normalized(std::vector<double> weights);

    int size() const { return static_cast<int>(probs_.size()); }
    double operator[](int i) const { return probs_[static_cast<std::size_t>(i)]; }
    const std::vector<double>& probs() const { return probs_; }

private:
    std::vector<double> probs_;
};

struct PmfLogits {
    std::vector<double> logits;
};

Pmf softmax_pmf(const PmfLogits& logits);
// Vector-Jacobian product of softmax: dL/dlogits from dL/dp.
std::vector<double> softmax_backward(const Pmf& p, std::span<const double> grad_p);

double gumbel_from_uniform(double u);
// Standard Gumbel(0, 1) draws, row-major rows x cols.
Eigen::MatrixXd sample_gumbel(int rows, int cols, Rng& rng);

// Relaxed one-hot samples r (B x n) with their temperature and the Gumbel
// noise that produced them.
struct GumbelWeights {
    Eigen::MatrixXd weights;
    Eigen::MatrixXd gumbels;
    double tau = 1.0;
};

GumbelWeights gumbel_softmax(const Pmf& p, double tau, int batch, Rng& rng);
// Deterministic part: rows softmax((g + log(p + eps)) / tau).
GumbelWeights gumbel_softmax_with_noise(const Pmf& p, double tau, const Eigen::MatrixXd& gumbels);
// dL/dp given dL/dr, holding the Gumbel noise fixed.
std::vector<double> gumbel_softmax_backward(const Pmf& p, const GumbelWeights& r, const Eigen::MatrixXd& grad_r);

std::vector<std::uint32_t> sample_categorical(const Pmf& p, int count, Rng& rng);

double tv_distance(const Pmf& p, const Pmf& q);

// Smooth positive curve through n_pieces random knots (circular cosine
// interpolation), normalized. n_pieces == 1 gives the uniform PMF.
Pmf random_piecewise_pmf(int n_theta, int n_pieces, Rng& rng);

// Index transforms matching image rotations/reflections.
Pmf shift_pmf(const Pmf& p, int shift);
Pmf flip_pmf(const Pmf& p);

void save_pmf_csv(const Pmf& p, const std::filesystem::path& path);
Pmf load_pmf_csv(const std::filesystem::path& path);

}  // namespace uvtomo
