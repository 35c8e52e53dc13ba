#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <vector>

#include "uvtomo/angledist.hpp"

namespace uvtomo {

struct DenseLayer {
    Eigen::MatrixXd weight;  // outputs x inputs
    Eigen::VectorXd bias;
};

// Fully connected critic: affine + ReLU on every hidden layer, plain affine
// output layer of width 1.
struct CriticParams {
    std::vector<DenseLayer> layers;

    int input_size() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
    std::vector<int> architecture() const;
    std::size_t parameter_count() const;
    // Throws InvalidArgument unless shapes chain and the output width is 1.
    void validate() const;
};

inline const std::vector<int> kDefaultCriticArch{2048, 1024, 512, 256, 1};
inline const std::vector<int> kSmallCriticArch{512, 256, 128, 64, 1};
// Default for training at d <= 64 on a few cores.
inline const std::vector<int> kDeskCriticArch{256, 128, 64, 32, 1};

// He initialization: W ~ N(0, 2 / fan_in), b = 0.
CriticParams init_critic(std::span<const int> arch, int input_size, Rng& rng);
CriticParams zero_critic(std::span<const int> arch, int input_size);

double forward(const CriticParams& params, std::span<const double> line);
// Columns of `inputs` are lines; returns one score per column.
Eigen::RowVectorXd forward_batch(const CriticParams& params, const Eigen::MatrixXd& inputs);

// alpha * real + (1 - alpha) * syn with alpha ~ U(0, 1), one alpha per line.
std::vector<double> interpolate(std::span<const double> real, std::span<const double> syn, Rng& rng);
std::vector<double> interpolate_with(std::span<const double> real, std::span<const double> syn, double alpha);

void save_checkpoint(const CriticParams& params, const std::filesystem::path& path);
CriticParams load_checkpoint(const std::filesystem::path& path);

}  // namespace uvtomo
