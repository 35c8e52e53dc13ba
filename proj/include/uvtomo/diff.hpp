#pragma once

// Gradients of the fully connected critic. The architecture is fixed
// (affine + ReLU stack), so both the first-order backward pass and the
// gradient-penalty double backward are written out layer by layer. With the
// activation masks frozen, the input gradient is a product of linear maps and
// its parameter derivative needs no second derivative of ReLU.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "uvtomo/critic.hpp"

namespace uvtomo {

// Per-layer gradients with the same shapes as CriticParams.
struct LayerGrad {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;

    static LayerGrad zeros_like(const CriticParams& params);
    double squared_norm() const;
    void scale(double s);
    void add(const LayerGrad& other, double s = 1.0);
    bool all_finite() const;
};

// Activations of one batched forward pass. inputs[k] is the input of layer k;
// ReLU masks are recovered as inputs[k] > 0 for k >= 1.
struct ForwardTrace {
    std::vector<Eigen::MatrixXd> inputs;
    Eigen::RowVectorXd output;
};

ForwardTrace forward_trace(const CriticParams& params, const Eigen::MatrixXd& x);

// Backpropagates per-column output cotangents. Returns dL/dx (one column per
// sample) and, when `grad` is non-null, accumulates parameter gradients.
Eigen::MatrixXd backward(const CriticParams& params, const ForwardTrace& trace,
                         const Eigen::RowVectorXd& upstream, LayerGrad* grad);

struct PenaltyResult {
    double value = 0.0;
    int vanishing = 0;  // samples whose input-gradient norm fell below kPenaltyNormFloor
    Eigen::VectorXd grad_norms;
};

inline constexpr double kPenaltyNormFloor = 1e-12;

// Sum over columns of lambda * (||grad_x D(x_b)|| - 1)^2; adds its parameter
// gradient into `grad`.
PenaltyResult penalty_batch(const CriticParams& params, const Eigen::MatrixXd& x, double lambda, LayerGrad& grad);

// Single-sample entry points.
struct ValueAndGrad {
    double value;
    LayerGrad grad;
};

ValueAndGrad value_and_param_grad(const CriticParams& params, std::span<const double> input);
Eigen::VectorXd input_grad(const CriticParams& params, std::span<const double> input);

struct PenaltyAndGrad {
    double value;
    LayerGrad grad;
    bool vanishing;
};

PenaltyAndGrad penalty_param_grad(const CriticParams& params, std::span<const double> input, double lambda);

// params += s * grad (used by optimizers and finite-difference checks).
void apply_update(CriticParams& params, const LayerGrad& grad, double s);

}  // namespace uvtomo
