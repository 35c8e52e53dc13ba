#include "uvtomo/diff.hpp"

#include <cmath>

#include "uvtomo/error.hpp"

namespace uvtomo {

LayerGrad LayerGrad::zeros_like(const CriticParams& params) {
    LayerGrad g;
    for (const auto& l : params.layers) {
        g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
        g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    return g;
}

double LayerGrad::squared_norm() const {
    double s = 0.0;
    for (std::size_t k = 0; k < weight.size(); ++k) s += weight[k].squaredNorm() + bias[k].squaredNorm();
    return s;
}

void LayerGrad::scale(double s) {
    for (std::size_t k = 0; k < weight.size(); ++k) {
        weight[k] *= s;
        bias[k] *= s;
    }
}

void LayerGrad::add(const LayerGrad& other, double s) {
    for (std::size_t k = 0; k < weight.size(); ++k) {
        weight[k] += s * other.weight[k];
        bias[k] += s * other.bias[k];
    }
}

bool LayerGrad::all_finite() const {
    for (std::size_t k = 0; k < weight.size(); ++k)
        if (!weight[k].allFinite() || !bias[k].allFinite()) return false;
    return true;
}

ForwardTrace forward_trace(const CriticParams& params, const Eigen::MatrixXd& x) {
    if (x.rows() != params.input_size()) throw InvalidArgument("critic: input width mismatch");
    ForwardTrace t;
    t.inputs.reserve(params.layers.size());
    t.inputs.push_back(x);
    const std::size_t last = params.layers.size() - 1;
    for (std::size_t k = 0; k < last; ++k) {
        Eigen::MatrixXd z = params.layers[k].weight * t.inputs.back();
        z.colwise() += params.layers[k].bias;
        t.inputs.push_back(z.cwiseMax(0.0));
    }
    Eigen::MatrixXd z = params.layers[last].weight * t.inputs.back();
    z.colwise() += params.layers[last].bias;
    t.output = z.row(0);
    return t;
}

namespace {

// Zero the cotangent where the ReLU was inactive (ReLU'(0) = 0).
void apply_mask(Eigen::MatrixXd& delta, const Eigen::MatrixXd& activation) {
    delta = (activation.array() > 0.0).select(delta, 0.0);
}

}  // namespace

Eigen::MatrixXd backward(const CriticParams& params, const ForwardTrace& trace, const Eigen::RowVectorXd& upstream,
                         LayerGrad* grad) {
    const std::size_t n_layers = params.layers.size();
    Eigen::MatrixXd delta = upstream;
    for (std::size_t k = n_layers; k-- > 0;) {
        if (grad) {
            grad->weight[k].noalias() += delta * trace.inputs[k].transpose();
            grad->bias[k] += delta.rowwise().sum();
        }
        Eigen::MatrixXd prev = params.layers[k].weight.transpose() * delta;
        if (k > 0) apply_mask(prev, trace.inputs[k]);
        delta = std::move(prev);
    }
    return delta;
}

PenaltyResult penalty_batch(const CriticParams& params, const Eigen::MatrixXd& x, double lambda, LayerGrad& grad) {
    const std::size_t n_layers = params.layers.size();
    const Eigen::Index n = x.cols();
    const ForwardTrace trace = forward_trace(params, x);

    // Backward pass with unit upstream, keeping the masked cotangents beta_k
    // at every layer output.
    std::vector<Eigen::MatrixXd> beta(n_layers);
    beta[n_layers - 1] = Eigen::MatrixXd::Ones(1, n);
    for (std::size_t k = n_layers - 1; k > 0; --k) {
        Eigen::MatrixXd prev = params.layers[k].weight.transpose() * beta[k];
        apply_mask(prev, trace.inputs[k]);
        beta[k - 1] = std::move(prev);
    }
    const Eigen::MatrixXd g = params.layers[0].weight.transpose() * beta[0];

    PenaltyResult result;
    result.grad_norms = g.colwise().norm().transpose();
    Eigen::RowVectorXd coeff(n);
    for (Eigen::Index b = 0; b < n; ++b) {
        const double norm = result.grad_norms(b);
        result.value += lambda * (norm - 1.0) * (norm - 1.0);
        if (norm <= kPenaltyNormFloor) {
            coeff(b) = 0.0;
            ++result.vanishing;
        } else {
            coeff(b) = 2.0 * lambda * (norm - 1.0) / norm;
        }
    }

    // d<g, v>/dW_k with v = coeff * g frozen: forward v through the
    // mask-frozen linear network (h), pair with beta.
    Eigen::MatrixXd h = g.array().rowwise() * coeff.array();
    for (std::size_t k = 0; k < n_layers; ++k) {
        grad.weight[k].noalias() += beta[k] * h.transpose();
        if (k + 1 < n_layers) {
            Eigen::MatrixXd next = params.layers[k].weight * h;
            apply_mask(next, trace.inputs[k + 1]);
            h = std::move(next);
        }
    }
    return result;
}

namespace {

Eigen::MatrixXd as_column(const CriticParams& params, std::span<const double> input) {
    if (static_cast<int>(input.size()) != params.input_size()) throw InvalidArgument("critic: input width mismatch");
    return Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
}

}  // namespace

ValueAndGrad value_and_param_grad(const CriticParams& params, std::span<const double> input) {
    const auto trace = forward_trace(params, as_column(params, input));
    ValueAndGrad out{trace.output(0), LayerGrad::zeros_like(params)};
    backward(params, trace, Eigen::RowVectorXd::Ones(1), &out.grad);
    return out;
}

Eigen::VectorXd input_grad(const CriticParams& params, std::span<const double> input) {
    const auto trace = forward_trace(params, as_column(params, input));
    return backward(params, trace, Eigen::RowVectorXd::Ones(1), nullptr).col(0);
}

PenaltyAndGrad penalty_param_grad(const CriticParams& params, std::span<const double> input, double lambda) {
    PenaltyAndGrad out{0.0, LayerGrad::zeros_like(params), false};
    const auto r = penalty_batch(params, as_column(params, input), lambda, out.grad);
    out.value = r.value;
    out.vanishing = r.vanishing > 0;
    return out;
}

void apply_update(CriticParams& params, const LayerGrad& grad, double s) {
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        params.layers[k].weight += s * grad.weight[k];
        params.layers[k].bias += s * grad.bias[k];
    }
}

}  // namespace uvtomo
