#include <doctest.h>

#include "helpers.hpp"
#include "uvtomo/critic.hpp"
#include "uvtomo/diff.hpp"
#include "uvtomo/error.hpp"

using namespace uvtomo;

namespace {

// Visits every scalar parameter as a reference.
template <class F>
void for_each_param(CriticParams& p, F&& f) {
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        auto& w = p.layers[k].weight;
        for (Eigen::Index i = 0; i < w.size(); ++i) f(w.data()[i], k, false, i);
        auto& b = p.layers[k].bias;
        for (Eigen::Index i = 0; i < b.size(); ++i) f(b.data()[i], k, true, i);
    }
}

double grad_entry(const LayerGrad& g, std::size_t k, bool bias, Eigen::Index i) {
    return bias ? g.bias[k].data()[i] : g.weight[k].data()[i];
}

// Random critic with positive biases so few units sit near the ReLU kink.
CriticParams random_critic(std::vector<int> arch, int d, Rng& rng) {
    CriticParams p = init_critic(arch, d, rng);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (auto& l : p.layers)
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = u(rng);
    return p;
}

}  // namespace

TEST_CASE("zero network has zero value and only the output bias gradient") {
    const CriticParams p = zero_critic(std::vector<int>{8, 4, 1}, 5);
    const std::vector<double> x{1, 2, 3, 4, 5};
    const auto vg = value_and_param_grad(p, x);
    CHECK(vg.value == 0.0);
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        CHECK(vg.grad.weight[k].isZero(0.0));
        if (k + 1 < p.layers.size()) CHECK(vg.grad.bias[k].isZero(0.0));
    }
    CHECK(vg.grad.bias.back()(0) == 1.0);
    CHECK(input_grad(p, x).isZero(0.0));
}

TEST_CASE("single linear layer") {
    Rng rng(1);
    CriticParams p = init_critic(std::vector<int>{1}, 6, rng);
    p.layers[0].bias(0) = 0.3;
    const auto x = testing::random_vector(6, rng);
    const Eigen::VectorXd w = p.layers[0].weight.row(0).transpose();
    const auto vg = value_and_param_grad(p, x);
    CHECK(vg.value == doctest::Approx(w.dot(Eigen::Map<const Eigen::VectorXd>(x.data(), 6)) + 0.3).epsilon(1e-14));
    for (int i = 0; i < 6; ++i) CHECK(vg.grad.weight[0](0, i) == x[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd g = input_grad(p, x);
    for (int i = 0; i < 6; ++i) CHECK(g(i) == w(i));
    const Eigen::VectorXd g2 = input_grad(p, testing::random_vector(6, rng));
    CHECK(g2 == g);
}

TEST_CASE("parameter gradients match central differences") {
    Rng rng(2);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        CriticParams p = random_critic({10, 7, 1}, 32, rng);
        const auto x = testing::random_vector(32, rng);
        const auto vg = value_and_param_grad(p, x);
        CHECK(vg.value == doctest::Approx(forward(p, x)).epsilon(1e-13));
        for_each_param(p, [&](double& v, std::size_t k, bool bias, Eigen::Index i) {
            const double saved = v;
            v = saved + 1e-5;
            const double fp = forward(p, x);
            v = saved - 1e-5;
            const double fm = forward(p, x);
            v = saved;
            const double fd = (fp - fm) / 2e-5;
            const double an = grad_entry(vg.grad, k, bias, i);
            const double scale = std::max(std::abs(an), 1e-3);
            worst = std::max(worst, std::abs(an - fd) / scale);
        });
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("input gradients match central differences") {
    Rng rng(3);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const CriticParams p = random_critic({12, 6, 1}, 32, rng);
        auto x = testing::random_vector(32, rng);
        const Eigen::VectorXd g = input_grad(p, x);
        for (int i = 0; i < 32; ++i) {
            const double saved = x[static_cast<std::size_t>(i)];
            x[static_cast<std::size_t>(i)] = saved + 1e-5;
            const double fp = forward(p, x);
            x[static_cast<std::size_t>(i)] = saved - 1e-5;
            const double fm = forward(p, x);
            x[static_cast<std::size_t>(i)] = saved;
            const double fd = (fp - fm) / 2e-5;
            worst = std::max(worst, std::abs(g(i) - fd) / std::max(std::abs(g(i)), 1e-3));
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("penalty of a linear critic has its closed form") {
    Rng rng(4);
    CriticParams p = init_critic(std::vector<int>{1}, 8, rng);
    const Eigen::VectorXd w = p.layers[0].weight.row(0).transpose();
    const double n = w.norm();
    const double lambda = 10.0;
    const auto pg = penalty_param_grad(p, testing::random_vector(8, rng), lambda);
    CHECK(pg.value == doctest::Approx(lambda * (n - 1) * (n - 1)).epsilon(1e-13));
    CHECK_FALSE(pg.vanishing);
    for (int i = 0; i < 8; ++i)
        CHECK(pg.grad.weight[0](0, i) == doctest::Approx(2 * lambda * (n - 1) * w(i) / n).epsilon(1e-12));
    CHECK(pg.grad.bias[0](0) == 0.0);
}

TEST_CASE("penalty vanishes at unit input-gradient norm") {
    Rng rng(5);
    CriticParams p = init_critic(std::vector<int>{1}, 8, rng);
    p.layers[0].weight /= p.layers[0].weight.norm();
    const auto pg = penalty_param_grad(p, testing::random_vector(8, rng), 10.0);
    CHECK(std::abs(pg.value) <= 1e-28);
    CHECK(std::sqrt(pg.grad.squared_norm()) <= 1e-12);
}

TEST_CASE("penalty parameter gradient matches finite differences of the penalty") {
    Rng rng(6);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        CriticParams p = random_critic({9, 5, 1}, 32, rng);
        const auto x = testing::random_vector(32, rng);
        const double lambda = 10.0;
        const auto pg = penalty_param_grad(p, x, lambda);
        auto pen = [&] {
            const double n = input_grad(p, x).norm();
            return lambda * (n - 1) * (n - 1);
        };
        CHECK(pg.value == doctest::Approx(pen()).epsilon(1e-12));
        for_each_param(p, [&](double& v, std::size_t k, bool bias, Eigen::Index i) {
            const double saved = v;
            v = saved + 1e-5;
            const double fp = pen();
            v = saved - 1e-5;
            const double fm = pen();
            v = saved;
            const double fd = (fp - fm) / 2e-5;
            const double an = grad_entry(pg.grad, k, bias, i);
            worst = std::max(worst, std::abs(an - fd) / std::max(std::abs(an), 1e-2));
        });
    }
    CHECK(worst <= 1e-3);
}

TEST_CASE("batched penalty equals the sum of single-sample penalties") {
    Rng rng(7);
    const CriticParams p = random_critic({6, 4, 1}, 10, rng);
    Eigen::MatrixXd x(10, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = std::uniform_real_distribution<double>(-1, 1)(rng);
    LayerGrad g = LayerGrad::zeros_like(p);
    const PenaltyResult r = penalty_batch(p, x, 3.0, g);
    LayerGrad want = LayerGrad::zeros_like(p);
    double value = 0.0;
    for (int b = 0; b < 5; ++b) {
        std::vector<double> col(x.col(b).data(), x.col(b).data() + 10);
        const auto s = penalty_param_grad(p, col, 3.0);
        value += s.value;
        want.add(s.grad);
    }
    CHECK(r.value == doctest::Approx(value).epsilon(1e-12));
    LayerGrad diff = g;
    diff.add(want, -1.0);
    CHECK(std::sqrt(diff.squared_norm()) <= 1e-12 * std::max(1.0, std::sqrt(want.squared_norm())));
}

TEST_CASE("vanishing input gradient is flagged and contributes no gradient") {
    const CriticParams p = zero_critic(std::vector<int>{4, 1}, 3);
    const auto pg = penalty_param_grad(p, std::vector<double>{1, 2, 3}, 10.0);
    CHECK(pg.vanishing);
    CHECK(pg.value == doctest::Approx(10.0));
    CHECK(pg.grad.squared_norm() == 0.0);
}

TEST_CASE("relu derivative at zero is zero") {
    // Hidden unit pre-activation is exactly zero for this input.
    CriticParams p = zero_critic(std::vector<int>{1, 1}, 2);
    p.layers[0].weight << 1.0, -1.0;
    p.layers[1].weight << 2.0;
    const std::vector<double> x{0.5, 0.5};
    const auto vg = value_and_param_grad(p, x);
    CHECK(vg.value == 0.0);
    CHECK(vg.grad.weight[0].isZero(0.0));
    CHECK(input_grad(p, x).isZero(0.0));
}

TEST_CASE("gradients are deterministic") {
    Rng rng(8);
    const CriticParams p = random_critic({16, 8, 1}, 20, rng);
    const auto x = testing::random_vector(20, rng);
    const auto a = penalty_param_grad(p, x, 10.0), b = penalty_param_grad(p, x, 10.0);
    CHECK(a.value == b.value);
    for (std::size_t k = 0; k < a.grad.weight.size(); ++k) CHECK(a.grad.weight[k] == b.grad.weight[k]);
    CHECK(value_and_param_grad(p, x).grad.weight[0] == value_and_param_grad(p, x).grad.weight[0]);
}

TEST_CASE("shape mismatch is rejected") {
    Rng rng(9);
    const CriticParams p = init_critic(std::vector<int>{4, 1}, 6, rng);
    CHECK_THROWS_AS(value_and_param_grad(p, std::vector<double>(5)), InvalidArgument);
    CHECK_THROWS_AS(input_grad(p, std::vector<double>(7)), InvalidArgument);
}
