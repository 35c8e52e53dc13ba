#include <doctest.h>

#include <fstream>

#include <numbers>

#include "helpers.hpp"
#include "uvtomo/angledist.hpp"
#include "uvtomo/error.hpp"

using namespace uvtomo;

namespace {

Pmf random_pmf(int n, Rng& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> w(static_cast<std::size_t>(n));
    for (auto& v : w) v = u(rng);
    return Pmf::normalized(w);
}

}  // namespace

TEST_CASE("pmf construction validates the simplex") {
    CHECK_NOTHROW(Pmf({0.25, 0.25, 0.5}));
    CHECK_THROWS_AS(Pmf({0.5, 0.6}), InvalidArgument);
    CHECK_THROWS_AS(Pmf({1.2, -0.2}), InvalidArgument);
    CHECK_THROWS_AS(Pmf(std::vector<double>{}), InvalidArgument);
    const Pmf u = Pmf::uniform(4);
    for (int i = 0; i < 4; ++i) CHECK(u[i] == 0.25);
}

TEST_CASE("softmax of equal logits is uniform") {
    const Pmf p = softmax_pmf({std::vector<double>(7, 3.3)});
    for (int i = 0; i < 7; ++i) CHECK(p[i] == doctest::Approx(1.0 / 7).epsilon(1e-14));
}

TEST_CASE("softmax inverts log on the simplex and is shift invariant") {
    Rng rng(1);
    const Pmf p = random_pmf(20, rng);
    PmfLogits l;
    for (double v : p.probs()) l.logits.push_back(std::log(v));
    const Pmf q = softmax_pmf(l);
    for (int i = 0; i < 20; ++i) CHECK(std::abs(q[i] - p[i]) <= 1e-12);

    PmfLogits shifted = l;
    for (auto& v : shifted.logits) v += 123.0;
    const Pmf s = softmax_pmf(shifted);
    for (int i = 0; i < 20; ++i) CHECK(std::abs(s[i] - q[i]) <= 1e-12);
}

TEST_CASE("softmax_backward matches finite differences") {
    Rng rng(2);
    PmfLogits l{testing::random_vector(9, rng)};
    const auto c = testing::random_vector(9, rng);
    auto f = [&](const PmfLogits& x) { return testing::dot(softmax_pmf(x).probs(), c); };
    const auto g = softmax_backward(softmax_pmf(l), c);
    for (int i = 0; i < 9; ++i) {
        PmfLogits a = l, b = l;
        a.logits[static_cast<std::size_t>(i)] += 1e-6;
        b.logits[static_cast<std::size_t>(i)] -= 1e-6;
        CHECK(g[static_cast<std::size_t>(i)] == doctest::Approx((f(a) - f(b)) / 2e-6).epsilon(1e-6));
    }
}

TEST_CASE("gumbel inverse cdf closed forms") {
    CHECK(std::abs(gumbel_from_uniform(1.0 / std::numbers::e)) <= 1e-15);
    CHECK(gumbel_from_uniform(std::exp(-std::numbers::e)) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(std::isfinite(gumbel_from_uniform(0.0)));
    CHECK(std::isfinite(gumbel_from_uniform(1.0)));
}

TEST_CASE("gumbel sample mean is the Euler-Mascheroni constant") {
    Rng rng(3);
    const Eigen::MatrixXd g = sample_gumbel(1000, 1000, rng);
    CHECK(std::abs(g.mean() - 0.5772156649) <= 0.01);
}

TEST_CASE("gumbel softmax rows are on the simplex") {
    Rng rng(4);
    const Pmf p = random_pmf(30, rng);
    const GumbelWeights r = gumbel_softmax(p, 0.5, 64, rng);
    CHECK(r.weights.rows() == 64);
    for (Eigen::Index b = 0; b < 64; ++b) {
        CHECK(std::abs(r.weights.row(b).sum() - 1.0) <= 1e-9);
        CHECK(r.weights.row(b).minCoeff() > 0.0);
        CHECK(r.weights.row(b).maxCoeff() < 1.0);
    }
}

TEST_CASE("zero gumbels at unit temperature reproduce p") {
    Rng rng(5);
    const Pmf p = random_pmf(64, rng);
    const GumbelWeights r = gumbel_softmax_with_noise(p, 1.0, Eigen::MatrixXd::Zero(3, 64));
    for (Eigen::Index b = 0; b < 3; ++b)
        for (int i = 0; i < 64; ++i) CHECK(std::abs(r.weights(b, i) - p[i]) <= 1e-12);
}

TEST_CASE("low temperature gives one-hot rows at the perturbed argmax") {
    Rng rng(6);
    const Pmf p = random_pmf(40, rng);
    const Eigen::MatrixXd g = sample_gumbel(50, 40, rng);
    const GumbelWeights r = gumbel_softmax_with_noise(p, 1e-4, g);
    for (Eigen::Index b = 0; b < 50; ++b) {
        int best = 0;
        for (int i = 1; i < 40; ++i)
            if (g(b, i) + std::log(p[i]) > g(b, best) + std::log(p[best])) best = i;
        Eigen::Index arg = 0;
        CHECK(r.weights.row(b).maxCoeff(&arg) > 0.999);
        CHECK(arg == best);
    }
}

TEST_CASE("high temperature flattens rows") {
    Rng rng(7);
    const Pmf p = random_pmf(25, rng);
    const GumbelWeights r = gumbel_softmax(p, 1e6, 10, rng);
    for (Eigen::Index i = 0; i < r.weights.size(); ++i) CHECK(std::abs(r.weights.data()[i] - 1.0 / 25) <= 1e-6);
}

TEST_CASE("gumbel softmax gradient with respect to log p matches finite differences") {
    Rng rng(8);
    const int n = 12;
    const Pmf p = random_pmf(n, rng);
    const Eigen::MatrixXd g = sample_gumbel(3, n, rng);
    Eigen::MatrixXd c(3, n);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = std::uniform_real_distribution<double>(-1, 1)(rng);
    const double tau = 0.7;
    // f(log p) = sum c .* r, with log p perturbed directly (no renormalization).
    auto f = [&](const std::vector<double>& logp) {
        double s = 0.0;
        for (int b = 0; b < 3; ++b) {
            std::vector<double> a(n);
            double m = -1e300;
            for (int i = 0; i < n; ++i) m = std::max(m, a[i] = (g(b, i) + logp[i]) / tau);
            double z = 0.0;
            for (int i = 0; i < n; ++i) z += std::exp(a[i] - m);
            for (int i = 0; i < n; ++i) s += c(b, i) * std::exp(a[i] - m) / z;
        }
        return s;
    };
    const GumbelWeights r = gumbel_softmax_with_noise(p, tau, g);
    const auto dp = gumbel_softmax_backward(p, r, c);
    std::vector<double> logp(n);
    for (int i = 0; i < n; ++i) logp[i] = std::log(p[i] + kLogFloor);
    for (int i = 0; i < n; ++i) {
        auto a = logp, b = logp;
        a[i] += 1e-6;
        b[i] -= 1e-6;
        const double fd = (f(a) - f(b)) / 2e-6;
        // d/dlog p = (p + eps) d/dp
        const double analytic = dp[static_cast<std::size_t>(i)] * (p[i] + kLogFloor);
        CHECK(testing::rel_err(analytic, fd, 1e-8) <= 1e-5);
    }
}

TEST_CASE("mean relaxed sample approximates p at low temperature") {
    Rng rng(9);
    const Pmf p = random_pmf(10, rng);
    const GumbelWeights r = gumbel_softmax(p, 0.1, 100000, rng);
    const Eigen::RowVectorXd mean = r.weights.colwise().mean();
    double l1 = 0.0;
    for (int i = 0; i < 10; ++i) l1 += std::abs(mean(i) - p[i]);
    CHECK(l1 <= 0.05);
}

TEST_CASE("categorical sampling") {
    Rng rng(10);
    SUBCASE("one-hot") {
        for (auto k : sample_categorical(Pmf::one_hot(9, 4), 1000, rng)) CHECK(k == 4u);
    }
    SUBCASE("uniform histogram") {
        const auto idx = sample_categorical(Pmf::uniform(120), 1000000, rng);
        std::vector<int> h(120, 0);
        for (auto k : idx) ++h[k];
        for (int c : h) CHECK(std::abs(c / 1e6 - 1.0 / 120) <= 0.005);
    }
    SUBCASE("zero bins never drawn") {
        const Pmf p({0.3, 0.0, 0.7, 0.0});
        for (auto k : sample_categorical(p, 100000, rng)) CHECK((k == 0u || k == 2u));
    }
}

TEST_CASE("tv distance") {
    Rng rng(11);
    const Pmf p = random_pmf(15, rng), q = random_pmf(15, rng), r = random_pmf(15, rng);
    CHECK(tv_distance(p, p) == 0.0);
    CHECK(tv_distance(p, q) > 0.0);
    CHECK(tv_distance(p, q) == tv_distance(q, p));
    CHECK(tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-15);
    CHECK(tv_distance(Pmf::one_hot(120, 3), Pmf::uniform(120)) == doctest::Approx(119.0 / 120).epsilon(1e-14));
    CHECK_THROWS_AS(tv_distance(Pmf::uniform(3), Pmf::uniform(4)), InvalidArgument);
}

TEST_CASE("random piecewise pmf") {
    Rng a(12), b(12);
    const Pmf p = random_piecewise_pmf(120, 6, a);
    double s = 0.0;
    for (double v : p.probs()) {
        CHECK(v > 0.0);
        s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
    CHECK(p.probs() == random_piecewise_pmf(120, 6, b).probs());
    const Pmf u = random_piecewise_pmf(50, 1, a);
    for (int i = 0; i < 50; ++i) CHECK(u[i] == doctest::Approx(0.02).epsilon(1e-14));
    CHECK_THROWS_AS(random_piecewise_pmf(10, 0, a), InvalidArgument);
    CHECK_THROWS_AS(random_piecewise_pmf(10, 11, a), InvalidArgument);
}

TEST_CASE("shift and flip are index permutations") {
    const Pmf p({0.1, 0.2, 0.3, 0.4});
    const Pmf s = shift_pmf(p, 1);
    CHECK(s.probs() == std::vector<double>{0.4, 0.1, 0.2, 0.3});
    CHECK(shift_pmf(p, -1).probs() == std::vector<double>{0.2, 0.3, 0.4, 0.1});
    CHECK(shift_pmf(p, 4).probs() == p.probs());
    CHECK(flip_pmf(p).probs() == std::vector<double>{0.4, 0.3, 0.2, 0.1});
}

TEST_CASE("pmf csv round trip") {
    const auto dir = testing::temp_dir("pmf_csv");
    Rng rng(13);
    const Pmf p = random_piecewise_pmf(33, 4, rng);
    save_pmf_csv(p, dir / "p.csv");
    const Pmf q = load_pmf_csv(dir / "p.csv");
    REQUIRE(q.size() == 33);
    for (int i = 0; i < 33; ++i) CHECK(q[i] == doctest::Approx(p[i]).epsilon(1e-12));
    std::ifstream in(dir / "p.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "bin_index,probability");
}
