#include <doctest.h>

#include <Eigen/Dense>

#include "helpers.hpp"
#include "uvtomo/baselines.hpp"
#include "uvtomo/error.hpp"
#include "uvtomo/metrics.hpp"

using namespace uvtomo;

namespace {

ProjectionSet make_set(const Image& img, const Pmf& pmf, int count, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    const AngleGrid grid(pmf.size());
    const RowMatrix all = project_all(img, grid);
    const auto angles = sample_categorical(pmf, count, rng);
    ProjectionSet set;
    set.n_theta = pmf.size();
    set.sigma = sigma;
    set.lines.resize(count, img.size());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int k = 0; k < count; ++k) {
        set.lines.row(k) = all.row(angles[static_cast<std::size_t>(k)]);
        if (sigma > 0.0)
            for (int j = 0; j < img.size(); ++j) set.lines(k, j) += sigma * normal(rng);
    }
    set.angles = angles;
    return set;
}

// Dense system matrix with rows ordered angle-major, built column by column.
Eigen::MatrixXd dense_matrix(int d, const AngleGrid& grid) {
    const Projector proj(d, grid);
    const int n = grid.size();
    Eigen::MatrixXd a(static_cast<Eigen::Index>(n) * d, static_cast<Eigen::Index>(d) * d);
    std::vector<double> e(static_cast<std::size_t>(d) * d, 0.0);
    for (int j = 0; j < d * d; ++j) {
        e[static_cast<std::size_t>(j)] = 1.0;
        const RowMatrix col = proj.forward(e);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < d; ++k) a(static_cast<Eigen::Index>(i) * d + k, j) = col(i, k);
        e[static_cast<std::size_t>(j)] = 0.0;
    }
    return a;
}

double rel_l2(std::span<const double> a, std::span<const double> b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("conjugate gradient solves an SPD system") {
    Rng rng(1);
    const int n = 20;
    Eigen::MatrixXd m = Eigen::MatrixXd::Random(n, n);
    const Eigen::MatrixXd a = m * m.transpose() + Eigen::MatrixXd::Identity(n, n);
    const auto b = testing::random_vector(n, rng);
    std::vector<double> x(n, 0.0);
    auto apply = [&](std::span<const double> v, std::span<double> out) {
        Eigen::Map<const Eigen::VectorXd> vv(v.data(), n);
        Eigen::Map<Eigen::VectorXd>(out.data(), n) = a * vv;
    };
    const int it = conjugate_gradient(apply, b, x, 200, 1e-12);
    CHECK(it <= 200);
    const Eigen::VectorXd ref = a.ldlt().solve(Eigen::Map<const Eigen::VectorXd>(b.data(), n));
    CHECK(testing::rel_err(x, std::span<const double>(ref.data(), n)) <= 1e-8);

    // Warm start at the solution does no work.
    std::vector<double> warm(ref.data(), ref.data() + n);
    CHECK(conjugate_gradient(apply, b, warm, 200, 1e-6) == 0);
}

TEST_CASE("binning requires labels") {
    ProjectionSet s = make_set(disc(8, 0.5), Pmf::uniform(4), 20, 0.0, 1);
    const BinnedData b = bin_by_angle(s);
    double total = 0.0;
    for (double c : b.counts) total += c;
    CHECK(total == 20.0);
    s.angles.reset();
    CHECK_THROWS_AS(bin_by_angle(s), InvalidArgument);
    CHECK_THROWS_AS(admm_tv(s, AdmmConfig{}), InvalidArgument);
}

TEST_CASE("isotropic TV of a step edge") {
    std::vector<double> x(16, 0.0);
    for (int r = 0; r < 4; ++r) x[static_cast<std::size_t>(r) * 4 + 3] = 2.0;
    CHECK(isotropic_tv(x, 4) == doctest::Approx(8.0));
    CHECK(isotropic_tv(std::vector<double>(16, 1.0), 4) == 0.0);
}

TEST_CASE("ADMM on zero data returns zero") {
    ProjectionSet s = make_set(disc(8, 0.5), Pmf::uniform(6), 30, 0.0, 2);
    s.lines.setZero();
    AdmmConfig cfg;
    cfg.n_iters = 20;
    const AdmmResult r = admm_tv(s, cfg);
    for (double v : r.image.pixels()) CHECK(v == 0.0);
}

TEST_CASE("ADMM without TV matches dense least squares") {
    // Enough views that the least-squares solution stays positive.
    const int d = 8, n = 32;
    Rng rng(3);
    Image img(d, testing::random_vector(static_cast<std::size_t>(d) * d, rng, 0.5, 1.0));
    const ProjectionSet s = make_set(img, Pmf::uniform(n), 2000, 0.0, 4);
    AdmmConfig cfg;
    cfg.gamma_tv = 0.0;
    cfg.n_iters = 300;
    cfg.cg_iters = 50;
    cfg.tol = 1e-12;
    const AdmmResult r = admm_tv(s, cfg);

    // Oracle: normal equations of sum_l |A_{a_l} x - y_l|^2 via dense LDLT.
    const AngleGrid grid(n);
    const Eigen::MatrixXd a = dense_matrix(d, grid);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d * d, d * d);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d * d);
    for (int l = 0; l < s.count(); ++l) {
        const auto i = static_cast<Eigen::Index>((*s.angles)[static_cast<std::size_t>(l)]);
        const auto block = a.middleRows(i * d, d);
        h += block.transpose() * block;
        rhs += block.transpose() * s.lines.row(l).transpose();
    }
    const Eigen::VectorXd ls = h.ldlt().solve(rhs);
    REQUIRE(ls.minCoeff() > 0.0);
    CHECK(rel_l2(r.image.data(), std::span<const double>(ls.data(), ls.size())) <= 1e-3);
}

TEST_CASE("ADMM objective settles and stays nonnegative") {
    const ProjectionSet s = make_set(shepp_logan(32), Pmf::uniform(30), 1500, 0.02, 5);
    AdmmConfig cfg;
    cfg.n_iters = 60;
    const AdmmResult r = admm_tv(s, cfg);
    REQUIRE(r.objective.size() == 60);
    for (std::size_t k = 6; k < r.objective.size(); ++k)
        CHECK(r.objective[k] <= r.objective[k - 1] * (1.0 + 1e-9));
    for (double v : r.image.pixels()) CHECK(v >= 0.0);
    CHECK(psnr(r.image, shepp_logan(32)) > 15.0);
}

TEST_CASE("ADMM rejects bad configuration") {
    const ProjectionSet s = make_set(disc(8, 0.5), Pmf::uniform(4), 20, 0.0, 6);
    AdmmConfig cfg;
    cfg.rho = 0.0;
    CHECK_THROWS_AS(admm_tv(s, cfg), InvalidArgument);
}

TEST_CASE("E-step responsibilities") {
    const int d = 16, n = 12;
    const Image img = random_blobs(d, 7);
    const AngleGrid grid(n);
    const RowMatrix proj = project_all(img, grid);
    const ProjectionSet s = make_set(img, Pmf::uniform(n), 200, 0.0, 8);

    const EStep e = em_expectation(s.lines, proj, Pmf::uniform(n), 0.5);
    for (Eigen::Index l = 0; l < e.responsibilities.rows(); ++l) {
        CHECK(std::abs(e.responsibilities.row(l).sum() - 1.0) <= 1e-12);
        CHECK(e.responsibilities.row(l).minCoeff() >= 0.0);
    }

    // Small sigma concentrates each row on the generating bin.
    const EStep sharp = em_expectation(s.lines, proj, Pmf::uniform(n), 1e-4);
    for (Eigen::Index l = 0; l < sharp.responsibilities.rows(); ++l) {
        Eigen::Index arg;
        const double top = sharp.responsibilities.row(l).maxCoeff(&arg);
        CHECK(top > 1.0 - 1e-9);
        CHECK(arg == static_cast<Eigen::Index>((*s.angles)[static_cast<std::size_t>(l)]));
    }

    // Zero-probability bins get zero responsibility.
    std::vector<double> w(static_cast<std::size_t>(n), 1.0);
    w[0] = 0.0;
    const EStep masked = em_expectation(s.lines, proj, Pmf::normalized(w), 0.5);
    for (Eigen::Index l = 0; l < masked.responsibilities.rows(); ++l) CHECK(masked.responsibilities(l, 0) == 0.0);

    CHECK_THROWS_AS(em_expectation(s.lines, proj, Pmf::uniform(n), 1e-300), NumericalError);
}

TEST_CASE("EM keeps the truth as a fixed point") {
    const int d = 32, n = 32;
    const Image img = random_blobs(d, 9);
    const ProjectionSet s = make_set(img, Pmf::uniform(n), 2000, 0.0, 10);
    EmConfig cfg;
    cfg.n_iters = 5;
    cfg.sigma = 0.01;
    cfg.init = EmInit::lowpass_gt;
    cfg.lowpass_sigma_px = 1e-9;
    cfg.update_pmf = false;
    const EmResult r = em_reconstruct(s, AngleGrid(n), cfg, &img);
    CHECK(r.initial_image == img);
    CHECK(rel_l2(r.image.data(), img.data()) <= 1e-2);
}

TEST_CASE("EM likelihood never decreases") {
    const int d = 24, n = 30;
    const Image img = shepp_logan(d);
    Rng rng(11);
    const Pmf p = random_piecewise_pmf(n, 4, rng);
    const ProjectionSet s = make_set(img, p, 1500, 0.05, 12);
    EmConfig cfg;
    cfg.n_iters = 10;
    cfg.sigma = 0.1;
    cfg.init = EmInit::random;
    const EmResult r = em_reconstruct(s, AngleGrid(n), cfg);
    REQUIRE(r.log_likelihood.size() == 11);
    for (std::size_t k = 1; k < r.log_likelihood.size(); ++k)
        CHECK(r.log_likelihood[k] >= r.log_likelihood[k - 1] - 1e-9 * std::abs(r.log_likelihood[k - 1]));
    for (std::size_t k = 0; k < r.expected_ll_after.size(); ++k)
        CHECK(r.expected_ll_after[k] >= r.expected_ll_before[k] - 1e-9 * std::abs(r.expected_ll_before[k]));
    double sum = 0.0;
    for (double v : r.pmf.probs()) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    for (double v : r.image.pixels()) CHECK(v >= 0.0);
}

TEST_CASE("EM from a lowpass start beats a random start") {
    const int d = 32, n = 60;
    const Image img = shepp_logan(d);
    Rng rng(13);
    const Pmf p = random_piecewise_pmf(n, 5, rng);
    const ProjectionSet s = make_set(img, p, 3000, 0.0, 14);
    EmConfig cfg;
    cfg.n_iters = 15;
    cfg.init = EmInit::lowpass_gt;
    const double cc_low = cc(em_reconstruct(s, AngleGrid(n), cfg, &img).image, img);
    cfg.init = EmInit::random;
    const double cc_rand = cc(em_reconstruct(s, AngleGrid(n), cfg).image, img);
    MESSAGE("lowpass cc " << cc_low << ", random cc " << cc_rand);
    CHECK(cc_low > cc_rand);
}

TEST_CASE("EM inputs and determinism") {
    const ProjectionSet s = make_set(disc(16, 0.5), Pmf::uniform(8), 100, 0.0, 15);
    EmConfig cfg;
    cfg.n_iters = 3;
    cfg.seed = 5;
    const EmResult a = em_reconstruct(s, AngleGrid(8), cfg);
    const EmResult b = em_reconstruct(s, AngleGrid(8), cfg);
    CHECK(a.image == b.image);
    CHECK(a.pmf.probs() == b.pmf.probs());
    CHECK_THROWS_AS(em_reconstruct(s, AngleGrid(9), cfg), InvalidArgument);
    cfg.init = EmInit::lowpass_gt;
    CHECK_THROWS_AS(em_reconstruct(s, AngleGrid(8), cfg), InvalidArgument);
    cfg.init = EmInit::random;
    cfg.sigma = 0.0;
    CHECK_THROWS_AS(em_reconstruct(s, AngleGrid(8), cfg), InvalidArgument);
    CHECK(parse_em_init("fbp_uniform") == EmInit::fbp_uniform);
    CHECK(to_string(EmInit::lowpass_gt) == "lowpass_gt");
    CHECK_THROWS_AS(parse_em_init("x"), InvalidArgument);
}
