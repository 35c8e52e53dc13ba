#include "uvtomo/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "uvtomo/error.hpp"

namespace uvtomo {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Forward differences, zero past the border. g has 2 d^2 entries: dx then dy.
void gradient(std::span<const double> x, int d, std::span<double> g) {
    const std::size_t n = static_cast<std::size_t>(d) * d;
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * d + c;
            g[i] = c + 1 < d ? x[i + 1] - x[i] : 0.0;
            g[n + i] = r + 1 < d ? x[i + static_cast<std::size_t>(d)] - x[i] : 0.0;
        }
}

// Adjoint of gradient().
void gradient_adjoint(std::span<const double> g, int d, std::span<double> x) {
    const std::size_t n = static_cast<std::size_t>(d) * d;
    std::fill(x.begin(), x.end(), 0.0);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * d + c;
            if (c + 1 < d) {
                x[i + 1] += g[i];
                x[i] -= g[i];
            }
            if (r + 1 < d) {
                x[i + static_cast<std::size_t>(d)] += g[n + i];
                x[i] -= g[n + i];
            }
        }
}

// 0.5 |A x - y|^2 from binned data.
double data_misfit(const Projector& proj, const BinnedData& bins, std::span<const double> x) {
    const int d = proj.image_size();
    std::vector<double> line(static_cast<std::size_t>(d));
    double total = bins.sum_squares;
    for (int i = 0; i < proj.n_angles(); ++i) {
        if (bins.counts[static_cast<std::size_t>(i)] == 0.0) continue;
        proj.forward_angle(x, i, line);
        double sq = 0.0, cross = 0.0;
        for (int k = 0; k < d; ++k) {
            sq += line[static_cast<std::size_t>(k)] * line[static_cast<std::size_t>(k)];
            cross += line[static_cast<std::size_t>(k)] * bins.sums(i, k);
        }
        total += bins.counts[static_cast<std::size_t>(i)] * sq - 2.0 * cross;
    }
    return 0.5 * std::max(total, 0.0);
}

std::vector<double> backproject_sums(const Projector& proj, const RowMatrix& sums) {
    std::vector<double> out(static_cast<std::size_t>(proj.image_size()) * proj.image_size());
    proj.adjoint(std::span<const double>(sums.data(), static_cast<std::size_t>(sums.size())), out);
    return out;
}

}  // namespace

int conjugate_gradient(const std::function<void(std::span<const double>, std::span<double>)>& apply,
                       std::span<const double> rhs, std::span<double> x, int max_iters, double tol) {
    const std::size_t n = rhs.size();
    std::vector<double> r(n), p(n), ap(n);
    apply(x, ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ap[i];
    p = r;
    double rr = dot(r, r);
    const double stop = tol * tol * std::max(dot(rhs, rhs), std::numeric_limits<double>::min());
    int it = 0;
    for (; it < max_iters && rr > stop; ++it) {
        apply(p, ap);
        const double pap = dot(p, ap);
        if (!(pap > 0.0)) break;
        const double alpha = rr / pap;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        const double rr_new = dot(r, r);
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    return it;
}

BinnedData bin_by_angle(const ProjectionSet& sino) {
    if (!sino.angles) throw InvalidArgument("known-angle reconstruction requires angle labels");
    sino.validate();
    BinnedData b;
    b.sums = RowMatrix::Zero(sino.n_theta, sino.width());
    b.counts.assign(static_cast<std::size_t>(sino.n_theta), 0.0);
    for (int l = 0; l < sino.count(); ++l) {
        const auto a = (*sino.angles)[static_cast<std::size_t>(l)];
        b.sums.row(a) += sino.lines.row(l);
        b.counts[a] += 1.0;
    }
    b.sum_squares = sino.lines.squaredNorm();
    return b;
}

double isotropic_tv(std::span<const double> x, int d) {
    const std::size_t n = static_cast<std::size_t>(d) * d;
    std::vector<double> g(2 * n);
    gradient(x, d, g);
    double tv = 0.0;
    for (std::size_t i = 0; i < n; ++i) tv += std::hypot(g[i], g[n + i]);
    return tv;
}

AdmmResult admm_tv(const ProjectionSet& sino, const AdmmConfig& cfg) {
    if (!(cfg.gamma_tv >= 0.0) || !(cfg.rho > 0.0) || cfg.n_iters <= 0 || cfg.cg_iters <= 0 || !(cfg.tol > 0.0))
        throw InvalidArgument("invalid ADMM configuration");
    const BinnedData bins = bin_by_angle(sino);
    const int d = sino.width();
    const std::size_t n = static_cast<std::size_t>(d) * d;
    const Projector proj(d, AngleGrid(sino.n_theta));
    const std::vector<double> aty = backproject_sums(proj, bins.sums);

    // Splits z = grad x and w = x with w >= 0; u, v are the scaled duals.
    std::vector<double> x(n, 0.0), w(n, 0.0), v(n, 0.0), z(2 * n, 0.0), u(2 * n, 0.0), gx(2 * n), rhs(n), tmp(n),
        tmp2(n);
    auto apply = [&](std::span<const double> in, std::span<double> out) {
        proj.normal(in, bins.counts, out);
        std::vector<double> g(2 * n);
        gradient(in, d, g);
        gradient_adjoint(g, d, tmp2);
        for (std::size_t i = 0; i < n; ++i) out[i] += cfg.rho * (tmp2[i] + in[i]);
    };

    AdmmResult res;
    int increases = 0;
    const double thresh = cfg.gamma_tv / cfg.rho;
    for (int it = 0; it < cfg.n_iters; ++it) {
        std::vector<double> zu(2 * n);
        for (std::size_t i = 0; i < 2 * n; ++i) zu[i] = z[i] - u[i];
        gradient_adjoint(zu, d, tmp);
        for (std::size_t i = 0; i < n; ++i) rhs[i] = aty[i] + cfg.rho * (tmp[i] + w[i] - v[i]);
        const std::vector<double> w_prev = w;
        conjugate_gradient(apply, rhs, x, cfg.cg_iters, 1e-12);

        gradient(x, d, gx);
        for (std::size_t i = 0; i < n; ++i) {
            const double vx = gx[i] + u[i], vy = gx[n + i] + u[n + i];
            const double mag = std::hypot(vx, vy);
            const double shrink = mag > thresh ? 1.0 - thresh / mag : 0.0;
            z[i] = shrink * vx;
            z[n + i] = shrink * vy;
        }
        for (std::size_t i = 0; i < n; ++i) w[i] = std::max(x[i] + v[i], 0.0);
        for (std::size_t i = 0; i < 2 * n; ++i) u[i] += gx[i] - z[i];
        for (std::size_t i = 0; i < n; ++i) v[i] += x[i] - w[i];

        // The objective is tracked on the feasible iterate w.
        const double obj = data_misfit(proj, bins, w) + cfg.gamma_tv * isotropic_tv(w, d);
        if (!std::isfinite(obj)) throw NumericalError("ADMM objective is not finite at iteration " + std::to_string(it));
        if (!res.objective.empty() && obj > res.objective.back()) {
            if (++increases >= 10) {
                std::string trace = "ADMM diverged; recent objective values:";
                for (std::size_t k = res.objective.size() >= 10 ? res.objective.size() - 10 : 0; k < res.objective.size(); ++k)
                    trace += " " + std::to_string(res.objective[k]);
                throw NumericalError(trace);
            }
        } else {
            increases = 0;
        }
        res.objective.push_back(obj);
        res.iterations = it + 1;

        double dw = 0.0, wn = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dw += (w[i] - w_prev[i]) * (w[i] - w_prev[i]);
            wn += w[i] * w[i];
        }
        if (it > 0 && dw <= cfg.tol * cfg.tol * std::max(wn, std::numeric_limits<double>::min())) break;
    }
    res.image = Image(d, std::move(w));
    return res;
}

EmInit parse_em_init(const std::string& s) {
    if (s == "random") return EmInit::random;
    if (s == "lowpass_gt") return EmInit::lowpass_gt;
    if (s == "fbp_uniform") return EmInit::fbp_uniform;
    throw InvalidArgument("unknown EM init: " + s);
}

std::string to_string(EmInit init) {
    switch (init) {
        case EmInit::random: return "random";
        case EmInit::lowpass_gt: return "lowpass_gt";
        case EmInit::fbp_uniform: return "fbp_uniform";
    }
    return "random";
}

EStep em_expectation(const RowMatrix& lines, const RowMatrix& projections, const Pmf& pmf, double sigma) {
    const Eigen::Index count = lines.rows(), n = projections.rows(), d = lines.cols();
    EStep e;
    const Eigen::VectorXd line_sq = lines.rowwise().squaredNorm();
    const Eigen::RowVectorXd proj_sq = projections.rowwise().squaredNorm().transpose();
    e.squared_residuals = -2.0 * (lines * projections.transpose());
    e.squared_residuals.colwise() += line_sq;
    e.squared_residuals.rowwise() += proj_sq;
    e.squared_residuals = e.squared_residuals.cwiseMax(0.0);

    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    const double log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * sigma * sigma);
    std::vector<double> logp(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        logp[static_cast<std::size_t>(i)] = pmf[static_cast<int>(i)] > 0.0 ? std::log(pmf[static_cast<int>(i)])
                                                                            : -std::numeric_limits<double>::infinity();
    e.responsibilities.resize(count, n);
    double total = 0.0;
    for (Eigen::Index l = 0; l < count; ++l) {
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double a = logp[static_cast<std::size_t>(i)] - e.squared_residuals(l, i) * inv2s2;
            e.responsibilities(l, i) = a;
            m = std::max(m, a);
        }
        if (!std::isfinite(m)) throw NumericalError("EM responsibilities underflow for line " + std::to_string(l));
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double w = std::exp(e.responsibilities(l, i) - m);
            e.responsibilities(l, i) = w;
            s += w;
        }
        e.responsibilities.row(l) /= s;
        total += m + std::log(s) + log_norm;
    }
    e.log_likelihood = total;
    return e;
}

namespace {

double expected_complete_ll(const EStep& e, const RowMatrix& lines, const RowMatrix& proj, const Pmf& pmf, double sigma) {
    const Eigen::Index count = lines.rows(), n = proj.rows(), d = lines.cols();
    const Eigen::VectorXd line_sq = lines.rowwise().squaredNorm();
    const Eigen::RowVectorXd proj_sq = proj.rowwise().squaredNorm().transpose();
    Eigen::MatrixXd res = -2.0 * (lines * proj.transpose());
    res.colwise() += line_sq;
    res.rowwise() += proj_sq;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    const double log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * sigma * sigma);
    double q = 0.0;
    for (Eigen::Index l = 0; l < count; ++l)
        for (Eigen::Index i = 0; i < n; ++i) {
            const double w = e.responsibilities(l, i);
            if (w == 0.0) continue;
            q += w * (std::log(pmf[static_cast<int>(i)]) - std::max(res(l, i), 0.0) * inv2s2 + log_norm);
        }
    return q;
}

}  // namespace

EmResult em_reconstruct(const ProjectionSet& sino, const AngleGrid& grid, const EmConfig& cfg, const Image* reference) {
    if (!(cfg.sigma > 0.0)) throw InvalidArgument("EM needs sigma > 0");
    if (cfg.n_iters <= 0 || cfg.m_step_cg_iters <= 0) throw InvalidArgument("EM iteration counts must be positive");
    if (sino.n_theta != grid.size()) throw InvalidArgument("EM: grid size differs from dataset n_theta");
    sino.validate();
    const int d = sino.width();
    const std::size_t n_px = static_cast<std::size_t>(d) * d;
    const int n = grid.size();
    const Projector proj(d, grid);

    // Initial image.
    Image init(d);
    switch (cfg.init) {
        case EmInit::lowpass_gt: {
            if (!reference) throw InvalidArgument("EM lowpass_gt init needs the reference image");
            if (reference->size() != d) throw InvalidArgument("EM reference image size differs from line length");
            init = gaussian_blur(*reference, cfg.lowpass_sigma_px > 0.0 ? cfg.lowpass_sigma_px : d / 8.0);
            break;
        }
        case EmInit::fbp_uniform: {
            // Mean line placed at every angle: a rotationally symmetric start.
            ProjectionSet guess;
            guess.n_theta = n;
            guess.lines = sino.lines.colwise().mean().replicate(n, 1);
            std::vector<std::uint32_t> labels(static_cast<std::size_t>(n));
            std::iota(labels.begin(), labels.end(), 0u);
            guess.angles = labels;
            init = fbp(guess, grid);
            for (auto& v : init.data()) v = std::max(v, 0.0);
            break;
        }
        case EmInit::random: {
            // Mass matches the data: sum(line) = sum(I) h.
            const double mean_line_sum = sino.lines.rowwise().sum().mean();
            const double mean_px = mean_line_sum / (static_cast<double>(d) * d * (2.0 / d));
            Rng rng(cfg.seed);
            std::uniform_real_distribution<double> unit(0.0, 2.0 * std::max(mean_px, 0.0));
            for (auto& v : init.data()) v = unit(rng);
            break;
        }
    }

    EmResult res;
    res.initial_image = init;
    std::vector<double> x(init.data().begin(), init.data().end());
    Pmf pmf = Pmf::uniform(n);
    for (int it = 0; it < cfg.n_iters; ++it) {
        const RowMatrix projections = proj.forward(x);
        const EStep e = em_expectation(sino.lines, projections, pmf, cfg.sigma);
        res.log_likelihood.push_back(e.log_likelihood);
        res.expected_ll_before.push_back(expected_complete_ll(e, sino.lines, projections, pmf, cfg.sigma));

        // M-step for the image: weighted least squares
        //   min_x sum_i W_i |P_i x|^2 - 2 <P_i x, S_i>,  x >= 0.
        std::vector<double> weights(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) weights[static_cast<std::size_t>(i)] = e.responsibilities.col(i).sum();
        const RowMatrix sums = e.responsibilities.transpose() * sino.lines;  // n x d
        std::vector<double> rhs(n_px);
        proj.adjoint(std::span<const double>(sums.data(), static_cast<std::size_t>(sums.size())), rhs);
        std::vector<double> hx(n_px);
        auto apply = [&](std::span<const double> v, std::span<double> out) { proj.normal(v, weights, out); };
        auto quad = [&](std::span<const double> v) {
            apply(v, hx);
            return 0.5 * dot(v, hx) - dot(rhs, v);
        };
        const std::vector<double> x_old = x;
        const double f_old = quad(x_old);
        conjugate_gradient(apply, rhs, x, cfg.m_step_cg_iters, 1e-12);
        for (auto& v : x) v = std::max(v, 0.0);
        // Projection can undo CG progress; backtrack toward the feasible old
        // point until the quadratic does not increase.
        if (quad(x) > f_old) {
            std::vector<double> trial(n_px);
            bool improved = false;
            for (double t = 0.5; t > 1e-6; t *= 0.5) {
                for (std::size_t j = 0; j < n_px; ++j) trial[j] = x_old[j] + t * (x[j] - x_old[j]);
                if (quad(trial) <= f_old) {
                    x = trial;
                    improved = true;
                    break;
                }
            }
            if (!improved) x = x_old;
        }

        if (cfg.update_pmf) {
            std::vector<double> p(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = weights[static_cast<std::size_t>(i)] / sino.count();
            pmf = Pmf::normalized(std::move(p));
        }
        const RowMatrix new_proj = proj.forward(x);
        res.expected_ll_after.push_back(expected_complete_ll(e, sino.lines, new_proj, pmf, cfg.sigma));
    }
    res.log_likelihood.push_back(em_expectation(sino.lines, proj.forward(x), pmf, cfg.sigma).log_likelihood);
    res.image = Image(d, std::move(x));
    res.pmf = pmf;
    return res;
}

}  // namespace uvtomo
