#include "uvtomo/angledist.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "uvtomo/error.hpp"

namespace uvtomo {

Pmf::Pmf(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw InvalidArgument("pmf must have at least one bin");
    double total = 0.0;
    for (double v : probs_) {
        if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("pmf entries must be finite and nonnegative");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("pmf does not sum to one");
}

Pmf Pmf::uniform(int n) {
    if (n <= 0) throw InvalidArgument("pmf size must be positive");
    return Pmf(std::vector<double>(static_cast<std::size_t>(n), 1.0 / n));
}

Pmf Pmf::one_hot(int n, int k) {
    if (k < 0 || k >= n) throw InvalidArgument("one_hot index out of range");
    std::vector<double> v(static_cast<std::size_t>(n), 0.0);
    v[static_cast<std::size_t>(k)] = 1.0;
    return Pmf(std::move(v));
}

Pmf Pmf::normalized(std::vector<double> weights) {
    double total = 0.0;
    for (auto& w : weights) {
        if (!std::isfinite(w)) throw InvalidArgument("pmf weights must be finite");
        w = std::max(w, 0.0);
        total += w;
    }
    if (!(total > 0.0)) throw InvalidArgument("pmf weights sum to zero");
    for (auto& w : weights) w /= total;
    return Pmf(std::move(weights));
}

Pmf softmax_pmf(const PmfLogits& logits) {
    const auto& z = logits.logits;
    if (z.empty()) throw InvalidArgument("softmax of empty logits");
    const double m = *std::max_element(z.begin(), z.end());
    if (!std::isfinite(m)) throw NumericalError("non-finite logits");
    std::vector<double> p(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - m);
        total += p[i];
    }
    for (auto& v : p) v /= total;
    return Pmf(std::move(p));
}

std::vector<double> softmax_backward(const Pmf& p, std::span<const double> grad_p) {
    double dot = 0.0;
    for (int i = 0; i < p.size(); ++i) dot += p[i] * grad_p[static_cast<std::size_t>(i)];
    std::vector<double> g(static_cast<std::size_t>(p.size()));
    for (int i = 0; i < p.size(); ++i) g[static_cast<std::size_t>(i)] = p[i] * (grad_p[static_cast<std::size_t>(i)] - dot);
    return g;
}

double gumbel_from_uniform(double u) {
    u = std::clamp(u, kUniformClamp, 1.0 - kUniformClamp);
    return -std::log(-std::log(u));
}

Eigen::MatrixXd sample_gumbel(int rows, int cols, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::MatrixXd g(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) g(r, c) = gumbel_from_uniform(unit(rng));
    return g;
}

GumbelWeights gumbel_softmax_with_noise(const Pmf& p, double tau, const Eigen::MatrixXd& gumbels) {
    if (!(tau > 0.0)) throw InvalidArgument("gumbel_softmax temperature must be positive");
    const int n = p.size();
    if (gumbels.cols() != n) throw InvalidArgument("gumbel noise width differs from pmf size");
    GumbelWeights out;
    out.tau = tau;
    out.gumbels = gumbels;
    out.weights.resize(gumbels.rows(), n);
    std::vector<double> logp(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) logp[static_cast<std::size_t>(i)] = std::log(p[i] + kLogFloor);
    std::vector<double> a(static_cast<std::size_t>(n));
    for (Eigen::Index b = 0; b < gumbels.rows(); ++b) {
        double m = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            a[static_cast<std::size_t>(i)] = (gumbels(b, i) + logp[static_cast<std::size_t>(i)]) / tau;
            m = std::max(m, a[static_cast<std::size_t>(i)]);
        }
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const double e = std::exp(a[static_cast<std::size_t>(i)] - m);
            out.weights(b, i) = e;
            total += e;
        }
        out.weights.row(b) /= total;
    }
    return out;
}

GumbelWeights gumbel_softmax(const Pmf& p, double tau, int batch, Rng& rng) {
    if (batch <= 0) throw InvalidArgument("gumbel_softmax batch must be positive");
    return gumbel_softmax_with_noise(p, tau, sample_gumbel(batch, p.size(), rng));
}

std::vector<double> gumbel_softmax_backward(const Pmf& p, const GumbelWeights& r, const Eigen::MatrixXd& grad_r) {
    const int n = p.size();
    // d r_bi / d a_bj = r_bi (delta_ij - r_bj) / tau with a = g + log(p + eps).
    Eigen::VectorXd grad_logp = Eigen::VectorXd::Zero(n);
    for (Eigen::Index b = 0; b < r.weights.rows(); ++b) {
        const double dot = r.weights.row(b).dot(grad_r.row(b));
        for (int j = 0; j < n; ++j) grad_logp(j) += r.weights(b, j) * (grad_r(b, j) - dot) / r.tau;
    }
    std::vector<double> grad_p(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) grad_p[static_cast<std::size_t>(j)] = grad_logp(j) / (p[j] + kLogFloor);
    return grad_p;
}

std::vector<std::uint32_t> sample_categorical(const Pmf& p, int count, Rng& rng) {
    if (count < 0) throw InvalidArgument("sample count must be nonnegative");
    const int n = p.size();
    std::vector<double> cdf(static_cast<std::size_t>(n));
    std::partial_sum(p.probs().begin(), p.probs().end(), cdf.begin());
    int last_positive = 0;
    for (int i = 0; i < n; ++i)
        if (p[i] > 0.0) last_positive = i;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::uint32_t> out(static_cast<std::size_t>(count));
    for (auto& idx : out) {
        const double u = unit(rng);
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const int k = static_cast<int>(it - cdf.begin());
        idx = static_cast<std::uint32_t>(std::min(k, last_positive));
    }
    return out;
}

double tv_distance(const Pmf& p, const Pmf& q) {
    if (p.size() != q.size()) throw InvalidArgument("tv_distance: pmf sizes differ");
    double total = 0.0;
    for (int i = 0; i < p.size(); ++i) total += std::abs(p[i] - q[i]);
    return 0.5 * total;
}

Pmf random_piecewise_pmf(int n_theta, int n_pieces, Rng& rng) {
    if (n_pieces < 1 || n_pieces > n_theta) throw InvalidArgument("random_piecewise_pmf: need 1 <= n_pieces <= n_theta");
    if (n_pieces == 1) return Pmf::uniform(n_theta);

    std::vector<int> bins(static_cast<std::size_t>(n_theta));
    std::iota(bins.begin(), bins.end(), 0);
    std::shuffle(bins.begin(), bins.end(), rng);
    std::vector<int> knots(bins.begin(), bins.begin() + n_pieces);
    std::sort(knots.begin(), knots.end());
    std::uniform_real_distribution<double> level(0.1, 1.0);
    std::vector<double> values(static_cast<std::size_t>(n_pieces));
    for (auto& v : values) v = level(rng);

    std::vector<double> w(static_cast<std::size_t>(n_theta));
    for (int i = 0; i < n_theta; ++i) {
        // Locate the circular knot interval containing i.
        int hi = static_cast<int>(std::upper_bound(knots.begin(), knots.end(), i) - knots.begin());
        int lo = hi - 1;
        double start, end;
        if (lo < 0) {
            lo = n_pieces - 1;
            start = knots[static_cast<std::size_t>(lo)] - n_theta;
        } else {
            start = knots[static_cast<std::size_t>(lo)];
        }
        if (hi >= n_pieces) {
            hi = 0;
            end = knots[0] + n_theta;
        } else {
            end = knots[static_cast<std::size_t>(hi)];
        }
        const double t = (i - start) / (end - start);
        const double s = 0.5 - 0.5 * std::cos(std::numbers::pi * t);
        w[static_cast<std::size_t>(i)] =
            (1.0 - s) * values[static_cast<std::size_t>(lo)] + s * values[static_cast<std::size_t>(hi)];
    }
    return Pmf::normalized(std::move(w));
}

Pmf shift_pmf(const Pmf& p, int shift) {
    const int n = p.size();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(((i + shift) % n + n) % n)] = p[i];
    return Pmf(std::move(out));
}

Pmf flip_pmf(const Pmf& p) {
    std::vector<double> out(p.probs().rbegin(), p.probs().rend());
    return Pmf(std::move(out));
}

void save_pmf_csv(const Pmf& p, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "bin_index,probability\n";
    out.precision(17);
    for (int i = 0; i < p.size(); ++i) out << i << ',' << p[i] << '\n';
}

Pmf load_pmf_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("bin_index,probability", 0) != 0)
        throw FormatError("pmf csv: missing header");
    std::vector<double> probs;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw FormatError("pmf csv: malformed row");
        try {
            const int idx = std::stoi(line.substr(0, comma));
            if (idx != static_cast<int>(probs.size())) throw FormatError("pmf csv: bins out of order");
            probs.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::logic_error&) {
            throw FormatError("pmf csv: malformed number");
        }
    }
    try {
        return Pmf::normalized(std::move(probs));
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("pmf csv: ") + e.what());
    }
}

}  // namespace uvtomo
