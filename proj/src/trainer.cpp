#include "uvtomo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uvtomo/error.hpp"
#include "uvtomo/metrics.hpp"

namespace uvtomo {

PmfMode parse_pmf_mode(const std::string& s) {
    if (s == "learn") return PmfMode::learn;
    if (s == "fixed_known") return PmfMode::fixed_known;
    if (s == "fixed_uniform") return PmfMode::fixed_uniform;
    throw InvalidArgument("unknown pmf mode: " + s);
}

std::string to_string(PmfMode m) {
    switch (m) {
        case PmfMode::learn: return "learn";
        case PmfMode::fixed_known: return "fixed_known";
        case PmfMode::fixed_uniform: return "fixed_uniform";
    }
    return "learn";
}

ImageInit parse_image_init(const std::string& s) {
    if (s == "random") return ImageInit::random;
    if (s == "disc") return ImageInit::disc;
    throw InvalidArgument("unknown image init: " + s);
}

std::string to_string(ImageInit init) { return init == ImageInit::disc ? "disc" : "random"; }

void TrainConfig::validate(int n_lines) const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be positive");
    };
    auto nonnegative = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be nonnegative");
    };
    positive(alpha_phi, "alpha_phi");
    positive(alpha_I, "alpha_I");
    positive(alpha_p, "alpha_p");
    positive(tau, "tau");
    positive(clip_phi, "clip_phi");
    positive(clip_I, "clip_I");
    positive(init_scale, "init_scale");
    positive(init_disc_radius, "init_disc_radius");
    nonnegative(lambda_gp, "lambda_gp");
    nonnegative(gamma_I_tv, "gamma_I_tv");
    nonnegative(gamma_I_l2, "gamma_I_l2");
    nonnegative(gamma_p_tv, "gamma_p_tv");
    nonnegative(gamma_p_l2, "gamma_p_l2");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw InvalidArgument("lr_decay must be in (0, 1]");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must be in [0, 1)");
    if (n_disc <= 0 || batch_size <= 0 || n_epochs <= 0) throw InvalidArgument("n_disc, B and n_epochs must be positive");
    if (decay_every_phi <= 0 || decay_every_I <= 0 || decay_every_p <= 0)
        throw InvalidArgument("decay intervals must be positive");
    if (batch_size > n_lines) throw InvalidArgument("batch size exceeds the number of projection lines");
    if (critic_arch.empty() || critic_arch.back() != 1) throw InvalidArgument("critic_arch must end with width 1");
}

double TrainConfig::decayed(double base, int every, int epoch) const {
    return base * std::pow(lr_decay, epoch / every);
}

ValueGrad tv_image(std::span<const double> px, int d) {
    if (px.size() != static_cast<std::size_t>(d) * d) throw InvalidArgument("tv_image: size mismatch");
    ValueGrad out;
    out.grad.assign(px.size(), 0.0);
    const double eps2 = kTvSmoothing * kTvSmoothing;
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * d + c;
            const double dx = c + 1 < d ? px[i + 1] - px[i] : 0.0;
            const double dy = r + 1 < d ? px[i + static_cast<std::size_t>(d)] - px[i] : 0.0;
            const double t = std::sqrt(dx * dx + dy * dy + eps2);
            out.value += t;
            if (c + 1 < d) {
                out.grad[i + 1] += dx / t;
                out.grad[i] -= dx / t;
            }
            if (r + 1 < d) {
                out.grad[i + static_cast<std::size_t>(d)] += dy / t;
                out.grad[i] -= dy / t;
            }
        }
    return out;
}

ValueGrad tv_pmf(std::span<const double> p) {
    const std::size_t n = p.size();
    ValueGrad out;
    out.grad.assign(n, 0.0);
    const double eps2 = kTvSmoothing * kTvSmoothing;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        const double diff = p[j] - p[i];
        const double t = std::sqrt(diff * diff + eps2);
        out.value += t;
        out.grad[j] += diff / t;
        out.grad[i] -= diff / t;
    }
    return out;
}

GeneratorNoise draw_generator_noise(int batch, int n_theta, int d, double sigma, Rng& rng) {
    GeneratorNoise noise;
    noise.gumbels = sample_gumbel(batch, n_theta, rng);
    noise.eps = RowMatrix::Zero(batch, d);
    if (sigma > 0.0) {
        std::normal_distribution<double> normal(0.0, sigma);
        for (int b = 0; b < batch; ++b)
            for (int k = 0; k < d; ++k) noise.eps(b, k) = normal(rng);
    }
    return noise;
}

GeneratorEval evaluate_generator(const Projector& projector, const CriticParams& critic,
                                 std::span<const double> img_pre, const Pmf& pmf, const GeneratorNoise& noise,
                                 const TrainConfig& cfg, bool learn_pmf) {
    const int d = projector.image_size();
    const int n = projector.n_angles();
    const int batch = static_cast<int>(noise.gumbels.rows());
    if (img_pre.size() != static_cast<std::size_t>(d) * d) throw InvalidArgument("generator: image size mismatch");
    if (pmf.size() != n || noise.gumbels.cols() != n) throw InvalidArgument("generator: pmf size mismatch");

    std::vector<double> image(img_pre.size());
    for (std::size_t j = 0; j < image.size(); ++j) image[j] = std::max(img_pre[j], 0.0);

    const GumbelWeights r = gumbel_softmax_with_noise(pmf, cfg.tau, noise.gumbels);
    const RowMatrix proj = projector.forward(image);  // n x d

    GeneratorEval out;
    RowMatrix grad_proj(n, d);
    Eigen::MatrixXd grad_r(batch, n);
    const bool noiseless = noise.eps.isZero(0.0);
    if (noiseless) {
        // Every row b sees the same lines P_i I.
        const Eigen::MatrixXd x = proj.transpose();  // d x n
        const ForwardTrace trace = forward_trace(critic, x);
        const Eigen::RowVectorXd w = r.weights.colwise().sum();
        out.adversarial = -w.dot(trace.output);
        const Eigen::MatrixXd gx = backward(critic, trace, -w, nullptr);  // d x n
        grad_proj = gx.transpose();
        for (int b = 0; b < batch; ++b) grad_r.row(b) = -trace.output;
    } else {
        // Column b * n + i holds P_i I + eps_b.
        Eigen::MatrixXd x(d, static_cast<Eigen::Index>(batch) * n);
        for (int b = 0; b < batch; ++b)
            for (int i = 0; i < n; ++i) x.col(static_cast<Eigen::Index>(b) * n + i) = (proj.row(i) + noise.eps.row(b)).transpose();
        const ForwardTrace trace = forward_trace(critic, x);
        Eigen::RowVectorXd up(x.cols());
        for (int b = 0; b < batch; ++b)
            for (int i = 0; i < n; ++i) {
                const Eigen::Index col = static_cast<Eigen::Index>(b) * n + i;
                up(col) = -r.weights(b, i);
                grad_r(b, i) = -trace.output(col);
            }
        out.adversarial = up.dot(trace.output);
        const Eigen::MatrixXd gx = backward(critic, trace, up, nullptr);
        grad_proj.setZero();
        for (int b = 0; b < batch; ++b)
            for (int i = 0; i < n; ++i) grad_proj.row(i) += gx.col(static_cast<Eigen::Index>(b) * n + i).transpose();
    }

    out.grad_image.assign(image.size(), 0.0);
    projector.adjoint(std::span<const double>(grad_proj.data(), static_cast<std::size_t>(grad_proj.size())), out.grad_image);

    double loss = out.adversarial;
    if (cfg.gamma_I_tv > 0.0) {
        const ValueGrad tv = tv_image(image, d);
        loss += cfg.gamma_I_tv * tv.value;
        for (std::size_t j = 0; j < image.size(); ++j) out.grad_image[j] += cfg.gamma_I_tv * tv.grad[j];
    }
    if (cfg.gamma_I_l2 > 0.0) {
        double sq = 0.0;
        for (std::size_t j = 0; j < image.size(); ++j) {
            sq += image[j] * image[j];
            out.grad_image[j] += 2.0 * cfg.gamma_I_l2 * image[j];
        }
        loss += cfg.gamma_I_l2 * sq;
    }
    out.grad_img_pre.resize(image.size());
    for (std::size_t j = 0; j < image.size(); ++j) out.grad_img_pre[j] = img_pre[j] > 0.0 ? out.grad_image[j] : 0.0;

    // PMF regularizers enter the loss in every mode; gradients only when learned.
    std::vector<double> grad_p(static_cast<std::size_t>(n), 0.0);
    if (cfg.gamma_p_tv > 0.0) {
        const ValueGrad tv = tv_pmf(pmf.probs());
        loss += cfg.gamma_p_tv * tv.value;
        for (int i = 0; i < n; ++i) grad_p[static_cast<std::size_t>(i)] += cfg.gamma_p_tv * tv.grad[static_cast<std::size_t>(i)];
    }
    if (cfg.gamma_p_l2 > 0.0) {
        double sq = 0.0;
        for (int i = 0; i < n; ++i) {
            sq += pmf[i] * pmf[i];
            grad_p[static_cast<std::size_t>(i)] += 2.0 * cfg.gamma_p_l2 * pmf[i];
        }
        loss += cfg.gamma_p_l2 * sq;
    }
    out.loss = loss;
    if (learn_pmf) {
        const auto adv = gumbel_softmax_backward(pmf, r, grad_r);
        for (int i = 0; i < n; ++i) grad_p[static_cast<std::size_t>(i)] += adv[static_cast<std::size_t>(i)];
        out.grad_logits = softmax_backward(pmf, grad_p);
    }
    return out;
}

Trainer::Trainer(const ProjectionSet& data, TrainConfig cfg, std::optional<Pmf> known_pmf)
    : data_(data),
      cfg_(std::move(cfg)),
      d_(data.width()),
      grid_(data.n_theta),
      projector_(data.width(), grid_),
      rng_(cfg_.seed) {
    data_.validate();
    cfg_.validate(data_.count());
    if (cfg_.pmf_mode == PmfMode::fixed_known) {
        if (!known_pmf) throw InvalidArgument("pmf_mode fixed_known needs the true PMF");
        if (known_pmf->size() != data_.n_theta) throw InvalidArgument("known PMF size differs from n_theta");
        fixed_pmf_ = std::move(known_pmf);
    } else if (cfg_.pmf_mode == PmfMode::fixed_uniform) {
        fixed_pmf_ = Pmf::uniform(data_.n_theta);
    }

    critic_ = init_critic(cfg_.critic_arch, d_, rng_);
    critic_velocity_ = LayerGrad::zeros_like(critic_);

    std::uniform_real_distribution<double> init(0.0, cfg_.init_scale);
    img_pre_.resize(static_cast<std::size_t>(d_) * d_);
    if (cfg_.image_init == ImageInit::random) {
        for (auto& v : img_pre_) v = init(rng_);
    } else {
        // Every noiseless line sums to the image mass; the noise has zero mean.
        const double mass = data_.lines.sum() / static_cast<double>(data_.count());
        Image shape = disc(d_, cfg_.init_disc_radius);
        const double area = std::accumulate(shape.data().begin(), shape.data().end(), 0.0);
        if (area == 0.0) throw InvalidArgument("init_disc_radius covers no pixel");
        const double level = std::max(mass, 0.0) / area;
        for (std::size_t j = 0; j < img_pre_.size(); ++j) img_pre_[j] = level * (shape.data()[j] + init(rng_));
    }
    img_velocity_.assign(img_pre_.size(), 0.0);
    logits_.logits.assign(static_cast<std::size_t>(data_.n_theta), 0.0);

    order_.resize(static_cast<std::size_t>(data_.count()));
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_);
}

Image Trainer::image() const {
    std::vector<double> px(img_pre_.size());
    for (std::size_t j = 0; j < px.size(); ++j) px[j] = std::max(img_pre_[j], 0.0);
    return Image(d_, std::move(px));
}

Pmf Trainer::pmf() const { return fixed_pmf_ ? *fixed_pmf_ : softmax_pmf(logits_); }

double Trainer::lr_phi() const { return cfg_.decayed(cfg_.alpha_phi, cfg_.decay_every_phi, epoch_); }
double Trainer::lr_I() const { return cfg_.decayed(cfg_.alpha_I, cfg_.decay_every_I, epoch_); }
double Trainer::lr_p() const { return cfg_.decayed(cfg_.alpha_p, cfg_.decay_every_p, epoch_); }

void Trainer::set_image_parameter(std::vector<double> img_pre) {
    if (img_pre.size() != img_pre_.size()) throw InvalidArgument("image parameter size mismatch");
    img_pre_ = std::move(img_pre);
    projections_valid_ = false;
}

void Trainer::set_logits(PmfLogits logits) {
    if (logits.logits.size() != logits_.logits.size()) throw InvalidArgument("logit count mismatch");
    logits_ = std::move(logits);
}

int Trainer::steps_per_epoch() const {
    const int per_step = cfg_.n_disc * cfg_.batch_size;
    return std::max(1, (data_.count() + per_step - 1) / per_step);
}

void Trainer::refresh_projections() {
    if (projections_valid_) return;
    const Image img = image();
    projections_ = projector_.forward(img.data());
    projections_valid_ = true;
}

RowMatrix Trainer::next_real_batch() {
    const int batch = cfg_.batch_size;
    if (cursor_ + static_cast<std::size_t>(batch) > order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
    }
    RowMatrix out(batch, d_);
    for (int b = 0; b < batch; ++b) out.row(b) = data_.lines.row(order_[cursor_ + static_cast<std::size_t>(b)]);
    cursor_ += static_cast<std::size_t>(batch);
    return out;
}

CriticStepResult Trainer::critic_step(const RowMatrix& real_batch) {
    const int batch = static_cast<int>(real_batch.rows());
    if (real_batch.cols() != d_) throw InvalidArgument("critic_step: batch width mismatch");
    refresh_projections();

    const Pmf p = pmf();
    const auto angles = sample_categorical(p, batch, rng_);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Eigen::MatrixXd x(d_, 2 * batch);  // real | syn
    Eigen::MatrixXd x_int(d_, batch);
    for (int b = 0; b < batch; ++b) {
        x.col(b) = real_batch.row(b).transpose();
        Eigen::VectorXd syn = projections_.row(angles[static_cast<std::size_t>(b)]).transpose();
        if (data_.sigma > 0.0)
            for (int k = 0; k < d_; ++k) syn(k) += data_.sigma * normal(rng_);
        x.col(batch + b) = syn;
        const double alpha = unit(rng_);
        x_int.col(b) = alpha * x.col(b) + (1.0 - alpha) * syn;
    }

    // Minimize sum_b D(syn) - D(real) + lambda (|grad D(int)| - 1)^2.
    LayerGrad grad = LayerGrad::zeros_like(critic_);
    const ForwardTrace trace = forward_trace(critic_, x);
    Eigen::RowVectorXd up(2 * batch);
    up.head(batch).setConstant(-1.0);
    up.tail(batch).setConstant(1.0);
    backward(critic_, trace, up, &grad);
    const PenaltyResult pen = penalty_batch(critic_, x_int, cfg_.lambda_gp, grad);

    CriticStepResult res;
    res.loss = up.dot(trace.output) + pen.value;
    res.vanishing_penalty = pen.vanishing;
    if (!std::isfinite(res.loss) || !grad.all_finite())
        throw NumericalError("critic step produced a non-finite loss or gradient at generator step " +
                             std::to_string(gen_steps_));

    res.grad_norm = std::sqrt(grad.squared_norm());
    if (res.grad_norm > cfg_.clip_phi) grad.scale(cfg_.clip_phi / res.grad_norm);
    res.clipped_norm = std::sqrt(grad.squared_norm());

    critic_velocity_.scale(cfg_.momentum);
    critic_velocity_.add(grad);
    apply_update(critic_, critic_velocity_, -lr_phi());

    ++critic_steps_;
    critic_loss_acc_ += res.loss / batch;
    ++critic_loss_count_;
    return res;
}

double Trainer::generator_step() {
    refresh_projections();
    const Pmf p = pmf();
    const GeneratorNoise noise = draw_generator_noise(cfg_.batch_size, data_.n_theta, d_, data_.sigma, rng_);
    const bool learn = cfg_.pmf_mode == PmfMode::learn;
    GeneratorEval ev = evaluate_generator(projector_, critic_, img_pre_, p, noise, cfg_, learn);

    if (!std::isfinite(ev.loss)) throw NumericalError("generator loss is not finite");
    double norm = 0.0;
    for (double g : ev.grad_img_pre) norm += g * g;
    norm = std::sqrt(norm);
    if (!std::isfinite(norm)) throw NumericalError("generator image gradient is not finite");
    const double clip = norm > cfg_.clip_I ? cfg_.clip_I / norm : 1.0;
    const double lr = lr_I();
    for (std::size_t j = 0; j < img_pre_.size(); ++j) {
        img_velocity_[j] = cfg_.momentum * img_velocity_[j] + clip * ev.grad_img_pre[j];
        img_pre_[j] -= lr * img_velocity_[j];
    }

    if (learn) {
        double gn = 0.0;
        for (double g : ev.grad_logits) gn += g * g;
        gn = std::sqrt(gn);
        if (!std::isfinite(gn)) throw NumericalError("generator PMF gradient is not finite");
        if (gn > 0.0) {
            const double step = lr_p() / gn;
            for (std::size_t i = 0; i < logits_.logits.size(); ++i) logits_.logits[i] -= step * ev.grad_logits[i];
        }
    }

    projections_valid_ = false;
    ++gen_steps_;
    gen_loss_acc_ += ev.loss / cfg_.batch_size;
    ++gen_loss_count_;
    return ev.loss;
}

void Trainer::iteration() {
    for (int t = 0; t < cfg_.n_disc; ++t) critic_step(next_real_batch());
    generator_step();
}

EpochRecord Trainer::run_epoch() {
    critic_loss_acc_ = gen_loss_acc_ = 0.0;
    critic_loss_count_ = gen_loss_count_ = 0;
    const int steps = steps_per_epoch();
    for (int s = 0; s < steps; ++s) iteration();
    EpochRecord rec;
    rec.epoch = epoch_;
    rec.critic_loss = critic_loss_count_ ? critic_loss_acc_ / critic_loss_count_ : 0.0;
    rec.gen_loss = gen_loss_count_ ? gen_loss_acc_ / gen_loss_count_ : 0.0;
    ++epoch_;
    return rec;
}

TrainResult train(const ProjectionSet& data, const TrainConfig& cfg, const TrainOptions& options) {
    Trainer trainer(data, cfg, options.known_pmf);
    TrainResult result;
    for (int e = 0; e < cfg.n_epochs; ++e) {
        EpochRecord rec = trainer.run_epoch();
        const bool last = e + 1 == cfg.n_epochs;
        if (options.ground_truth && (last || (options.eval_every > 0 && (e + 1) % options.eval_every == 0))) {
            const std::optional<Pmf> est = trainer.pmf();
            const Evaluation ev = evaluate(trainer.image(), *options.ground_truth, data.n_theta, est,
                                           options.ground_truth_pmf);
            rec.psnr = ev.psnr;
            rec.cc = ev.cc;
            rec.tv_dist = ev.tv_distance;
        } else if (options.ground_truth_pmf) {
            rec.tv_dist = tv_distance(trainer.pmf(), *options.ground_truth_pmf);
        }
        if (options.on_epoch) options.on_epoch(rec, trainer);
        result.history.push_back(rec);
    }
    result.image = trainer.image();
    result.pmf = trainer.pmf();
    return result;
}

}  // namespace uvtomo
