#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uvtomo/angledist.hpp"
#include "uvtomo/critic.hpp"
#include "uvtomo/diff.hpp"
#include "uvtomo/image.hpp"
#include "uvtomo/projector.hpp"

namespace uvtomo {

enum class PmfMode { learn, fixed_known, fixed_uniform };

PmfMode parse_pmf_mode(const std::string& s);
std::string to_string(PmfMode m);

// random: pre-ReLU pixels ~ U(0, init_scale).
// disc: a centered disc of radius init_disc_radius whose mass equals the mean
// line sum of the data, plus level * U(0, init_scale) on every pixel so that
// none starts on the dead side of the ReLU.
enum class ImageInit { random, disc };

ImageInit parse_image_init(const std::string& s);
std::string to_string(ImageInit init);

struct TrainConfig {
    double alpha_phi = 1e-3;
    double alpha_I = 1e-4;
    double alpha_p = 1e-3;
    int n_disc = 4;
    int batch_size = 50;
    double lambda_gp = 10.0;
    double tau = 0.5;
    double gamma_I_tv = 1e-3;
    double gamma_I_l2 = 1e-4;
    double gamma_p_tv = 1e-2;
    double gamma_p_l2 = 1e-3;
    double lr_decay = 0.9;
    int decay_every_phi = 50;
    int decay_every_I = 50;
    int decay_every_p = 100;
    double clip_phi = 1.0;
    double clip_I = 10.0;
    double momentum = 0.9;
    int n_epochs = 100;
    std::uint64_t seed = 0;
    PmfMode pmf_mode = PmfMode::learn;
    std::vector<int> critic_arch = kDeskCriticArch;
    ImageInit image_init = ImageInit::random;
    double init_scale = 0.1;
    double init_disc_radius = 0.8;

    // Throws InvalidArgument on out-of-range fields; batch_size must not
    // exceed the number of lines.
    void validate(int n_lines) const;
    // Learning rate of a variable after `epoch` completed epochs.
    double decayed(double base, int every, int epoch) const;
};

inline constexpr double kTvSmoothing = 1e-8;

struct ValueGrad {
    double value = 0.0;
    std::vector<double> grad;
};

// Smoothed isotropic TV with forward differences (zero past the border):
// sum sqrt(dx^2 + dy^2 + eps^2).
ValueGrad tv_image(std::span<const double> pixels, int d);
// Circular smoothed TV of a PMF: sum sqrt((p_{i+1} - p_i)^2 + eps^2).
ValueGrad tv_pmf(std::span<const double> probs);

// Random draws that make one generator loss evaluation deterministic.
struct GeneratorNoise {
    Eigen::MatrixXd gumbels;  // B x n_theta
    RowMatrix eps;            // B x d, already scaled by sigma
};

GeneratorNoise draw_generator_noise(int batch, int n_theta, int d, double sigma, Rng& rng);

struct GeneratorEval {
    double loss = 0.0;
    double adversarial = 0.0;
    std::vector<double> grad_image;    // dL / d(ReLU image)
    std::vector<double> grad_img_pre;  // through the ReLU gate
    std::vector<double> grad_logits;   // empty unless the PMF is learned
};

// Relaxed generator loss
//   -sum_b sum_i r_bi D(P_i I + eps_b) + gamma_I_tv TV(I) + gamma_I_l2 |I|^2
//   + gamma_p_tv TV(p) + gamma_p_l2 |p|^2
// with I = max(img_pre, 0) and r = gumbel_softmax(p) for the given noise.
// For sigma == 0 every batch row sees the same line per bin, so the critic is
// evaluated once per bin with the summed weights.
GeneratorEval evaluate_generator(const Projector& projector, const CriticParams& critic,
                                 std::span<const double> img_pre, const Pmf& pmf, const GeneratorNoise& noise,
                                 const TrainConfig& cfg, bool learn_pmf);

struct CriticStepResult {
    double loss = 0.0;            // sum_b D(syn) - D(real) + penalty
    double grad_norm = 0.0;       // before clipping
    double clipped_norm = 0.0;    // after clipping
    int vanishing_penalty = 0;
};

struct EpochRecord {
    int epoch = 0;
    double critic_loss = 0.0;  // mean per sample
    double gen_loss = 0.0;     // mean per batch row
    std::optional<double> tv_dist;
    std::optional<double> psnr;
    std::optional<double> cc;
};

struct Snapshot {
    Image image;
    Pmf pmf;
};

class Trainer {
public:
    // known_pmf is required for PmfMode::fixed_known.
    Trainer(const ProjectionSet& data, TrainConfig cfg, std::optional<Pmf> known_pmf = std::nullopt);

    CriticStepResult critic_step(const RowMatrix& real_batch);
    double generator_step();
    // n_disc critic steps on fresh real batches followed by one generator step.
    void iteration();
    EpochRecord run_epoch();

    int steps_per_epoch() const;
    int epoch() const { return epoch_; }
    int generator_steps() const { return gen_steps_; }
    int critic_steps() const { return critic_steps_; }

    Image image() const;
    Pmf pmf() const;
    const TrainConfig& config() const { return cfg_; }
    const CriticParams& critic() const { return critic_; }
    CriticParams& critic() { return critic_; }
    std::span<const double> img_pre() const { return img_pre_; }
    const PmfLogits& logits() const { return logits_; }
    const Projector& projector() const { return projector_; }
    double lr_phi() const;
    double lr_I() const;
    double lr_p() const;

    void set_image_parameter(std::vector<double> img_pre);
    void set_logits(PmfLogits logits);

private:
    RowMatrix next_real_batch();
    void refresh_projections();

    ProjectionSet data_;
    TrainConfig cfg_;
    int d_;
    AngleGrid grid_;
    Projector projector_;
    Rng rng_;
    std::optional<Pmf> fixed_pmf_;

    CriticParams critic_;
    LayerGrad critic_velocity_;
    std::vector<double> img_pre_;
    std::vector<double> img_velocity_;
    PmfLogits logits_;

    RowMatrix projections_;  // P_i I for the current image
    bool projections_valid_ = false;

    std::vector<int> order_;
    std::size_t cursor_ = 0;

    int epoch_ = 0;
    int gen_steps_ = 0;
    int critic_steps_ = 0;
    double critic_loss_acc_ = 0.0;
    double gen_loss_acc_ = 0.0;
    int critic_loss_count_ = 0;
    int gen_loss_count_ = 0;
};

struct TrainResult {
    Image image;
    Pmf pmf;
    std::vector<EpochRecord> history;
};

struct TrainOptions {
    std::optional<Image> ground_truth;
    std::optional<Pmf> ground_truth_pmf;
    std::optional<Pmf> known_pmf;
    // Evaluate against ground truth every `eval_every` epochs (and the last).
    int eval_every = 1;
    std::function<void(const EpochRecord&, const Trainer&)> on_epoch;
};

TrainResult train(const ProjectionSet& data, const TrainConfig& cfg, const TrainOptions& options = {});

}  // namespace uvtomo
