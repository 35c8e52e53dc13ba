#include "uvtomo/config.hpp"

#include <set>
#include <string>

#include "uvtomo/error.hpp"

namespace uvtomo {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const char* block) {
    if (!j.is_object()) throw InvalidArgument(std::string(block) + " config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) throw InvalidArgument(std::string("unknown ") + block + " config key: " + key);
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("config key ") + key + ": " + e.what());
    }
}

}  // namespace

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
    reject_unknown(j,
                   {"alpha_phi", "alpha_I", "alpha_p", "n_disc", "B", "lambda_gp", "tau", "gamma_I_tv", "gamma_I_l2",
                    "gamma_p_tv", "gamma_p_l2", "lr_decay", "decay_every_phi", "decay_every_I", "decay_every_p",
                    "clip_phi", "clip_I", "momentum", "n_epochs", "seed", "pmf_mode", "critic_arch", "image_init", "init_scale", "init_disc_radius"},
                   "train");
    read(j, "alpha_phi", cfg.alpha_phi);
    read(j, "alpha_I", cfg.alpha_I);
    read(j, "alpha_p", cfg.alpha_p);
    read(j, "n_disc", cfg.n_disc);
    read(j, "B", cfg.batch_size);
    read(j, "lambda_gp", cfg.lambda_gp);
    read(j, "tau", cfg.tau);
    read(j, "gamma_I_tv", cfg.gamma_I_tv);
    read(j, "gamma_I_l2", cfg.gamma_I_l2);
    read(j, "gamma_p_tv", cfg.gamma_p_tv);
    read(j, "gamma_p_l2", cfg.gamma_p_l2);
    read(j, "lr_decay", cfg.lr_decay);
    read(j, "decay_every_phi", cfg.decay_every_phi);
    read(j, "decay_every_I", cfg.decay_every_I);
    read(j, "decay_every_p", cfg.decay_every_p);
    read(j, "clip_phi", cfg.clip_phi);
    read(j, "clip_I", cfg.clip_I);
    read(j, "momentum", cfg.momentum);
    read(j, "n_epochs", cfg.n_epochs);
    read(j, "seed", cfg.seed);
    read(j, "critic_arch", cfg.critic_arch);
    read(j, "init_scale", cfg.init_scale);
    read(j, "init_disc_radius", cfg.init_disc_radius);
    if (j.contains("image_init")) {
        std::string init;
        read(j, "image_init", init);
        cfg.image_init = parse_image_init(init);
    }
    if (j.contains("pmf_mode")) {
        std::string mode;
        read(j, "pmf_mode", mode);
        cfg.pmf_mode = parse_pmf_mode(mode);
    }
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
    j = nlohmann::json{{"alpha_phi", cfg.alpha_phi},
                       {"alpha_I", cfg.alpha_I},
                       {"alpha_p", cfg.alpha_p},
                       {"n_disc", cfg.n_disc},
                       {"B", cfg.batch_size},
                       {"lambda_gp", cfg.lambda_gp},
                       {"tau", cfg.tau},
                       {"gamma_I_tv", cfg.gamma_I_tv},
                       {"gamma_I_l2", cfg.gamma_I_l2},
                       {"gamma_p_tv", cfg.gamma_p_tv},
                       {"gamma_p_l2", cfg.gamma_p_l2},
                       {"lr_decay", cfg.lr_decay},
                       {"decay_every_phi", cfg.decay_every_phi},
                       {"decay_every_I", cfg.decay_every_I},
                       {"decay_every_p", cfg.decay_every_p},
                       {"clip_phi", cfg.clip_phi},
                       {"clip_I", cfg.clip_I},
                       {"momentum", cfg.momentum},
                       {"n_epochs", cfg.n_epochs},
                       {"seed", cfg.seed},
                       {"pmf_mode", to_string(cfg.pmf_mode)},
                       {"critic_arch", cfg.critic_arch},
                       {"image_init", to_string(cfg.image_init)},
                       {"init_scale", cfg.init_scale},
                       {"init_disc_radius", cfg.init_disc_radius}};
}

void from_json(const nlohmann::json& j, AdmmConfig& cfg) {
    reject_unknown(j, {"gamma_tv", "rho", "n_iters", "cg_iters", "tol"}, "admm");
    read(j, "gamma_tv", cfg.gamma_tv);
    read(j, "rho", cfg.rho);
    read(j, "n_iters", cfg.n_iters);
    read(j, "cg_iters", cfg.cg_iters);
    read(j, "tol", cfg.tol);
}

void to_json(nlohmann::json& j, const AdmmConfig& cfg) {
    j = nlohmann::json{{"gamma_tv", cfg.gamma_tv},
                       {"rho", cfg.rho},
                       {"n_iters", cfg.n_iters},
                       {"cg_iters", cfg.cg_iters},
                       {"tol", cfg.tol}};
}

void from_json(const nlohmann::json& j, EmConfig& cfg) {
    reject_unknown(j, {"n_iters", "sigma", "update_pmf", "init", "m_step_cg_iters", "seed", "lowpass_sigma_px"}, "em");
    read(j, "n_iters", cfg.n_iters);
    read(j, "sigma", cfg.sigma);
    read(j, "update_pmf", cfg.update_pmf);
    read(j, "m_step_cg_iters", cfg.m_step_cg_iters);
    read(j, "seed", cfg.seed);
    read(j, "lowpass_sigma_px", cfg.lowpass_sigma_px);
    if (j.contains("init")) {
        std::string init;
        read(j, "init", init);
        cfg.init = parse_em_init(init);
    }
}

void to_json(nlohmann::json& j, const EmConfig& cfg) {
    j = nlohmann::json{{"n_iters", cfg.n_iters},
                       {"sigma", cfg.sigma},
                       {"update_pmf", cfg.update_pmf},
                       {"init", to_string(cfg.init)},
                       {"m_step_cg_iters", cfg.m_step_cg_iters},
                       {"seed", cfg.seed},
                       {"lowpass_sigma_px", cfg.lowpass_sigma_px}};
}

}  // namespace uvtomo
