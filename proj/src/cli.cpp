#include "uvtomo/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "uvtomo/baselines.hpp"
#include "uvtomo/config.hpp"
#include "uvtomo/error.hpp"
#include "uvtomo/metrics.hpp"
#include "uvtomo/parallel.hpp"
#include "uvtomo/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace uvtomo {

double sigma_for_snr(const RowMatrix& clean_lines, double snr) {
    if (!(snr > 0.0)) throw InvalidArgument("SNR must be positive");
    if (std::isinf(snr)) return 0.0;
    const double power = clean_lines.squaredNorm() / static_cast<double>(clean_lines.size());
    return std::sqrt(power / snr);
}

ProjectionSet make_dataset(const Image& img, const Pmf& pmf, int count, double snr, Rng& rng) {
    if (count <= 0) throw InvalidArgument("line count must be positive");
    if (!(snr > 0.0)) throw InvalidArgument("SNR must be positive");
    const AngleGrid grid(pmf.size());
    const RowMatrix all = project_all(img, grid);
    const auto angles = sample_categorical(pmf, count, rng);

    ProjectionSet set;
    set.n_theta = pmf.size();
    set.lines.resize(count, img.size());
    for (int l = 0; l < count; ++l) set.lines.row(l) = all.row(angles[static_cast<std::size_t>(l)]);
    set.sigma = sigma_for_snr(set.lines, snr);
    if (set.sigma > 0.0) {
        std::normal_distribution<double> normal(0.0, set.sigma);
        for (int l = 0; l < count; ++l)
            for (int k = 0; k < img.size(); ++k) set.lines(l, k) += normal(rng);
    }
    set.angles = angles;
    return set;
}

namespace {

struct Globals {
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string config_path;
    std::string out = ".";
    int threads = 1;
};

json load_config(const Globals& g) {
    if (g.config_path.empty()) return json::object();
    std::ifstream in(g.config_path);
    if (!in) throw FormatError("cannot open config: " + g.config_path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(std::string("config is not valid JSON: ") + e.what());
    }
}

fs::path out_dir(const Globals& g) {
    fs::path p(g.out);
    fs::create_directories(p);
    return p;
}

double parse_snr(const std::string& s) {
    if (s == "inf" || s == "infinity" || s == "Inf") return kInfiniteSnr;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw InvalidArgument("bad SNR: " + s);
        if (!(v > 0.0)) throw InvalidArgument("SNR must be positive");
        return v;
    } catch (const std::logic_error&) {
        throw InvalidArgument("bad SNR: " + s);
    }
}

Image make_phantom(const std::string& kind, int size, std::uint64_t seed) {
    if (kind == "shepp_logan") return shepp_logan(size);
    if (kind == "blobs") return random_blobs(size, seed);
    throw InvalidArgument("unknown phantom kind: " + kind);
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

json evaluation_json(const Evaluation& e) {
    json j{{"psnr", e.psnr},
           {"cc", e.cc},
           {"psnr_unaligned", e.psnr_unaligned},
           {"alignment", {{"rotation_steps", e.transform.rotation_steps},
                          {"rotation_rad", e.transform.angle()},
                          {"mirrored", e.transform.mirrored},
                          {"n_theta", e.transform.n_theta}}}};
    j["cc_unaligned"] = e.cc_unaligned ? json(*e.cc_unaligned) : json(nullptr);
    j["tv_distance"] = e.tv_distance ? json(*e.tv_distance) : json(nullptr);
    j["tv_distance_unaligned"] = e.tv_distance_unaligned ? json(*e.tv_distance_unaligned) : json(nullptr);
    return j;
}

// Minimal line-plot SVG.
struct Series {
    std::string label;
    std::string color;
    std::vector<double> y;
};

void write_svg(const fs::path& path, const std::string& title, const std::vector<Series>& series) {
    const double width = 640, height = 400, margin = 50;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t n = 0;
    for (const auto& s : series)
        for (double v : s.y)
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
                n = std::max(n, s.y.size());
            }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi <= lo) hi = lo + 1.0;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << width - 2 * margin << "\" height=\""
        << height - 2 * margin << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<text x=\"5\" y=\"" << margin + 5 << "\" font-size=\"10\">" << fmt(hi) << "</text>\n";
    out << "<text x=\"5\" y=\"" << height - margin << "\" font-size=\"10\">" << fmt(lo) << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            const double x = margin + (n > 1 ? (width - 2 * margin) * i / (n - 1.0) : 0.0);
            const double y = height - margin - (height - 2 * margin) * (s.y[i] - lo) / (hi - lo);
            out << x << ',' << y << ' ';
        }
        out << "\"/>\n";
        out << "<text x=\"" << width - margin - 120 << "\" y=\"" << margin + 15 + 15 * k << "\" fill=\"" << s.color
            << "\" font-size=\"12\">" << s.label << "</text>\n";
    }
    out << "</svg>\n";
}

void write_history_csv(const fs::path& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "epoch,critic_loss,gen_loss,tv_dist_to_gt,psnr,cc\n";
    out << std::setprecision(10);
    for (const auto& r : history) {
        out << r.epoch << ',' << r.critic_loss << ',' << r.gen_loss << ',';
        if (r.tv_dist) out << *r.tv_dist;
        out << ',';
        if (r.psnr) out << *r.psnr;
        out << ',';
        if (r.cc) out << *r.cc;
        out << '\n';
    }
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open: " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(std::move(cells));
    }
    return rows;
}

void write_image_grid(const fs::path& path, const std::vector<Image>& images) {
    if (images.empty()) return;
    const int d = images.front().size();
    for (const auto& img : images)
        if (img.size() != d) throw InvalidArgument("plot: images in a grid must share a size");
    const int gap = 2;
    const int w = static_cast<int>(images.size()) * (d + gap) - gap;
    // Rectangular canvases are not representable as Image; write PGM directly.
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "P5\n" << w << " " << d << "\n255\n";
    for (int r = d - 1; r >= 0; --r)
        for (std::size_t k = 0; k < images.size(); ++k) {
            const auto& img = images[k];
            const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
            const double span = *hi > *lo ? *hi - *lo : 1.0;
            for (int c = 0; c < d; ++c)
                out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * (img(r, c) - *lo) / span))));
            if (k + 1 < images.size())
                for (int gcol = 0; gcol < gap; ++gcol) out.put(static_cast<char>(255));
        }
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Unknown-view tomography: adversarial reconstruction and classical baselines"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->each([&](const std::string&) { g.seed_set = true; });
    app.add_option("--config", g.config_path, "JSON config file");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

    // gen-phantom
    auto* gp = app.add_subcommand("gen-phantom", "Write a synthetic test image");
    std::string gp_kind = "shepp_logan";
    int gp_size = 64;
    gp->add_option("--kind", gp_kind, "shepp_logan | blobs");
    gp->add_option("--size", gp_size, "Side length d")->check(CLI::PositiveNumber);

    // gen-dataset
    auto* gd = app.add_subcommand("gen-dataset", "Synthesize unlabeled projection lines");
    std::string gd_image, gd_kind = "shepp_logan", gd_snr = "inf", gd_pmf;
    int gd_size = 64, gd_ntheta = 120, gd_lines = 20000, gd_pieces = 6;
    gd->add_option("--image", gd_image, "Raw image file (otherwise a phantom is generated)");
    gd->add_option("--phantom", gd_kind, "shepp_logan | blobs");
    gd->add_option("--size", gd_size, "Phantom side length")->check(CLI::PositiveNumber);
    gd->add_option("--n-theta", gd_ntheta, "Angle bins")->check(CLI::PositiveNumber);
    gd->add_option("--lines", gd_lines, "Number of projection lines L")->check(CLI::PositiveNumber);
    gd->add_option("--snr", gd_snr, "Signal-to-noise ratio, or inf");
    gd->add_option("--pmf", gd_pmf, "PMF CSV (otherwise random piecewise-smooth)");
    gd->add_option("--pmf-pieces", gd_pieces, "Knots of the random PMF")->check(CLI::PositiveNumber);

    // train
    auto* tr = app.add_subcommand("train", "Adversarial reconstruction of image and angle PMF");
    std::string tr_data, tr_mode, tr_known, tr_gt_image, tr_gt_pmf;
    int tr_epochs = 0, tr_save_every = 0, tr_eval_every = 1;
    tr->add_option("--data", tr_data, "Sinogram file")->required();
    tr->add_option("--pmf-mode", tr_mode, "learn | fixed_known | fixed_uniform");
    tr->add_option("--known-pmf", tr_known, "True PMF CSV for fixed_known");
    tr->add_option("--gt-image", tr_gt_image, "Ground-truth image for per-epoch metrics");
    tr->add_option("--gt-pmf", tr_gt_pmf, "Ground-truth PMF for per-epoch metrics");
    tr->add_option("--epochs", tr_epochs, "Override n_epochs")->check(CLI::PositiveNumber);
    tr->add_option("--save-every", tr_save_every, "Snapshot interval in epochs (0 = final only)");
    tr->add_option("--eval-every", tr_eval_every, "Ground-truth evaluation interval")->check(CLI::PositiveNumber);

    // fbp
    auto* fb = app.add_subcommand("fbp", "Filtered backprojection with known angles");
    std::string fb_data;
    fb->add_option("--data", fb_data, "Sinogram file")->required();

    // admm
    auto* ad = app.add_subcommand("admm", "TV-regularized reconstruction with known angles");
    std::string ad_data;
    double ad_gamma = -1.0, ad_rho = -1.0;
    int ad_iters = 0;
    ad->add_option("--data", ad_data, "Sinogram file")->required();
    ad->add_option("--gamma-tv", ad_gamma, "TV weight");
    ad->add_option("--rho", ad_rho, "Augmented Lagrangian weight");
    ad->add_option("--iters", ad_iters, "Iterations")->check(CLI::PositiveNumber);

    // em
    auto* em = app.add_subcommand("em", "Expectation-maximization over latent angles");
    std::string em_data, em_init, em_gt;
    double em_sigma = -1.0;
    int em_iters = 0;
    bool em_fixed_pmf = false;
    em->add_option("--data", em_data, "Sinogram file")->required();
    em->add_option("--init", em_init, "random | lowpass_gt | fbp_uniform");
    em->add_option("--gt-image", em_gt, "Reference image for lowpass_gt");
    em->add_option("--sigma", em_sigma, "Noise std (default: dataset sigma)");
    em->add_option("--iters", em_iters, "Iterations")->check(CLI::PositiveNumber);
    em->add_flag("--fixed-pmf", em_fixed_pmf, "Keep the angle prior uniform");

    // eval
    auto* ev = app.add_subcommand("eval", "Compare a reconstruction with ground truth");
    std::string ev_image, ev_gt, ev_pmf, ev_gt_pmf;
    int ev_ntheta = 0;
    ev->add_option("--image", ev_image, "Reconstruction")->required();
    ev->add_option("--gt", ev_gt, "Ground-truth image")->required();
    ev->add_option("--pmf", ev_pmf, "Recovered PMF CSV");
    ev->add_option("--gt-pmf", ev_gt_pmf, "Ground-truth PMF CSV");
    ev->add_option("--n-theta", ev_ntheta, "Angle grid for the alignment search (default: PMF size or 2d)");

    // plot
    auto* pl = app.add_subcommand("plot", "Render loss curves, PMF overlays and image grids");
    std::string pl_loss;
    std::vector<std::string> pl_pmfs, pl_images;
    pl->add_option("--loss", pl_loss, "Loss history CSV");
    pl->add_option("--pmf", pl_pmfs, "PMF CSVs to overlay (first = ground truth)");
    pl->add_option("--image", pl_images, "Images for a side-by-side PGM grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    set_num_threads(g.threads);
    const json config = load_config(g);
    if (!g.seed_set && config.contains("seed")) g.seed = config.at("seed").get<std::uint64_t>();

    if (*gp) {
        const Image img = make_phantom(gp_kind, gp_size, g.seed);
        const fs::path dir = out_dir(g);
        save_image(img, dir / "phantom.uvim");
        save_pgm(img, dir / "phantom.pgm");
        std::cout << "wrote " << (dir / "phantom.uvim").string() << "\n";
        return kExitOk;
    }

    if (*gd) {
        Rng rng(g.seed);
        const Image img = gd_image.empty() ? make_phantom(gd_kind, gd_size, g.seed) : load_image(gd_image);
        const Pmf pmf = gd_pmf.empty() ? random_piecewise_pmf(gd_ntheta, std::min(gd_pieces, gd_ntheta), rng)
                                       : load_pmf_csv(gd_pmf);
        const ProjectionSet set = make_dataset(img, pmf, gd_lines, parse_snr(gd_snr), rng);
        const fs::path dir = out_dir(g);
        save_projections(set, dir / "dataset.uvtg");
        save_image(img, dir / "gt_image.uvim");
        save_pgm(img, dir / "gt_image.pgm");
        save_pmf_csv(pmf, dir / "gt_pmf.csv");
        std::cout << "wrote " << set.count() << " lines (d=" << set.width() << ", n_theta=" << set.n_theta
                  << ", sigma=" << set.sigma << ") to " << (dir / "dataset.uvtg").string() << "\n";
        return kExitOk;
    }

    if (*tr) {
        TrainConfig cfg;
        if (config.contains("train")) from_json(config.at("train"), cfg);
        if (g.seed_set || config.contains("seed")) cfg.seed = g.seed;
        if (!tr_mode.empty()) cfg.pmf_mode = parse_pmf_mode(tr_mode);
        if (tr_epochs > 0) cfg.n_epochs = tr_epochs;
        const ProjectionSet data = load_projections(tr_data);

        TrainOptions opts;
        opts.eval_every = tr_eval_every;
        if (!tr_gt_image.empty()) opts.ground_truth = load_image(tr_gt_image);
        if (!tr_gt_pmf.empty()) opts.ground_truth_pmf = load_pmf_csv(tr_gt_pmf);
        if (cfg.pmf_mode == PmfMode::fixed_known) {
            if (!tr_known.empty()) opts.known_pmf = load_pmf_csv(tr_known);
            else if (opts.ground_truth_pmf) opts.known_pmf = opts.ground_truth_pmf;
            else throw InvalidArgument("--pmf-mode fixed_known needs --known-pmf");
        }
        const fs::path dir = out_dir(g);
        fs::create_directories(dir / "snapshots");
        {
            std::ofstream cfg_out(dir / "train_config.json");
            cfg_out << json(cfg).dump(2) << "\n";
        }
        opts.on_epoch = [&](const EpochRecord& rec, const Trainer& t) {
            std::cout << "epoch " << rec.epoch << " critic " << fmt(rec.critic_loss) << " gen " << fmt(rec.gen_loss);
            if (rec.cc) std::cout << " cc " << fmt(*rec.cc);
            if (rec.psnr) std::cout << " psnr " << fmt(*rec.psnr);
            if (rec.tv_dist) std::cout << " tv " << fmt(*rec.tv_dist);
            std::cout << std::endl;
            if (tr_save_every > 0 && (rec.epoch + 1) % tr_save_every == 0) {
                char stem[32];
                std::snprintf(stem, sizeof stem, "epoch_%05d", rec.epoch + 1);
                const fs::path base = dir / "snapshots" / stem;
                save_image(t.image(), base.string() + ".uvim");
                save_pmf_csv(t.pmf(), base.string() + ".csv");
                save_checkpoint(t.critic(), base.string() + ".uvck");
            }
        };
        // Run through a Trainer directly so the final critic can be saved.
        Trainer trainer(data, cfg, opts.known_pmf);
        std::vector<EpochRecord> history;
        for (int e = 0; e < cfg.n_epochs; ++e) {
            EpochRecord rec = trainer.run_epoch();
            const bool last = e + 1 == cfg.n_epochs;
            if (opts.ground_truth && (last || (e + 1) % opts.eval_every == 0)) {
                const Evaluation m = evaluate(trainer.image(), *opts.ground_truth, data.n_theta, trainer.pmf(),
                                              opts.ground_truth_pmf);
                rec.cc = m.cc;
                rec.psnr = m.psnr;
                rec.tv_dist = m.tv_distance;
            }
            opts.on_epoch(rec, trainer);
            history.push_back(rec);
        }
        write_history_csv(dir / "loss.csv", history);
        save_image(trainer.image(), dir / "image.uvim");
        save_pgm(trainer.image(), dir / "image.pgm");
        save_pmf_csv(trainer.pmf(), dir / "pmf.csv");
        save_checkpoint(trainer.critic(), dir / "critic.uvck");
        return kExitOk;
    }

    if (*fb) {
        const ProjectionSet data = load_projections(fb_data);
        const Image img = fbp(data, AngleGrid(data.n_theta));
        const fs::path dir = out_dir(g);
        save_image(img, dir / "fbp.uvim");
        save_pgm(img, dir / "fbp.pgm");
        return kExitOk;
    }

    if (*ad) {
        AdmmConfig cfg;
        if (config.contains("admm")) from_json(config.at("admm"), cfg);
        if (ad_gamma >= 0.0) cfg.gamma_tv = ad_gamma;
        if (ad_rho > 0.0) cfg.rho = ad_rho;
        if (ad_iters > 0) cfg.n_iters = ad_iters;
        const ProjectionSet data = load_projections(ad_data);
        const AdmmResult res = admm_tv(data, cfg);
        const fs::path dir = out_dir(g);
        save_image(res.image, dir / "admm.uvim");
        save_pgm(res.image, dir / "admm.pgm");
        std::ofstream trace(dir / "admm_objective.csv");
        trace << "iteration,objective\n" << std::setprecision(12);
        for (std::size_t i = 0; i < res.objective.size(); ++i) trace << i << ',' << res.objective[i] << '\n';
        return kExitOk;
    }

    if (*em) {
        EmConfig cfg;
        if (config.contains("em")) from_json(config.at("em"), cfg);
        if (g.seed_set || config.contains("seed")) cfg.seed = g.seed;
        if (!em_init.empty()) cfg.init = parse_em_init(em_init);
        if (em_iters > 0) cfg.n_iters = em_iters;
        if (em_fixed_pmf) cfg.update_pmf = false;
        const ProjectionSet data = load_projections(em_data);
        if (em_sigma > 0.0) cfg.sigma = em_sigma;
        else if (!(config.contains("em") && config.at("em").contains("sigma")) && data.sigma > 0.0) cfg.sigma = data.sigma;
        std::optional<Image> reference;
        if (!em_gt.empty()) reference = load_image(em_gt);
        if (cfg.init == EmInit::lowpass_gt && !reference) throw InvalidArgument("--init lowpass_gt needs --gt-image");
        const EmResult res = em_reconstruct(data, AngleGrid(data.n_theta), cfg, reference ? &*reference : nullptr);
        const fs::path dir = out_dir(g);
        save_image(res.image, dir / "em_image.uvim");
        save_pgm(res.image, dir / "em_image.pgm");
        save_pmf_csv(res.pmf, dir / "em_pmf.csv");
        std::ofstream trace(dir / "em_trace.csv");
        trace << "iteration,log_likelihood,expected_ll_before,expected_ll_after\n" << std::setprecision(12);
        for (std::size_t i = 0; i < res.expected_ll_before.size(); ++i)
            trace << i << ',' << res.log_likelihood[i] << ',' << res.expected_ll_before[i] << ','
                  << res.expected_ll_after[i] << '\n';
        if (reference) {
            const Evaluation m = evaluate(res.image, *reference, data.n_theta, res.pmf);
            std::ofstream(dir / "em_eval.json") << evaluation_json(m).dump(2) << "\n";
            std::cout << "cc " << fmt(m.cc) << " psnr " << fmt(m.psnr) << "\n";
        }
        return kExitOk;
    }

    if (*ev) {
        const Image recon = load_image(ev_image);
        const Image gt = load_image(ev_gt);
        std::optional<Pmf> pmf, gt_pmf;
        if (!ev_pmf.empty()) pmf = load_pmf_csv(ev_pmf);
        if (!ev_gt_pmf.empty()) gt_pmf = load_pmf_csv(ev_gt_pmf);
        int n_theta = ev_ntheta;
        if (n_theta <= 0) n_theta = pmf ? pmf->size() : (gt_pmf ? gt_pmf->size() : 2 * gt.size());
        const Evaluation m = evaluate(recon, gt, n_theta, pmf, gt_pmf);
        const json report = evaluation_json(m);
        std::ofstream(out_dir(g) / "eval.json") << report.dump(2) << "\n";
        std::cout << report.dump(2) << "\n";
        return kExitOk;
    }

    if (*pl) {
        if (pl_loss.empty() && pl_pmfs.empty() && pl_images.empty())
            throw InvalidArgument("plot needs --loss, --pmf or --image");
        const fs::path dir = out_dir(g);
        if (!pl_loss.empty()) {
            const auto rows = read_csv(pl_loss);
            if (rows.empty()) throw FormatError("empty loss CSV");
            Series critic{"critic loss", "#b22222", {}}, gen{"generator loss", "#1f4e99", {}};
            for (std::size_t i = 1; i < rows.size(); ++i) {
                if (rows[i].size() < 3) throw FormatError("loss CSV row has too few columns");
                critic.y.push_back(std::stod(rows[i][1]));
                gen.y.push_back(std::stod(rows[i][2]));
            }
            write_svg(dir / "loss.svg", "training losses", {critic, gen});
        }
        if (!pl_pmfs.empty()) {
            const std::vector<std::string> colors{"#b22222", "#1f4e99", "#2e8b57", "#8b008b"};
            std::vector<Series> series;
            for (std::size_t k = 0; k < pl_pmfs.size(); ++k) {
                const Pmf p = load_pmf_csv(pl_pmfs[k]);
                series.push_back({fs::path(pl_pmfs[k]).filename().string(), colors[k % colors.size()], p.probs()});
            }
            write_svg(dir / "pmf.svg", "angle PMF", series);
        }
        if (!pl_images.empty()) {
            std::vector<Image> images;
            for (const auto& p : pl_images) images.push_back(load_image(p));
            write_image_grid(dir / "images.pgm", images);
        }
        return kExitOk;
    }
    return kExitUsage;
}

}  // namespace

int run_cli(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const InvalidArgument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const FormatError& e) {
        std::cerr << "data format error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace uvtomo
