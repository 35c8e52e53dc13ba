#include "uvtomo/critic.hpp"

#include <cmath>

#include "binary_io.hpp"
#include "uvtomo/error.hpp"

namespace uvtomo {

std::vector<int> CriticParams::architecture() const {
    std::vector<int> arch;
    for (const auto& l : layers) arch.push_back(static_cast<int>(l.weight.rows()));
    return arch;
}

std::size_t CriticParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

void CriticParams::validate() const {
    if (layers.empty()) throw InvalidArgument("critic has no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& l = layers[k];
        if (l.bias.size() != l.weight.rows()) throw InvalidArgument("critic layer bias size mismatch");
        if (k > 0 && l.weight.cols() != layers[k - 1].weight.rows())
            throw InvalidArgument("critic layer shapes do not chain");
        if (!l.weight.allFinite() || !l.bias.allFinite()) throw InvalidArgument("critic has non-finite parameters");
    }
    if (layers.back().weight.rows() != 1) throw InvalidArgument("critic output width must be 1");
}

namespace {

void check_arch(std::span<const int> arch, int input_size) {
    if (arch.empty()) throw InvalidArgument("critic architecture is empty");
    if (input_size <= 0) throw InvalidArgument("critic input size must be positive");
    for (int w : arch)
        if (w <= 0) throw InvalidArgument("critic layer widths must be positive");
    if (arch.back() != 1) throw InvalidArgument("critic architecture must end with width 1");
}

}  // namespace

CriticParams zero_critic(std::span<const int> arch, int input_size) {
    check_arch(arch, input_size);
    CriticParams p;
    int fan_in = input_size;
    for (int w : arch) {
        p.layers.push_back({Eigen::MatrixXd::Zero(w, fan_in), Eigen::VectorXd::Zero(w)});
        fan_in = w;
    }
    return p;
}

CriticParams init_critic(std::span<const int> arch, int input_size, Rng& rng) {
    CriticParams p = zero_critic(arch, input_size);
    for (auto& l : p.layers) {
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(l.weight.cols())));
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
            for (Eigen::Index r = 0; r < l.weight.rows(); ++r) l.weight(r, c) = normal(rng);
    }
    return p;
}

Eigen::RowVectorXd forward_batch(const CriticParams& params, const Eigen::MatrixXd& inputs) {
    if (inputs.rows() != params.input_size()) throw InvalidArgument("critic forward: input width mismatch");
    Eigen::MatrixXd a = inputs;
    const std::size_t last = params.layers.size() - 1;
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        const auto& l = params.layers[k];
        Eigen::MatrixXd z = l.weight * a;
        z.colwise() += l.bias;
        if (k < last) z = z.cwiseMax(0.0);
        a = std::move(z);
    }
    return a.row(0);
}

double forward(const CriticParams& params, std::span<const double> line) {
    const Eigen::Map<const Eigen::VectorXd> x(line.data(), static_cast<Eigen::Index>(line.size()));
    return forward_batch(params, x)(0);
}

std::vector<double> interpolate_with(std::span<const double> real, std::span<const double> syn, double alpha) {
    if (real.size() != syn.size()) throw InvalidArgument("interpolate: line lengths differ");
    std::vector<double> out(real.size());
    for (std::size_t k = 0; k < real.size(); ++k) out[k] = alpha * real[k] + (1.0 - alpha) * syn[k];
    return out;
}

std::vector<double> interpolate(std::span<const double> real, std::span<const double> syn, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return interpolate_with(real, syn, unit(rng));
}

void save_checkpoint(const CriticParams& params, const std::filesystem::path& path) {
    params.validate();
    detail::ByteWriter w;
    w.magic("UVCK");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(params.layers.size()));
    for (const auto& l : params.layers) {
        w.u32(static_cast<std::uint32_t>(l.weight.rows()));
        w.u32(static_cast<std::uint32_t>(l.weight.cols()));
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.f32(static_cast<float>(l.weight(r, c)));
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) w.f32(static_cast<float>(l.bias(r)));
    }
    w.write_file(path);
}

CriticParams load_checkpoint(const std::filesystem::path& path) {
    auto r = detail::ByteReader::from_file(path);
    r.expect_magic("UVCK");
    if (r.u32() != 1) throw FormatError("unsupported checkpoint version");
    const std::uint32_t n_layers = r.u32();
    if (n_layers == 0 || n_layers > 1024) throw FormatError("checkpoint layer count invalid");
    CriticParams p;
    for (std::uint32_t k = 0; k < n_layers; ++k) {
        const std::uint32_t rows = r.u32(), cols = r.u32();
        if (rows == 0 || cols == 0) throw FormatError("checkpoint layer has zero dimension");
        if (r.remaining() < (static_cast<std::size_t>(rows) * cols + rows) * 4) throw FormatError("checkpoint truncated");
        DenseLayer l{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
        for (std::uint32_t i = 0; i < rows; ++i)
            for (std::uint32_t j = 0; j < cols; ++j) l.weight(i, j) = r.f32();
        for (std::uint32_t i = 0; i < rows; ++i) l.bias(i) = r.f32();
        p.layers.push_back(std::move(l));
    }
    if (r.remaining() != 0) throw FormatError("checkpoint has trailing bytes");
    try {
        p.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    return p;
}

}  // namespace uvtomo
