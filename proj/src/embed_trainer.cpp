#include "hct/embed_trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "hct/error.hpp"
#include "hct/pk_sampler.hpp"
#include "hct/triplet_loss.hpp"

namespace hct {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'H', 'C', 'T', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint32_t kVersion = 1;

void require_input_dim(const EmbedModel& model, const Matrix& inputs) {
    if (inputs.cols() != model.input_dim) {
        throw ValidationError("model expects " + std::to_string(model.input_dim) + " input features, got " +
                              std::to_string(inputs.cols()));
    }
}

Matrix relu(Matrix m) {
    for (auto& v : m.data()) v = v > 0.0 ? v : 0.0;
    return m;
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in, const std::filesystem::path& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error("truncated checkpoint " + path.string());
    return v;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::identity: return "identity";
        case ModelKind::linear: return "linear";
        case ModelKind::mlp1: return "mlp1";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
    if (name == "identity") return ModelKind::identity;
    if (name == "linear") return ModelKind::linear;
    if (name == "mlp1") return ModelKind::mlp1;
    throw ValidationError("unknown model kind '" + std::string(name) + "' (expected identity, linear or mlp1)");
}

EmbedModel EmbedModel::make_identity(std::size_t dim) {
    EmbedModel m;
    m.kind = ModelKind::identity;
    m.input_dim = m.embed_dim = dim;
    return m;
}

EmbedModel EmbedModel::make_linear(std::size_t input_dim, std::size_t embed_dim) {
    EmbedModel m;
    m.kind = ModelKind::linear;
    m.input_dim = input_dim;
    m.embed_dim = embed_dim;
    Matrix w(input_dim, embed_dim);
    for (std::size_t i = 0; i < std::min(input_dim, embed_dim); ++i) w(i, i) = 1.0;
    m.weights.push_back(std::move(w));
    m.validate();
    return m;
}

EmbedModel EmbedModel::make_mlp1(std::size_t input_dim, std::size_t hidden_dim, std::size_t embed_dim,
                                 std::uint64_t seed) {
    EmbedModel m;
    m.kind = ModelKind::mlp1;
    m.input_dim = input_dim;
    m.hidden_dim = hidden_dim;
    m.embed_dim = embed_dim;
    Matrix w1(input_dim, hidden_dim);
    Matrix w2(hidden_dim, embed_dim);
    const std::size_t r = std::min(input_dim, embed_dim);
    if (hidden_dim >= 2 * r) {
        for (std::size_t i = 0; i < r; ++i) {
            w1(i, i) = 1.0;
            w1(i, r + i) = -1.0;
            w2(i, i) = 1.0;
            w2(r + i, i) = -1.0;
        }
    } else {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> n1(0.0, std::sqrt(2.0 / static_cast<double>(input_dim)));
        std::normal_distribution<double> n2(0.0, std::sqrt(2.0 / static_cast<double>(hidden_dim)));
        for (auto& v : w1.data()) v = n1(rng);
        for (auto& v : w2.data()) v = n2(rng);
    }
    m.weights.push_back(std::move(w1));
    m.weights.push_back(std::move(w2));
    m.validate();
    return m;
}

EmbedModel EmbedModel::make(ModelKind kind, std::size_t input_dim, std::size_t embed_dim, std::size_t hidden_dim,
                            std::uint64_t seed) {
    if (input_dim == 0) throw ValidationError("model input dimension must be positive");
    switch (kind) {
        case ModelKind::identity:
            if (embed_dim != 0 && embed_dim != input_dim) {
                throw ValidationError("identity model requires embed_dim == input dimension");
            }
            return make_identity(input_dim);
        case ModelKind::linear:
            return make_linear(input_dim, embed_dim ? embed_dim : std::min<std::size_t>(input_dim, 32));
        case ModelKind::mlp1: {
            const std::size_t e = embed_dim ? embed_dim : std::min<std::size_t>(input_dim, 32);
            const std::size_t h = hidden_dim ? hidden_dim : 2 * std::min(input_dim, e);
            return make_mlp1(input_dim, h, e, seed);
        }
    }
    throw ValidationError("unknown model kind");
}

void EmbedModel::validate() const {
    if (input_dim == 0 || embed_dim == 0) throw ValidationError("model dimensions must be positive");
    switch (kind) {
        case ModelKind::identity:
            if (!weights.empty() || embed_dim != input_dim) throw ValidationError("malformed identity model");
            break;
        case ModelKind::linear:
            if (weights.size() != 1 || weights[0].rows() != input_dim || weights[0].cols() != embed_dim) {
                throw ValidationError("malformed linear model");
            }
            break;
        case ModelKind::mlp1:
            if (hidden_dim == 0 || weights.size() != 2 || weights[0].rows() != input_dim ||
                weights[0].cols() != hidden_dim || weights[1].rows() != hidden_dim || weights[1].cols() != embed_dim) {
                throw ValidationError("malformed mlp1 model");
            }
            break;
    }
    for (const auto& w : weights) {
        if (!w.all_finite()) throw ValidationError("model parameters contain NaN or Inf");
    }
}

Matrix forward(const EmbedModel& model, const Matrix& inputs) {
    require_input_dim(model, inputs);
    switch (model.kind) {
        case ModelKind::identity: return inputs;
        case ModelKind::linear: return matmul(inputs, model.weights[0]);
        case ModelKind::mlp1: return matmul(relu(matmul(inputs, model.weights[0])), model.weights[1]);
    }
    return inputs;
}

std::vector<Matrix> weight_gradients(const EmbedModel& model, const Matrix& inputs, const Matrix& output_grad) {
    require_input_dim(model, inputs);
    if (output_grad.rows() != inputs.rows() || output_grad.cols() != model.embed_dim) {
        throw ValidationError("output gradient shape does not match the batch");
    }
    switch (model.kind) {
        case ModelKind::identity: return {};
        case ModelKind::linear: return {matmul_transpose_a(inputs, output_grad)};
        case ModelKind::mlp1: {
            const Matrix pre = matmul(inputs, model.weights[0]);
            const Matrix act = relu(pre);
            Matrix grad_w2 = matmul_transpose_a(act, output_grad);
            Matrix grad_act = matmul_transpose_b(output_grad, model.weights[1]);
            for (std::size_t i = 0; i < grad_act.data().size(); ++i) {
                if (!(pre.data()[i] > 0.0)) grad_act.data()[i] = 0.0;
            }
            Matrix grad_w1 = matmul_transpose_a(inputs, grad_act);
            return {std::move(grad_w1), std::move(grad_w2)};
        }
    }
    return {};
}

Matrix embed_all(const EmbedModel& model, const Matrix& features) { return forward(model, features); }

OptimizerState OptimizerState::for_model(const EmbedModel& model, double lr, double momentum, double weight_decay) {
    OptimizerState opt;
    opt.lr = lr;
    opt.momentum = momentum;
    opt.weight_decay = weight_decay;
    for (const auto& w : model.weights) opt.velocity.emplace_back(w.rows(), w.cols());
    opt.validate();
    return opt;
}

void OptimizerState::validate() const {
    if (!std::isfinite(lr) || lr < 0.0) throw ValidationError("learning rate must be finite and non-negative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0,1)");
    if (!std::isfinite(weight_decay) || weight_decay < 0.0) throw ValidationError("weight decay must be >= 0");
}

void sgd_step(EmbedModel& model, std::span<const Matrix> grads, OptimizerState& opt) {
    if (grads.size() != model.weights.size() || opt.velocity.size() != model.weights.size()) {
        throw ValidationError("sgd_step: gradient/velocity count does not match the model");
    }
    for (std::size_t t = 0; t < model.weights.size(); ++t) {
        auto& w = model.weights[t].data();
        auto& v = opt.velocity[t].data();
        const auto& g = grads[t].data();
        if (g.size() != w.size() || v.size() != w.size()) throw ValidationError("sgd_step: shape mismatch");
        for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = opt.momentum * v[i] + (g[i] + opt.weight_decay * w[i]);
            w[i] -= opt.lr * v[i];
        }
    }
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
    if (!(margin > 0.0) || !std::isfinite(margin)) throw ValidationError("train config: margin must be positive");
    if (p < 2) throw ValidationError("train config: p must be >= 2 so that negatives exist");
    if (k < 1) throw ValidationError("train config: k must be >= 1");
}

TrainResult train_epochs(EmbedModel model, const Matrix& features, std::span<const Label> pseudo_labels,
                         const TrainConfig& cfg, OptimizerState& opt) {
    cfg.validate();
    opt.validate();
    model.validate();
    if (pseudo_labels.size() != features.rows()) {
        throw ValidationError("train: pseudo label count differs from sample count");
    }
    if (opt.velocity.size() != model.weights.size()) {
        throw ValidationError("train: optimizer state does not match the model");
    }

    TrainResult result;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto plan = build_epoch_plan(pseudo_labels, cfg.p, cfg.k, cfg.seed + epoch);
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < plan.batches.size(); ++b) {
            const auto [inputs, labels] = materialize_batch(plan.batches[b], features);
            const Matrix embeddings = forward(model, inputs);
            const auto step = batch_hard_loss_and_gradient(embeddings, labels, cfg.margin);
            if (!std::isfinite(step.report.loss)) {
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(b));
            }
            loss_sum += step.report.loss;
            const auto grads = weight_gradients(model, inputs, step.gradient);
            sgd_step(model, grads, opt);
            for (const auto& w : model.weights) {
                if (!w.all_finite()) {
                    throw TrainingError("non-finite parameters after epoch " + std::to_string(epoch) + ", batch " +
                                        std::to_string(b));
                }
            }
            ++result.steps;
        }
        result.epoch_mean_loss.push_back(plan.batches.empty() ? 0.0
                                                              : loss_sum / static_cast<double>(plan.batches.size()));
    }
    result.model = std::move(model);
    return result;
}

TrainResult train_epochs(EmbedModel model, const Matrix& features, const ClusterState& state,
                         const TrainConfig& cfg, OptimizerState& opt) {
    return train_epochs(std::move(model), features, std::span<const Label>(state.labels), cfg, opt);
}

void save_model(const EmbedModel& model, const std::filesystem::path& path) {
    model.validate();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(kMagic, sizeof kMagic);
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint32_t>(model.kind));
    write_pod(out, static_cast<std::uint64_t>(model.input_dim));
    write_pod(out, static_cast<std::uint64_t>(model.hidden_dim));
    write_pod(out, static_cast<std::uint64_t>(model.embed_dim));
    for (const auto& w : model.weights) {
        out.write(reinterpret_cast<const char*>(w.data().data()),
                  static_cast<std::streamsize>(w.data().size() * sizeof(double)));
    }
    if (!out) throw Error("failed writing " + path.string());
}

EmbedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw Error(path.string() + " is not a model checkpoint");
    }
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != kVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
    const auto kind = read_pod<std::uint32_t>(in, path);
    if (kind > static_cast<std::uint32_t>(ModelKind::mlp1)) throw Error("unknown model kind in checkpoint");

    EmbedModel model;
    model.kind = static_cast<ModelKind>(kind);
    model.input_dim = read_pod<std::uint64_t>(in, path);
    model.hidden_dim = read_pod<std::uint64_t>(in, path);
    model.embed_dim = read_pod<std::uint64_t>(in, path);
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    if (model.kind == ModelKind::linear) shapes = {{model.input_dim, model.embed_dim}};
    if (model.kind == ModelKind::mlp1) shapes = {{model.input_dim, model.hidden_dim}, {model.hidden_dim, model.embed_dim}};
    for (const auto& [r, c] : shapes) {
        Matrix w(r, c);
        if (!in.read(reinterpret_cast<char*>(w.data().data()), static_cast<std::streamsize>(r * c * sizeof(double)))) {
            throw Error("truncated checkpoint " + path.string());
        }
        model.weights.push_back(std::move(w));
    }
    model.validate();
    return model;
}

}  // namespace hct
