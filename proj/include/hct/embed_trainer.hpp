#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hct/hier_cluster.hpp"
#include "hct/matrix.hpp"

namespace hct {

enum class ModelKind { identity, linear, mlp1 };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// Trainable embedding map applied to row vectors, without biases.
///   identity: y = x
///   linear:   y = x W            (W: d x e)
///   mlp1:     y = relu(x W1) W2  (W1: d x h, W2: h x e)
struct EmbedModel {
    ModelKind kind = ModelKind::identity;
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t embed_dim = 0;
    std::vector<Matrix> weights;

    static EmbedModel make_identity(std::size_t dim);

    /// Identity on the leading min(d,e) block, zeros elsewhere.
    static EmbedModel make_linear(std::size_t input_dim, std::size_t embed_dim);

    /// With hidden_dim >= 2*min(d,e) the map starts as the padded identity
    /// (relu(x) - relu(-x) = x); otherwise weights are He-initialised from `seed`.
    static EmbedModel make_mlp1(std::size_t input_dim, std::size_t hidden_dim, std::size_t embed_dim,
                                std::uint64_t seed = 0);

    /// `embed_dim` 0 means min(d, 32); `hidden_dim` 0 means 2*min(d, e).
    static EmbedModel make(ModelKind kind, std::size_t input_dim, std::size_t embed_dim = 0,
                           std::size_t hidden_dim = 0, std::uint64_t seed = 0);

    void validate() const;

    friend bool operator==(const EmbedModel&, const EmbedModel&) = default;
};

Matrix forward(const EmbedModel& model, const Matrix& inputs);

/// Gradients of a loss with respect to every weight matrix, given the inputs
/// and dLoss/dOutput. Same order as model.weights.
std::vector<Matrix> weight_gradients(const EmbedModel& model, const Matrix& inputs, const Matrix& output_grad);

/// Applies forward to every row; rows are independent so chunking does not
/// change the result.
Matrix embed_all(const EmbedModel& model, const Matrix& features);

/// SGD with momentum, coupled weight decay and no dampening:
///   v <- momentum * v + (grad + weight_decay * w);  w <- w - lr * v
struct OptimizerState {
    double lr = 6e-5;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::vector<Matrix> velocity;

    /// Zeroed velocity shaped like the model's weights.
    static OptimizerState for_model(const EmbedModel& model, double lr = 6e-5, double momentum = 0.9,
                                    double weight_decay = 5e-4);

    void validate() const;
};

void sgd_step(EmbedModel& model, std::span<const Matrix> grads, OptimizerState& opt);

struct TrainConfig {
    std::size_t epochs = 60;
    double margin = 0.5;
    std::size_t p = 16;
    std::size_t k = 4;
    std::uint64_t seed = 0;
    ModelKind model_kind = ModelKind::linear;
    std::size_t embed_dim = 0;
    std::size_t hidden_dim = 0;

    void validate() const;
};

struct TrainResult {
    EmbedModel model;
    std::vector<double> epoch_mean_loss;  // mean batch loss per epoch
    std::size_t steps = 0;
};

/// Runs cfg.epochs epochs of PK batches (epoch e uses seed cfg.seed + e),
/// back-propagating the batch-hard triplet loss through the model.
TrainResult train_epochs(EmbedModel model, const Matrix& features, std::span<const Label> pseudo_labels,
                         const TrainConfig& cfg, OptimizerState& opt);
TrainResult train_epochs(EmbedModel model, const Matrix& features, const ClusterState& state,
                         const TrainConfig& cfg, OptimizerState& opt);

/// Binary checkpoint: "HCTMODEL", u32 version, u32 kind, u64 dims x3, then
/// weights as little-endian float64 in row-major order.
void save_model(const EmbedModel& model, const std::filesystem::path& path);
EmbedModel load_model(const std::filesystem::path& path);

}  // namespace hct
