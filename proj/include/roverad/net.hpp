#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "roverad/features.hpp"

namespace roverad {

enum class Activation : std::uint8_t { Linear, Sigmoid };
std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

struct LayerSpec {
    std::size_t out_dim = 1;
    Activation activation = Activation::Linear;
};

/// Six dense layers, symmetric around a linear bottleneck:
///   prime   322 -> 322 lin, 182 sig, 143 lin, 143 lin, 182 sig, 322 lin
///   refined 301 -> 301 lin, 176 sig, 141 lin, 141 lin, 176 sig, 301 lin
std::vector<LayerSpec> architecture(Variant variant);
std::size_t input_dim(Variant variant);

struct DenseLayer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd bias;
    Activation activation = Activation::Linear;

    std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }
    std::size_t parameter_count() const { return in_dim() * out_dim() + out_dim(); }
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 256;
    AdamConfig adam;
    double validation_fraction = 0.2;
    std::uint64_t seed = 42;

    void validate() const;
};

class Autoencoder {
public:
    Autoencoder() = default;
    /// `variant` is empty for ad-hoc (non-pipeline) networks.
    Autoencoder(std::size_t input_dim, std::vector<DenseLayer> layers, std::optional<Variant> variant = {},
                std::uint64_t seed = 0);

    std::size_t input_dim() const { return input_dim_; }
    std::size_t output_dim() const { return layers_.empty() ? input_dim_ : layers_.back().out_dim(); }
    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }
    std::optional<Variant> variant() const { return variant_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t parameter_count() const;
    /// Index of the layer whose output is the latent code (middle of the stack).
    std::size_t bottleneck_layer() const { return layers_.size() < 2 ? 0 : layers_.size() / 2 - 1; }

    const std::optional<TrainConfig>& train_config() const { return train_config_; }
    void set_train_config(const TrainConfig& cfg) { train_config_ = cfg; }

    /// Output for a batch; columns are samples.
    Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& x) const;
    /// Latent code (output of the bottleneck layer); columns are samples.
    Eigen::MatrixXd encode(const Eigen::MatrixXd& x) const;

private:
    std::size_t input_dim_ = 0;
    std::vector<DenseLayer> layers_;
    std::optional<Variant> variant_;
    std::uint64_t seed_ = 0;
    std::optional<TrainConfig> train_config_;
};

/// Glorot-uniform weights from a seeded generator, zero biases.
Autoencoder build_model(std::size_t input_dim, std::span<const LayerSpec> specs, std::uint64_t seed,
                        std::optional<Variant> variant = {});
Autoencoder build_model(Variant variant, std::uint64_t seed);

/// Pre-activations and activations of every layer. activations[0] is the input.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> pre;
    std::vector<Eigen::MatrixXd> activations;

    const Eigen::MatrixXd& output() const { return activations.back(); }
};

/// Columns of `x` are samples; a VectorXd is a batch of one.
ForwardCache forward(const Autoencoder& model, const Eigen::MatrixXd& x);

/// Mean of squared residuals over every element.
double mse_loss(const Eigen::MatrixXd& reconstruction, const Eigen::MatrixXd& target);

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

/// Exact gradients of mse_loss(forward(x), x). `cache` must come from forward(model, x).
Gradients backward(const Autoencoder& model, const ForwardCache& cache, const Eigen::MatrixXd& x);

/// One ADAM update of a flat parameter block; `step` is 1-based.
void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> first_moment,
               std::span<double> second_moment, std::uint64_t step, const AdamConfig& config);

/// Moment buffers for every parameter of a model.
class AdamState {
public:
    explicit AdamState(const Autoencoder& model);

    std::uint64_t step_count() const { return step_; }
    /// Advances the step counter and updates all parameters in place.
    void apply(Autoencoder& model, const Gradients& grads, const AdamConfig& config);

private:
    std::vector<Eigen::MatrixXd> m_w_, v_w_;
    std::vector<Eigen::VectorXd> m_b_, v_b_;
    std::uint64_t step_ = 0;
};

struct TrainReport {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::size_t train_rows = 0;
    std::size_t val_rows = 0;
    int threads = 1;
    double duration_s = 0.0;

    double final_train_loss() const { return train_loss.empty() ? 0.0 : train_loss.back(); }
    double final_val_loss() const { return val_loss.empty() ? 0.0 : val_loss.back(); }
};

using EpochObserver = std::function<void(std::size_t epoch, double train_loss, double val_loss)>;

/// Trains `model` in place to reproduce the rows of `samples` (rows = samples).
/// Deterministic for a given seed: split, shuffling and mini-batching all derive from it.
TrainReport train(Autoencoder& model, const Eigen::MatrixXd& samples, const TrainConfig& config,
                  const EpochObserver& observer = {});

std::string model_to_json(const Autoencoder& model);
Autoencoder model_from_json(std::string_view text);
void save_model(const Autoencoder& model, const std::filesystem::path& path);
/// Throws ArtifactError when `expected` is given and the file holds another variant.
Autoencoder load_model(const std::filesystem::path& path, std::optional<Variant> expected = {});

/// Loss curve CSV: epoch,train_loss,val_loss.
void write_loss_curve(const TrainReport& report, const std::filesystem::path& path);

}  // namespace roverad
