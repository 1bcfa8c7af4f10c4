#include "roverad/net.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "roverad/error.hpp"
#include "roverad/io.hpp"
#include "roverad/random.hpp"

namespace roverad {

namespace {

using Eigen::Index;

Index idx(std::size_t n) { return static_cast<Index>(n); }

void activate(Activation a, const Eigen::MatrixXd& pre, Eigen::MatrixXd& out) {
    switch (a) {
        case Activation::Linear: out = pre; break;
        case Activation::Sigmoid: out = (1.0 + (-pre.array()).exp()).inverse().matrix(); break;
    }
}

// delta <- delta * f'(pre), using the cached activation where cheaper.
void apply_derivative(Activation a, const Eigen::MatrixXd& act, Eigen::MatrixXd& delta) {
    if (a == Activation::Sigmoid) {
        delta.array() *= act.array() * (1.0 - act.array());
    }
}

nlohmann::json train_config_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.adam.learning_rate},
            {"beta1", c.adam.beta1},
            {"beta2", c.adam.beta2},
            {"epsilon", c.adam.epsilon},
            {"validation_fraction", c.validation_fraction},
            {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.adam.learning_rate = j.at("learning_rate").get<double>();
    c.adam.beta1 = j.at("beta1").get<double>();
    c.adam.beta2 = j.at("beta2").get<double>();
    c.adam.epsilon = j.at("epsilon").get<double>();
    c.validation_fraction = j.at("validation_fraction").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace

std::string_view activation_name(Activation a) { return a == Activation::Linear ? "linear" : "sigmoid"; }

Activation parse_activation(std::string_view name) {
    if (name == "linear") return Activation::Linear;
    if (name == "sigmoid") return Activation::Sigmoid;
    throw SchemaError("unknown activation '" + std::string(name) + "'");
}

std::vector<LayerSpec> architecture(Variant variant) {
    constexpr auto lin = Activation::Linear;
    constexpr auto sig = Activation::Sigmoid;
    if (variant == Variant::Prime) {
        return {{322, lin}, {182, sig}, {143, lin}, {143, lin}, {182, sig}, {322, lin}};
    }
    return {{301, lin}, {176, sig}, {141, lin}, {141, lin}, {176, sig}, {301, lin}};
}

std::size_t input_dim(Variant variant) {
    return variant == Variant::Prime ? kPrimeFeatureCount : kRefinedFeatureCount;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw DataError("epochs must be >= 1");
    if (batch_size < 1) throw DataError("batch size must be >= 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw DataError("validation fraction must lie in (0, 1)");
    }
    if (!(adam.learning_rate > 0.0) || !(adam.epsilon > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
        !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
        throw DataError("invalid ADAM hyperparameters");
    }
}

Autoencoder::Autoencoder(std::size_t input_dim, std::vector<DenseLayer> layers, std::optional<Variant> variant,
                         std::uint64_t seed)
    : input_dim_(input_dim), layers_(std::move(layers)), variant_(variant), seed_(seed) {
    if (layers_.empty()) {
        throw DataError("autoencoder needs at least one layer");
    }
    std::size_t in = input_dim_;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (layer.in_dim() != in || static_cast<std::size_t>(layer.bias.size()) != layer.out_dim() ||
            layer.out_dim() == 0) {
            throw DataError("layer " + std::to_string(l + 1) + " has inconsistent shape");
        }
        in = layer.out_dim();
    }
    if (variant_) {
        const auto arch = architecture(*variant_);
        bool ok = input_dim_ == roverad::input_dim(*variant_) && arch.size() == layers_.size();
        for (std::size_t l = 0; ok && l < arch.size(); ++l) {
            ok = arch[l].out_dim == layers_[l].out_dim() && arch[l].activation == layers_[l].activation;
        }
        if (!ok) {
            throw ArtifactError("layer dims/activations do not match the " + std::string(variant_name(*variant_)) +
                                " architecture");
        }
    }
}

std::size_t Autoencoder::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.parameter_count();
    return n;
}

Eigen::MatrixXd Autoencoder::reconstruct(const Eigen::MatrixXd& x) const { return forward(*this, x).output(); }

Eigen::MatrixXd Autoencoder::encode(const Eigen::MatrixXd& x) const {
    return forward(*this, x).activations[bottleneck_layer() + 1];
}

Autoencoder build_model(std::size_t input_dim, std::span<const LayerSpec> specs, std::uint64_t seed,
                        std::optional<Variant> variant) {
    Rng rng(mix_seed(seed, 0));
    std::vector<DenseLayer> layers;
    std::size_t in = input_dim;
    for (const auto& spec : specs) {
        if (spec.out_dim < 1) throw DataError("layer width must be >= 1");
        DenseLayer layer;
        layer.activation = spec.activation;
        const double limit = std::sqrt(6.0 / static_cast<double>(in + spec.out_dim));
        layer.weights.resize(idx(spec.out_dim), idx(in));
        // Fill row by row so the draw order matches the row-major file layout.
        for (Index r = 0; r < layer.weights.rows(); ++r) {
            for (Index c = 0; c < layer.weights.cols(); ++c) {
                layer.weights(r, c) = rng.uniform(-limit, limit);
            }
        }
        layer.bias = Eigen::VectorXd::Zero(idx(spec.out_dim));
        layers.push_back(std::move(layer));
        in = spec.out_dim;
    }
    return Autoencoder(input_dim, std::move(layers), variant, seed);
}

Autoencoder build_model(Variant variant, std::uint64_t seed) {
    const auto arch = architecture(variant);
    return build_model(input_dim(variant), arch, seed, variant);
}

ForwardCache forward(const Autoencoder& model, const Eigen::MatrixXd& x) {
    if (static_cast<std::size_t>(x.rows()) != model.input_dim()) {
        throw DataError("forward: input has " + std::to_string(x.rows()) + " rows, model expects " +
                        std::to_string(model.input_dim()));
    }
    ForwardCache cache;
    const auto& layers = model.layers();
    cache.pre.resize(layers.size());
    cache.activations.resize(layers.size() + 1);
    cache.activations[0] = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        cache.pre[l].noalias() = layers[l].weights * cache.activations[l];
        cache.pre[l].colwise() += layers[l].bias;
        activate(layers[l].activation, cache.pre[l], cache.activations[l + 1]);
    }
    return cache;
}

double mse_loss(const Eigen::MatrixXd& reconstruction, const Eigen::MatrixXd& target) {
    if (reconstruction.rows() != target.rows() || reconstruction.cols() != target.cols()) {
        throw DataError("mse_loss: shape mismatch");
    }
    if (target.size() == 0) {
        throw DataError("mse_loss: empty input");
    }
    return (reconstruction - target).squaredNorm() / static_cast<double>(target.size());
}

Gradients backward(const Autoencoder& model, const ForwardCache& cache, const Eigen::MatrixXd& x) {
    const auto& layers = model.layers();
    if (cache.activations.size() != layers.size() + 1 || cache.pre.size() != layers.size()) {
        throw DataError("backward: cache does not match model depth");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (static_cast<std::size_t>(cache.pre[l].rows()) != layers[l].out_dim() ||
            cache.pre[l].cols() != x.cols()) {
            throw DataError("backward: cache shape does not match layer " + std::to_string(l + 1));
        }
    }
    if (cache.activations[0].rows() != x.rows() || cache.activations[0].cols() != x.cols() ||
        cache.activations[0] != x) {
        throw DataError("backward: stale cache (input differs from the cached forward pass)");
    }
    if (model.output_dim() != static_cast<std::size_t>(x.rows())) {
        throw DataError("backward: model output dim differs from input dim");
    }

    Gradients g;
    g.weights.resize(layers.size());
    g.biases.resize(layers.size());

    Eigen::MatrixXd delta = (2.0 / static_cast<double>(x.size())) * (cache.output() - x);
    for (std::size_t l = layers.size(); l-- > 0;) {
        apply_derivative(layers[l].activation, cache.activations[l + 1], delta);
        g.weights[l].noalias() = delta * cache.activations[l].transpose();
        g.biases[l] = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd prev;
            prev.noalias() = layers[l].weights.transpose() * delta;
            delta = std::move(prev);
        }
    }
    return g;
}

void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> first_moment,
               std::span<double> second_moment, std::uint64_t step, const AdamConfig& config) {
    if (grads.size() != params.size() || first_moment.size() != params.size() ||
        second_moment.size() != params.size()) {
        throw DataError("adam_step: shape mismatch");
    }
    if (step < 1) {
        throw DataError("adam_step: step index must be >= 1");
    }
    const double t = static_cast<double>(step);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    const auto n = idx(params.size());
    Eigen::Map<Eigen::ArrayXd> theta(params.data(), n);
    Eigen::Map<const Eigen::ArrayXd> g(grads.data(), n);
    Eigen::Map<Eigen::ArrayXd> m(first_moment.data(), n);
    Eigen::Map<Eigen::ArrayXd> v(second_moment.data(), n);
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.square();
    theta -= config.learning_rate * (m / bc1) / ((v / bc2).sqrt() + config.epsilon);
}

AdamState::AdamState(const Autoencoder& model) {
    for (const auto& l : model.layers()) {
        m_w_.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        v_w_.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        m_b_.push_back(Eigen::VectorXd::Zero(l.bias.size()));
        v_b_.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
}

void AdamState::apply(Autoencoder& model, const Gradients& grads, const AdamConfig& config) {
    auto& layers = model.layers();
    if (grads.weights.size() != layers.size() || grads.biases.size() != layers.size() || m_w_.size() != layers.size()) {
        throw DataError("AdamState::apply: gradient/model depth mismatch");
    }
    ++step_;
    auto flat = [](auto& m) { return std::span<double>(m.data(), static_cast<std::size_t>(m.size())); };
    auto cflat = [](const auto& m) { return std::span<const double>(m.data(), static_cast<std::size_t>(m.size())); };
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (grads.weights[l].rows() != layers[l].weights.rows() || grads.weights[l].cols() != layers[l].weights.cols()) {
            throw DataError("AdamState::apply: gradient shape mismatch at layer " + std::to_string(l + 1));
        }
        adam_step(flat(layers[l].weights), cflat(grads.weights[l]), flat(m_w_[l]), flat(v_w_[l]), step_, config);
        adam_step(flat(layers[l].bias), cflat(grads.biases[l]), flat(m_b_[l]), flat(v_b_[l]), step_, config);
    }
}

TrainReport train(Autoencoder& model, const Eigen::MatrixXd& samples, const TrainConfig& config,
                  const EpochObserver& observer) {
    config.validate();
    const auto n = static_cast<std::size_t>(samples.rows());
    if (n < 10) {
        throw DataError("training needs at least 10 samples, got " + std::to_string(n));
    }
    if (static_cast<std::size_t>(samples.cols()) != model.input_dim() || model.output_dim() != model.input_dim()) {
        throw DataError("training data has " + std::to_string(samples.cols()) + " features, model expects " +
                        std::to_string(model.input_dim()));
    }
    if (!samples.allFinite()) {
        throw DataError("training data contains non-finite values");
    }

    const auto started = std::chrono::steady_clock::now();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng split_rng(mix_seed(config.seed, 1));
    split_rng.shuffle(std::span<std::size_t>(order));
    auto n_val = static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(n)));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);

    // Column-major copies so a batch is a set of contiguous columns.
    const Index d = samples.cols();
    Eigen::MatrixXd val(d, idx(n_val));
    for (std::size_t i = 0; i < n_val; ++i) val.col(idx(i)) = samples.row(idx(order[i])).transpose();
    std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    Eigen::MatrixXd tr(d, idx(train_rows.size()));
    for (std::size_t i = 0; i < train_rows.size(); ++i) tr.col(idx(i)) = samples.row(idx(train_rows[i])).transpose();

    TrainReport report;
    report.train_rows = train_rows.size();
    report.val_rows = n_val;
    report.threads = Eigen::nbThreads();

    Rng shuffle_rng(mix_seed(config.seed, 2));
    AdamState adam(model);
    std::vector<std::size_t> perm(train_rows.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Eigen::MatrixXd batch;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_rng.shuffle(std::span<std::size_t>(perm));
        double weighted = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < perm.size(); start += config.batch_size, ++batch_index) {
            const std::size_t count = std::min(config.batch_size, perm.size() - start);
            batch.resize(d, idx(count));
            for (std::size_t j = 0; j < count; ++j) batch.col(idx(j)) = tr.col(idx(perm[start + j]));

            const auto cache = forward(model, batch);
            const double loss = mse_loss(cache.output(), batch);
            if (!std::isfinite(loss)) {
                throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_index + 1));
            }
            weighted += loss * static_cast<double>(count);
            adam.apply(model, backward(model, cache, batch), config.adam);
        }
        const double train_loss = weighted / static_cast<double>(perm.size());
        const double val_loss = mse_loss(model.reconstruct(val), val);
        if (!std::isfinite(val_loss)) {
            throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
        }
        report.train_loss.push_back(train_loss);
        report.val_loss.push_back(val_loss);
        if (observer) observer(epoch, train_loss, val_loss);
    }
    model.set_train_config(config);
    report.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

std::string model_to_json(const Autoencoder& model) {
    nlohmann::json j;
    j["format"] = "roverad-autoencoder";
    j["version"] = 1;
    j["variant"] = model.variant() ? std::string(variant_name(*model.variant())) : std::string("custom");
    std::vector<std::size_t> dims;
    nlohmann::json activations = nlohmann::json::array();
    nlohmann::json weights = nlohmann::json::array();
    nlohmann::json biases = nlohmann::json::array();
    for (const auto& l : model.layers()) {
        dims.push_back(l.out_dim());
        activations.push_back(activation_name(l.activation));
        nlohmann::json w = nlohmann::json::array();
        for (Index r = 0; r < l.weights.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(l.weights.cols()));
            for (Index c = 0; c < l.weights.cols(); ++c) row[static_cast<std::size_t>(c)] = l.weights(r, c);
            w.push_back(std::move(row));
        }
        weights.push_back(std::move(w));
        biases.push_back(std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size()));
    }
    j["input_dim"] = model.input_dim();
    j["dims"] = dims;
    j["activations"] = std::move(activations);
    j["weights"] = std::move(weights);
    j["biases"] = std::move(biases);
    j["seed"] = model.seed();
    j["train_config"] = model.train_config() ? train_config_json(*model.train_config()) : nlohmann::json(nullptr);
    return j.dump() + "\n";
}

Autoencoder model_from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("model JSON parse error: ") + e.what());
    }
    try {
        const auto variant_str = j.at("variant").get<std::string>();
        std::optional<Variant> variant;
        if (variant_str != "custom") variant = parse_variant(variant_str);
        // dims lists layer widths; prepend the input width so layer l maps dims[l] -> dims[l + 1].
        auto dims = j.at("dims").get<std::vector<std::size_t>>();
        dims.insert(dims.begin(), j.at("input_dim").get<std::size_t>());
        const auto& acts = j.at("activations");
        const auto& weights = j.at("weights");
        const auto& biases = j.at("biases");
        if (dims.size() < 2 || acts.size() != dims.size() - 1 || weights.size() != dims.size() - 1 ||
            biases.size() != dims.size() - 1) {
            throw SchemaError("model JSON: dims/activations/weights/biases lengths disagree");
        }
        std::vector<DenseLayer> layers;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            DenseLayer layer;
            layer.activation = parse_activation(acts[l].get<std::string>());
            const auto in = dims[l], out = dims[l + 1];
            const auto& w = weights[l];
            if (w.size() != out) throw SchemaError("model JSON: layer " + std::to_string(l + 1) + " has wrong row count");
            layer.weights.resize(idx(out), idx(in));
            for (std::size_t r = 0; r < out; ++r) {
                const auto row = w[r].get<std::vector<double>>();
                if (row.size() != in) {
                    throw SchemaError("model JSON: layer " + std::to_string(l + 1) + " has wrong column count");
                }
                for (std::size_t c = 0; c < in; ++c) layer.weights(idx(r), idx(c)) = row[c];
            }
            const auto b = biases[l].get<std::vector<double>>();
            if (b.size() != out) throw SchemaError("model JSON: layer " + std::to_string(l + 1) + " has wrong bias length");
            layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), idx(out));
            if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
                throw SchemaError("model JSON: non-finite parameter in layer " + std::to_string(l + 1));
            }
            layers.push_back(std::move(layer));
        }
        Autoencoder model(dims.front(), std::move(layers), variant, j.at("seed").get<std::uint64_t>());
        if (j.contains("train_config") && !j["train_config"].is_null()) {
            model.set_train_config(train_config_from_json(j["train_config"]));
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("model JSON schema error: ") + e.what());
    }
}

void save_model(const Autoencoder& model, const std::filesystem::path& path) {
    write_text_file(path, model_to_json(model));
}

Autoencoder load_model(const std::filesystem::path& path, std::optional<Variant> expected) {
    auto model = model_from_json(read_text_file(path));
    if (expected && model.variant() != expected) {
        throw ArtifactError(path.string() + ": model variant is " +
                            (model.variant() ? std::string(variant_name(*model.variant())) : std::string("custom")) +
                            ", expected " + std::string(variant_name(*expected)));
    }
    return model;
}

void write_loss_curve(const TrainReport& report, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
        out << (e + 1) << ',' << detail::format_double(report.train_loss[e]) << ','
            << detail::format_double(report.val_loss[e]) << '\n';
    }
    write_text_file(path, out.str());
}

}  // namespace roverad
