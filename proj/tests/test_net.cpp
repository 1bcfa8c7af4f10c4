#include <doctest.h>

#include <random>

#include "roverad/error.hpp"
#include "roverad/io.hpp"
#include "roverad/net.hpp"
#include "roverad/random.hpp"
#include "support.hpp"

using namespace roverad;

using testsupport::random_batch;
using testsupport::toy;

TEST_CASE("architectures") {
    const auto prime = build_model(Variant::Prime, 1);
    const auto refined = build_model(Variant::Refined, 1);
    const std::vector<std::size_t> pdims{322, 182, 143, 143, 182, 322};
    const std::vector<std::size_t> rdims{301, 176, 141, 141, 176, 301};
    const std::vector<Activation> acts{Activation::Linear, Activation::Sigmoid, Activation::Linear,
                                       Activation::Linear, Activation::Sigmoid, Activation::Linear};
    REQUIRE(prime.layers().size() == 6);
    REQUIRE(refined.layers().size() == 6);
    CHECK(prime.input_dim() == 322);
    CHECK(refined.input_dim() == 301);
    std::size_t pin = 322, rin = 301, ptotal = 0, rtotal = 0;
    for (std::size_t l = 0; l < 6; ++l) {
        CHECK(prime.layers()[l].out_dim() == pdims[l]);
        CHECK(prime.layers()[l].in_dim() == pin);
        CHECK(prime.layers()[l].activation == acts[l]);
        CHECK(refined.layers()[l].out_dim() == rdims[l]);
        CHECK(refined.layers()[l].in_dim() == rin);
        CHECK(refined.layers()[l].activation == acts[l]);
        ptotal += pin * pdims[l] + pdims[l];
        rtotal += rin * rdims[l] + rdims[l];
        pin = pdims[l];
        rin = rdims[l];
        CHECK(pdims[l] == pdims[5 - l]);
    }
    CHECK(prime.layers()[1].parameter_count() == 58786);
    CHECK(prime.parameter_count() == ptotal);
    CHECK(refined.parameter_count() == rtotal);
    CHECK(prime.bottleneck_layer() == 2);
    CHECK(prime.encode(Eigen::VectorXd::Zero(322)).rows() == 143);
    CHECK(refined.encode(Eigen::VectorXd::Zero(301)).rows() == 141);
    CHECK(143 < 322);
    CHECK(141 < 301);
}

TEST_CASE("glorot init and zero biases") {
    const auto m = build_model(Variant::Prime, 3);
    for (const auto& l : m.layers()) {
        const double bound = std::sqrt(6.0 / static_cast<double>(l.in_dim() + l.out_dim()));
        CHECK(l.weights.cwiseAbs().maxCoeff() <= bound);
        CHECK(l.weights.cwiseAbs().maxCoeff() > 0.9 * bound);
        CHECK(std::abs(l.weights.mean()) < 0.05 * bound);
        CHECK(l.bias.isZero(0.0));
    }
    const auto again = build_model(Variant::Prime, 3);
    const auto other = build_model(Variant::Prime, 4);
    CHECK(again.layers()[3].weights == m.layers()[3].weights);
    CHECK(other.layers()[3].weights != m.layers()[3].weights);
}

TEST_CASE("variant-tagged models reject foreign shapes") {
    std::vector<DenseLayer> layers(1);
    layers[0].weights = Eigen::MatrixXd::Identity(322, 322);
    layers[0].bias = Eigen::VectorXd::Zero(322);
    CHECK_THROWS_AS(Autoencoder(322, layers, Variant::Prime), ArtifactError);
    CHECK_NOTHROW(Autoencoder(322, layers));
    layers[0].bias = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(Autoencoder(322, layers), DataError);
}

TEST_CASE("forward") {
    SUBCASE("zero network") {
        auto m = build_model(4, std::vector<LayerSpec>{{3, Activation::Sigmoid}, {4, Activation::Linear}}, 1);
        for (auto& l : m.layers()) l.weights.setZero();
        // Sigmoid of 0 is 0.5, but the zero output layer ignores it.
        CHECK(m.reconstruct(Eigen::VectorXd::Ones(4)).isZero(0.0));
    }
    SUBCASE("identity") {
        std::vector<DenseLayer> layers(1);
        layers[0].weights = Eigen::MatrixXd::Identity(5, 5);
        layers[0].bias = Eigen::VectorXd::Zero(5);
        const Autoencoder m(5, layers);
        const Eigen::VectorXd x = random_batch(5, 1, 2);
        CHECK(m.reconstruct(x) == x);
    }
    SUBCASE("hand-set 2-2-2") {
        std::vector<DenseLayer> layers(2);
        layers[0].weights = (Eigen::MatrixXd(2, 2) << 1.0, -2.0, 0.5, 3.0).finished();
        layers[0].bias = Eigen::Vector2d(0.1, -0.2);
        layers[0].activation = Activation::Sigmoid;
        layers[1].weights = (Eigen::MatrixXd(2, 2) << 2.0, 0.0, -1.0, 1.5).finished();
        layers[1].bias = Eigen::Vector2d(0.0, 0.3);
        const Autoencoder m(2, layers);
        const Eigen::Vector2d x(0.4, -0.7);

        const double z1 = 1.0 * 0.4 - 2.0 * -0.7 + 0.1;
        const double z2 = 0.5 * 0.4 + 3.0 * -0.7 - 0.2;
        const double h1 = 1.0 / (1.0 + std::exp(-z1));
        const double h2 = 1.0 / (1.0 + std::exp(-z2));
        const auto cache = forward(m, x);
        CHECK(std::abs(cache.pre[0](0) - z1) < 1e-12);
        CHECK(std::abs(cache.activations[1](1) - h2) < 1e-12);
        CHECK(std::abs(cache.output()(0) - 2.0 * h1) < 1e-12);
        CHECK(std::abs(cache.output()(1) - (-h1 + 1.5 * h2 + 0.3)) < 1e-12);
    }
    SUBCASE("dimension mismatch") {
        const auto m = build_model(4, std::vector<LayerSpec>{{2, Activation::Linear}, {4, Activation::Linear}}, 1);
        CHECK_THROWS_AS(forward(m, Eigen::VectorXd::Zero(3)), DataError);
    }
}

TEST_CASE("mse loss") {
    const Eigen::Vector2d x(1.0, 2.0);
    CHECK(mse_loss(x, x) == 0.0);
    CHECK(mse_loss(Eigen::Vector2d(2.0, 3.0), x) == 1.0);
    CHECK(mse_loss(Eigen::Vector2d(4.0, 6.0), x) == 12.5);
    CHECK_THROWS_AS(mse_loss(Eigen::Vector3d::Zero(), x), DataError);
    // Batch loss is the mean over every element.
    const Eigen::MatrixXd a = (Eigen::MatrixXd(2, 2) << 1, 0, 0, 3).finished();
    CHECK(mse_loss(a, Eigen::MatrixXd::Zero(2, 2)) == 2.5);
}

TEST_CASE("backprop matches central differences") {
    const std::vector<LayerSpec> ae{{6, Activation::Linear}, {4, Activation::Sigmoid}, {4, Activation::Linear},
                                    {6, Activation::Sigmoid}, {10, Activation::Linear}};
    const auto m = toy(10, ae, 17);
    CHECK(testsupport::gradient_check(m, random_batch(10, 7, 3)) < 1e-5);

    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed * 31);
        const auto d = static_cast<std::size_t>(3 + rng.below(10));
        std::vector<LayerSpec> specs;
        const auto depth = 1 + rng.below(5);
        for (std::uint64_t l = 0; l + 1 < depth; ++l) {
            specs.push_back({static_cast<std::size_t>(1 + rng.below(12)),
                             rng.below(2) ? Activation::Sigmoid : Activation::Linear});
        }
        specs.push_back({d, rng.below(2) ? Activation::Sigmoid : Activation::Linear});
        const auto net = toy(d, specs, seed);
        const auto x = random_batch(static_cast<Eigen::Index>(d), 1 + static_cast<Eigen::Index>(rng.below(5)), seed + 7);
        CHECK(testsupport::gradient_check(net, x) < 1e-5);
    }
}

TEST_CASE("backward special cases") {
    SUBCASE("stationary point has zero gradient") {
        std::vector<DenseLayer> layers(2);
        layers[0].weights = Eigen::MatrixXd::Identity(3, 3);
        layers[0].bias = Eigen::VectorXd::Zero(3);
        layers[1] = layers[0];
        const Autoencoder m(3, layers);
        const auto x = random_batch(3, 4, 5);
        const auto g = backward(m, forward(m, x), x);
        for (std::size_t l = 0; l < 2; ++l) {
            CHECK(g.weights[l].cwiseAbs().maxCoeff() < 1e-10);
            CHECK(g.biases[l].cwiseAbs().maxCoeff() < 1e-10);
        }
    }
    SUBCASE("output bias gradient is 2/d times the residual") {
        const auto m = toy(5, std::vector<LayerSpec>{{3, Activation::Sigmoid}, {5, Activation::Linear}}, 9);
        const Eigen::VectorXd x = random_batch(5, 1, 6);
        const auto cache = forward(m, x);
        const auto g = backward(m, cache, x);
        const Eigen::VectorXd expect = (2.0 / 5.0) * (cache.output() - x);
        CHECK((g.biases.back() - expect).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("stale cache is rejected") {
        const auto m = toy(4, std::vector<LayerSpec>{{4, Activation::Linear}}, 2);
        const auto x = random_batch(4, 2, 1);
        const auto cache = forward(m, x);
        CHECK_THROWS_AS(backward(m, cache, random_batch(4, 2, 2)), DataError);
        const auto deeper = toy(4, std::vector<LayerSpec>{{3, Activation::Linear}, {4, Activation::Linear}}, 2);
        CHECK_THROWS_AS(backward(deeper, cache, x), DataError);
    }
}

TEST_CASE("adam step") {
    const AdamConfig cfg;
    SUBCASE("first step closed form") {
        std::array<double, 1> p{0.5}, g{1.0}, m{0.0}, v{0.0};
        adam_step(p, g, m, v, 1, cfg);
        CHECK(std::abs((p[0] - 0.5) - (-1e-3 / (1.0 + 1e-8))) < 1e-12);
        CHECK(m[0] == doctest::Approx(0.1));
        CHECK(v[0] == doctest::Approx(0.001));
    }
    SUBCASE("first step is lr in magnitude for any gradient scale") {
        for (double gv : {-3e-4, 0.02, 7.5, -1e3}) {
            std::array<double, 1> p{0.0}, g{gv}, m{0.0}, v{0.0};
            adam_step(p, g, m, v, 1, cfg);
            const double expect = -1e-3 * gv / (std::abs(gv) + 1e-8);
            CHECK(std::abs(p[0] - expect) < 1e-12);
        }
    }
    SUBCASE("zero gradient leaves parameters alone") {
        std::array<double, 3> p{1.0, -2.0, 3.0}, g{}, m{}, v{};
        adam_step(p, g, m, v, 1, cfg);
        CHECK(p == std::array<double, 3>{1.0, -2.0, 3.0});
    }
    SUBCASE("reference trajectory on a quadratic") {
        // Independent scalar transcription of the update rule.
        double theta = 1.0, mm = 0.0, vv = 0.0;
        std::array<double, 1> p{1.0}, m{0.0}, v{0.0};
        double previous = std::abs(p[0]);
        bool monotone = true;
        for (std::uint64_t t = 1; t <= 5000; ++t) {
            const double g = 2.0 * theta;
            mm = 0.9 * mm + 0.1 * g;
            vv = 0.999 * vv + 0.001 * g * g;
            const double mh = mm / (1.0 - std::pow(0.9, static_cast<double>(t)));
            const double vh = vv / (1.0 - std::pow(0.999, static_cast<double>(t)));
            theta -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);

            std::array<double, 1> grad{2.0 * p[0]};
            adam_step(p, grad, m, v, t, cfg);
            CHECK(std::abs(p[0] - theta) < 1e-12);
            if (t <= 900) {
                monotone = monotone && std::abs(p[0]) <= previous;
                previous = std::abs(p[0]);
            }
        }
        CHECK(monotone);
        CHECK(std::abs(p[0]) < 1e-2);
    }
    SUBCASE("errors") {
        std::array<double, 2> p{}, g{}, m{}, v{};
        std::array<double, 1> short_g{};
        CHECK_THROWS_AS(adam_step(p, short_g, m, v, 1, cfg), DataError);
        CHECK_THROWS_AS(adam_step(p, g, m, v, 0, cfg), DataError);
    }
}

TEST_CASE("adam state walks every parameter") {
    auto m = toy(4, std::vector<LayerSpec>{{2, Activation::Sigmoid}, {4, Activation::Linear}}, 8);
    const auto before = m;
    AdamState state(m);
    const auto x = random_batch(4, 6, 2);
    state.apply(m, backward(m, forward(m, x), x), AdamConfig{});
    CHECK(state.step_count() == 1);
    for (std::size_t l = 0; l < 2; ++l) {
        // Every parameter with a non-zero gradient moves by about lr.
        const auto dw = (m.layers()[l].weights - before.layers()[l].weights).cwiseAbs();
        CHECK(dw.maxCoeff() <= 1e-3 + 1e-12);
        CHECK(dw.maxCoeff() > 9e-4);
    }
}

TEST_CASE("training") {
    Rng rng(4);
    Eigen::MatrixXd data(300, 8);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const double a = rng.uniform(), b = rng.uniform();
        for (Eigen::Index j = 0; j < data.cols(); ++j) {
            data(i, j) = 0.5 * a * std::sin(static_cast<double>(j)) + 0.4 * b * std::cos(0.5 * static_cast<double>(j)) +
                         0.02 * rng.normal();
        }
    }
    const std::vector<LayerSpec> specs{{6, Activation::Linear}, {3, Activation::Sigmoid}, {6, Activation::Linear},
                                       {8, Activation::Linear}};
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.batch_size = 32;
    cfg.seed = 5;

    auto m1 = build_model(8, specs, 1);
    std::size_t calls = 0;
    const auto r1 = train(m1, data, cfg, [&](std::size_t, double, double) { ++calls; });
    CHECK(calls == 60);
    REQUIRE(r1.train_loss.size() == 60);
    REQUIRE(r1.val_loss.size() == 60);
    CHECK(r1.train_rows == 240);
    CHECK(r1.val_rows == 60);
    CHECK(r1.final_train_loss() < r1.train_loss.front());
    CHECK(r1.final_val_loss() < 2.0 * r1.final_train_loss());
    for (double l : r1.train_loss) CHECK(l >= 0.0);

    auto m2 = build_model(8, specs, 1);
    const auto r2 = train(m2, data, cfg);
    CHECK(r1.train_loss == r2.train_loss);
    CHECK(r1.val_loss == r2.val_loss);
    CHECK(model_to_json(m1) == model_to_json(m2));

    auto m3 = build_model(8, specs, 1);
    cfg.seed = 6;
    CHECK(train(m3, data, cfg).train_loss != r1.train_loss);

    auto small = build_model(8, specs, 1);
    CHECK_THROWS_AS(train(small, data.topRows(9), cfg), DataError);
    Eigen::MatrixXd bad = data;
    bad(3, 3) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(train(small, bad, cfg), DataError);
    CHECK_THROWS_AS(train(small, data.leftCols(7), cfg), DataError);

    cfg.adam.learning_rate = 1e300;
    auto blowup = build_model(8, specs, 1);
    try {
        train(blowup, data * 1e200, cfg);
        FAIL("expected divergence");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
    }

    TrainConfig invalid;
    invalid.validation_fraction = 1.0;
    CHECK_THROWS_AS(invalid.validate(), DataError);
    invalid = TrainConfig{};
    invalid.epochs = 0;
    CHECK_THROWS_AS(invalid.validate(), DataError);
}

TEST_CASE("model persistence") {
    testsupport::TempDir dir("model");
    auto m = build_model(Variant::Refined, 12);
    m.set_train_config(TrainConfig{});
    save_model(m, dir / "model.json");
    const auto back = load_model(dir / "model.json", Variant::Refined);
    CHECK(back.variant() == Variant::Refined);
    CHECK(back.seed() == 12);
    REQUIRE(back.train_config().has_value());
    CHECK(back.train_config()->batch_size == 256);
    const auto x = random_batch(301, 3, 1);
    CHECK((back.reconstruct(x) - m.reconstruct(x)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(model_to_json(back) == model_to_json(m));

    const auto text = model_to_json(m);
    CHECK(text.find("\"dims\":[301,176,141,141,176,301]") != std::string::npos);
    for (const char* key : {"\"variant\"", "\"dims\"", "\"activations\"", "\"weights\"", "\"biases\"", "\"seed\"",
                            "\"train_config\""}) {
        CHECK(text.find(key) != std::string::npos);
    }

    write_text_file(dir / "cut.json", text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(load_model(dir / "cut.json"), SchemaError);
    CHECK_THROWS_AS(load_model(dir / "model.json", Variant::Prime), ArtifactError);
    CHECK_THROWS_AS(load_model(dir / "absent.json"), IoError);

    const auto toy_model = toy(3, std::vector<LayerSpec>{{2, Activation::Sigmoid}, {3, Activation::Linear}}, 1);
    const auto toy_back = model_from_json(model_to_json(toy_model));
    CHECK_FALSE(toy_back.variant().has_value());
    CHECK(toy_back.layers()[0].weights == toy_model.layers()[0].weights);
    CHECK(toy_back.layers()[0].activation == Activation::Sigmoid);
}

TEST_CASE("loss curve") {
    testsupport::TempDir dir("loss");
    TrainReport r;
    r.train_loss = {0.5, 0.25};
    r.val_loss = {0.75, 0.375};
    write_loss_curve(r, dir / "loss.csv");
    const auto text = read_text_file(dir / "loss.csv");
    CHECK(text.rfind("epoch,train_loss,val_loss\n1,0.5,0.75\n2,0.25,0.375\n", 0) == 0);
}
