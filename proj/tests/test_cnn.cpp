#include "doctest.h"

#include <cmath>
#include <numeric>

#include "cpwtnet/cnn.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace cpwtnet;
using namespace cpwtnet::cnn;

namespace {

ConvLayer single_kernel(const std::array<double, 9>& k, double bias = 0.0) {
    ConvLayer c{1, 1, std::vector<double>(k.begin(), k.end()), {bias}};
    return c;
}

Tensor tensor_of(std::size_t h, std::size_t w, const std::vector<double>& values) {
    Tensor t(Shape{1, h, w});
    t.data = values;
    return t;
}

}  // namespace

TEST_CASE("conv forward examples") {
    const auto identity = single_kernel({0, 0, 0, 0, 1, 0, 0, 0, 0});
    std::vector<double> v(25);
    std::iota(v.begin(), v.end(), 0.0);
    const Tensor out = conv_forward(tensor_of(5, 5, v), identity);
    REQUIRE(out.shape == Shape{1, 3, 3});
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 3; ++c) CHECK(out.at(0, r, c) == v[(r + 1) * 5 + c + 1]);
    }

    const auto ones = single_kernel({1, 1, 1, 1, 1, 1, 1, 1, 1});
    const Tensor nine = conv_forward(tensor_of(3, 3, std::vector<double>(9, 1.0)), ones);
    CHECK(nine.data == std::vector<double>{9.0});

    const auto neg = single_kernel({0, 0, 0, 0, 0, 0, 0, 0, 0}, -2.0);
    const Tensor in = tensor_of(3, 3, std::vector<double>(9, 1.0));
    CHECK(conv_preactivation(in, neg).data == std::vector<double>{-2.0});
    CHECK(conv_forward(in, neg).data == std::vector<double>{0.0});

    CHECK_THROWS_AS(conv_forward(tensor_of(2, 2, {1, 2, 3, 4}), ones), DataError);
}

TEST_CASE("pool forward examples") {
    const auto block = pool_forward(tensor_of(2, 2, {1, 3, 2, 0}));
    CHECK(block.output.data == std::vector<double>{3.0});
    CHECK(block.routing == std::vector<std::size_t>{1});

    const auto constant = pool_forward(tensor_of(2, 2, {5, 5, 5, 5}));
    CHECK(constant.output.data == std::vector<double>{5.0});
    CHECK(constant.routing == std::vector<std::size_t>{0});

    std::vector<double> v(16);
    std::iota(v.begin(), v.end(), 0.0);
    const auto four = pool_forward(tensor_of(4, 4, v));
    CHECK(four.output.shape == Shape{1, 2, 2});
    CHECK(four.output.data == std::vector<double>{5, 7, 13, 15});

    const auto odd = pool_forward(tensor_of(3, 5, std::vector<double>(15, 1.0)));
    CHECK(odd.output.shape == Shape{1, 1, 2});
}

TEST_CASE("softmax examples and properties") {
    const std::vector<double> zeros{0, 0, 0};
    for (double p : softmax(zeros)) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    const std::vector<double> logs{std::log(1.0), std::log(2.0), std::log(3.0)};
    const auto p = softmax(logs);
    CHECK(p[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-14));
    CHECK(p[2] == doctest::Approx(3.0 / 6.0).epsilon(1e-14));

    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> z(2 + gen() % 10);
        for (double& x : z) x = u(gen);
        auto shifted = z;
        for (double& x : shifted) x += 10.0;
        const auto a = softmax(z);
        const auto b = softmax(shifted);
        CHECK(std::accumulate(a.begin(), a.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(argmax(a) == argmax(b));
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
}

TEST_CASE("dense softmax forward") {
    DenseLayer d{2, 2, {1, 0, 0, 1}, {0, 0}};
    const std::vector<double> x{0.0, 0.0};
    const auto p = dense_softmax_forward(x, d);
    CHECK(p[0] == 0.5);
    const std::vector<double> bad{1.0};
    CHECK_THROWS_AS(dense_logits(bad, d), DataError);
}

TEST_CASE("cross entropy") {
    const std::vector<double> confident{0.0, 800.0};
    const auto lg = softmax_cross_entropy(confident, 1);
    CHECK(lg.loss == 0.0);
    CHECK(lg.logit_gradient[0] == 0.0);
    CHECK(lg.logit_gradient[1] == 0.0);
    const std::vector<double> even{0.0, 0.0};
    const auto half = softmax_cross_entropy(even, 0);
    CHECK(half.loss == doctest::Approx(std::log(2.0)));
    CHECK(half.logit_gradient[0] == doctest::Approx(-0.5));
}

TEST_CASE("argmax ties go to the lowest index") {
    const std::vector<double> tie{0.5, 0.5};
    CHECK(argmax(tie) == 0);
    const std::vector<double> v{0.1, 0.7, 0.7};
    CHECK(argmax(v) == 1);
}

TEST_CASE("model structure") {
    const auto m = make_model(kDefaultInput, {"a", "b", "c"}, 1);
    CHECK(m.layers.size() == 5);
    CHECK(std::holds_alternative<ConvLayer>(m.layers[0]));
    CHECK(std::holds_alternative<PoolLayer>(m.layers[1]));
    CHECK(std::holds_alternative<ConvLayer>(m.layers[2]));
    CHECK(std::holds_alternative<PoolLayer>(m.layers[3]));
    const auto& dense = std::get<DenseLayer>(m.layers[4]);
    CHECK(dense.outputs == 3);
    CHECK(dense.inputs == 16 * 14 * 14);
    CHECK(std::get<ConvLayer>(m.layers[0]).out_channels == 8);
    CHECK(std::get<ConvLayer>(m.layers[2]).out_channels == 16);
    CHECK_THROWS_AS(make_model(kDefaultInput, {"only"}, 1), DataError);
    CHECK_THROWS_AS(make_model(Shape{1, 8, 8}, {"a", "b"}, 1), ConfigError);
    CHECK_THROWS_AS(predict(m, Tensor(Shape{1, 32, 32})), DataError);
}

TEST_CASE("zero input gives zero conv weight gradients") {
    const auto m = make_model(Shape{1, 16, 16}, {"a", "b"}, 3);
    const std::vector<Tensor> batch{Tensor(Shape{1, 16, 16}), Tensor(Shape{1, 16, 16})};
    const std::vector<std::size_t> targets{0, 1};
    const auto g = backward(m, batch, targets);
    for (double w : g.layers[0].weights) CHECK(w == 0.0);
}

TEST_CASE("pool backward conserves gradient mass") {
    // Conv with a large bias keeps every ReLU open, so its bias gradient is
    // the sum of the gradients the pool routes back to the conv output.
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        ConvLayer conv{1, 1, std::vector<double>(9), {10.0}};
        for (double& w : conv.weights) w = u(gen) - 0.5;
        DenseLayer dense{4, 3, std::vector<double>(12), {0.0, 0.0, 0.0}};
        for (double& w : dense.weights) w = u(gen) - 0.5;
        CnnModel m;
        m.input = {1, 6, 6};
        m.layers = {conv, PoolLayer{}, dense};
        m.classes = {"a", "b", "c"};
        validate(m);
        Tensor x(m.input);
        for (double& v : x.data) v = u(gen);
        const std::size_t target = trial % 3;
        const std::vector<Tensor> batch{x};
        const std::vector<std::size_t> targets{target};
        const auto g = backward(m, batch, targets);
        CHECK(g.layers[1].weights.empty());

        const auto pooled = pool_forward(conv_forward(x, conv));
        const auto lg = softmax_cross_entropy(dense_logits(pooled.output.data, dense), target);
        double incoming = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            for (std::size_t o = 0; o < 3; ++o) incoming += dense.weights[o * 4 + j] * lg.logit_gradient[o];
        }
        CHECK(g.layers[0].biases[0] == doctest::Approx(incoming).epsilon(1e-12));
    }
}

TEST_CASE("gradient check on the toy network") {
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto r = testing::gradient_check(seed);
        CHECK(r.checked == 18 + 2 + 54 + 3 + 6 + 2);
        CHECK(r.worst < 1e-4);
    }
}

namespace {

void toy_dataset(std::vector<Tensor>& inputs, std::vector<std::size_t>& labels) {
    const Shape s{1, 12, 12};
    for (int i = 0; i < 9; ++i) {
        inputs.emplace_back(s, 0.1 * (i + 1));
        labels.push_back(0);
        Tensor checker(s);
        for (std::size_t r = 0; r < 12; ++r) {
            for (std::size_t c = 0; c < 12; ++c) checker.at(0, r, c) = ((r + c + i) % 2) ? 1.0 : 0.0;
        }
        inputs.push_back(checker);
        labels.push_back(1);
    }
}

}  // namespace

TEST_CASE("training separates constants from checkerboards") {
    std::vector<Tensor> inputs;
    std::vector<std::size_t> labels;
    toy_dataset(inputs, labels);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch = 4;
    cfg.learning_rate = 0.05;
    const auto result = train(inputs, labels, {"constant", "checker"}, Shape{1, 12, 12}, cfg);
    CHECK(result.training_accuracy == 1.0);
    CHECK(result.epoch_loss.size() == 50);
    CHECK(result.epoch_loss.back() < result.epoch_loss.front());
    for (std::size_t i = 0; i < inputs.size(); ++i) CHECK(predict(result.model, inputs[i]).label == labels[i]);

    const auto again = train(inputs, labels, {"constant", "checker"}, Shape{1, 12, 12}, cfg);
    CHECK(to_json(again.model) == to_json(result.model));
}

TEST_CASE("zero learning rate leaves weights unchanged") {
    std::vector<Tensor> inputs;
    std::vector<std::size_t> labels;
    toy_dataset(inputs, labels);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.learning_rate = 0.0;
    const auto initial = make_model(Shape{1, 12, 12}, {"constant", "checker"}, cfg.seed);
    const auto result = train(inputs, labels, {"constant", "checker"}, Shape{1, 12, 12}, cfg);
    CHECK(to_json(result.model)["layers"] == to_json(initial)["layers"]);
}

TEST_CASE("training errors") {
    std::vector<Tensor> inputs{Tensor(Shape{1, 12, 12})};
    std::vector<std::size_t> labels{0};
    CHECK_THROWS_AS(train(inputs, labels, {"a", "b"}, Shape{1, 12, 12}, TrainConfig{}), DataError);
    TrainConfig huge;
    huge.learning_rate = 1e200;
    huge.epochs = 5;
    std::vector<Tensor> two;
    std::vector<std::size_t> l2;
    toy_dataset(two, l2);
    for (auto& t : two) {
        for (double& v : t.data) v *= 1e6;
    }
    CHECK_THROWS_AS(train(two, l2, {"a", "b"}, Shape{1, 12, 12}, huge), NumericError);
}

TEST_CASE("prepare_input examples") {
    cpwt::PatternImage p(128, 128);
    std::fill(p.codes.begin(), p.codes.end(), 40);
    auto mask = gwo::FeatureMask::all(cpwt::kBins);
    mask.bits.assign(cpwt::kBins, 0);
    mask.bits[40] = 1;
    const Tensor t = prepare_input(p, mask);
    CHECK(t.shape == kDefaultInput);
    for (double v : t.data) CHECK(v == 40.0 / 255.0);

    mask.bits.assign(cpwt::kBins, 0);
    mask.bits[0] = 1;
    for (double v : prepare_input(p, mask).data) CHECK(v == 0.0);

    cpwt::PatternImage q(64, 64);
    for (std::size_t i = 0; i < q.codes.size(); ++i) q.codes[i] = static_cast<std::uint8_t>(i % 256);
    const Tensor full = prepare_input(q, gwo::FeatureMask::all(cpwt::kBins));
    const Frame reduced = cpwt::haar_reduce(q);
    for (std::size_t r = 0; r < 64; ++r) {
        for (std::size_t c = 0; c < 64; ++c) {
            const bool inside = r >= 16 && r < 48 && c >= 16 && c < 48;
            const double expect = inside ? reduced.at(r - 16, c - 16) / 255.0 : 0.0;
            CHECK(full.at(0, r, c) == expect);
        }
    }
}

TEST_CASE("prepare_input gates blocks on their histogram bin") {
    cpwt::PatternImage p(4, 2);
    p.codes = {200, 200, 10, 30, 200, 200, 10, 30};  // blocks: mean 200 and mean 20
    auto mask = gwo::FeatureMask::all(cpwt::kBins);
    mask.bits.assign(cpwt::kBins, 0);
    mask.bits[20] = 1;
    const Tensor t = prepare_input(p, mask, Shape{1, 1, 2});
    CHECK(t.data == std::vector<double>{0.0, 20.0 / 255.0});
}

TEST_CASE("model JSON round trip") {
    testing::TempDir dir("model");
    const auto m = make_model(Shape{1, 16, 16}, {"x", "y"}, 5);
    save_model(m, dir / "model.json");
    const auto back = load_model(dir / "model.json");
    CHECK(to_json(back) == to_json(m));
    CHECK(back.classes == m.classes);
    Tensor in(Shape{1, 16, 16}, 0.3);
    CHECK(forward(back, in) == forward(m, in));
    CHECK_THROWS_WITH_AS(load_model(dir / "absent.json"), doctest::Contains("missing model"), DataError);
    testing::write_bytes(dir / "bad.json", "{\"version\": 1}");
    CHECK_THROWS_AS(load_model(dir / "bad.json"), DataError);
}
