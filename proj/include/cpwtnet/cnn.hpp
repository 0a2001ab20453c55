#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "cpwtnet/cpwt.hpp"
#include "cpwtnet/gwo.hpp"

// Small convolutional classifier trained from scratch:
//   Conv(8, 3x3) + ReLU -> MaxPool 2x2 -> Conv(16, 3x3) + ReLU -> MaxPool 2x2
//   -> Dense(n_classes) + softmax, cross-entropy loss, mini-batch SGD.
namespace cpwtnet::cnn {

struct Shape {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t volume() const { return channels * height * width; }
    bool operator==(const Shape&) const = default;
};

struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.volume(), fill) {}

    double& at(std::size_t c, std::size_t r, std::size_t col) {
        return data[(c * shape.height + r) * shape.width + col];
    }
    double at(std::size_t c, std::size_t r, std::size_t col) const {
        return data[(c * shape.height + r) * shape.width + col];
    }
};

/// Valid 3x3 cross-correlation, weights laid out [out][in][3][3].
struct ConvLayer {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::vector<double> weights;
    std::vector<double> biases;

    double& weight(std::size_t o, std::size_t i, std::size_t a, std::size_t b) {
        return weights[((o * in_channels + i) * 3 + a) * 3 + b];
    }
    double weight(std::size_t o, std::size_t i, std::size_t a, std::size_t b) const {
        return weights[((o * in_channels + i) * 3 + a) * 3 + b];
    }
};

/// 2x2 max pooling with stride 2.
struct PoolLayer {};

/// Weights laid out [output][input].
struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights;
    std::vector<double> biases;
};

using Layer = std::variant<ConvLayer, PoolLayer, DenseLayer>;

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t epochs = 20;
    std::size_t batch = 16;
    std::uint64_t seed = 11;
};

struct CnnModel {
    Shape input;
    std::vector<Layer> layers;
    std::vector<std::string> classes;
    TrainConfig training;

    std::size_t class_count() const { return classes.size(); }
};

inline constexpr Shape kDefaultInput{1, 64, 64};

/// The five-layer stack with He-style uniform weights, U(-sqrt(6/fan_in), +).
CnnModel make_model(Shape input, std::vector<std::string> classes, std::uint64_t seed);

/// Checks that layer shapes chain from the input to a final dense layer
/// whose width is the class count. Throws DataError otherwise.
void validate(const CnnModel& model);

Shape output_shape(const Shape& input, const Layer& layer);

/// Pre-activation x = conv(input, w) + b.
Tensor conv_preactivation(const Tensor& input, const ConvLayer& layer);
/// ReLU(conv(input, w) + b).
Tensor conv_forward(const Tensor& input, const ConvLayer& layer);

struct PoolResult {
    Tensor output;
    std::vector<std::size_t> routing;  // flat input index of each output's winner
};

/// Winner is the first maximum in row-major block order.
PoolResult pool_forward(const Tensor& input);

std::vector<double> dense_logits(std::span<const double> input, const DenseLayer& layer);
/// Max-shifted softmax.
std::vector<double> softmax(std::span<const double> logits);
std::vector<double> dense_softmax_forward(std::span<const double> input, const DenseLayer& layer);

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> logit_gradient;  // p - onehot
};

LossAndGradient softmax_cross_entropy(std::span<const double> logits, std::size_t target);

struct LayerGradient {
    std::vector<double> weights;
    std::vector<double> biases;
};

struct Gradients {
    std::vector<LayerGradient> layers;  // one per model layer, empty for pooling
    double loss = 0.0;                  // mean cross-entropy over the batch
};

/// Mean cross-entropy gradients over the batch, accumulated in sample order.
Gradients backward(const CnnModel& model, std::span<const Tensor> batch,
                   std::span<const std::size_t> targets);

/// Output probabilities for one input.
std::vector<double> forward(const CnnModel& model, const Tensor& input);

struct Prediction {
    std::size_t label = 0;
    std::vector<double> probabilities;
};

/// Argmax posterior, lowest class index on ties.
std::size_t argmax(std::span<const double> values);
Prediction predict(const CnnModel& model, const Tensor& input);

struct TrainResult {
    CnnModel model;
    std::vector<double> epoch_loss;
    double training_accuracy = 0.0;
};

/// Mini-batch SGD with seeded initialisation and per-epoch shuffling.
/// `initial`, when given, replaces the seeded initial weights.
TrainResult train(std::span<const Tensor> inputs, std::span<const std::size_t> labels,
                  std::vector<std::string> classes, Shape input, const TrainConfig& config);
TrainResult train_from(CnnModel initial, std::span<const Tensor> inputs,
                       std::span<const std::size_t> labels, const TrainConfig& config);

/// Reduces the pattern once with the Haar approximation, zeroes every block
/// whose histogram bin (rounded block mean) is not selected, centre-crops or
/// zero-pads to the geometry and scales to [0, 1]. A block is gated on the
/// same bin it contributes to the feature histogram.
Tensor prepare_input(const cpwt::PatternImage& pattern, const gwo::FeatureMask& mask,
                     Shape geometry = kDefaultInput);

nlohmann::json to_json(const CnnModel& model);
CnnModel model_from_json(const nlohmann::json& doc);
void save_model(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_model(const std::filesystem::path& path);

}  // namespace cpwtnet::cnn
