#include "cpwtnet/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cpwtnet/rng.hpp"

namespace cpwtnet::cnn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void fill_uniform(std::vector<double>& values, double limit, Rng& rng) {
    for (double& v : values) v = rng.uniform(-limit, limit);
}

ConvLayer make_conv(std::size_t in, std::size_t out, Rng& rng) {
    ConvLayer layer{in, out, std::vector<double>(out * in * 9), std::vector<double>(out, 0.0)};
    fill_uniform(layer.weights, std::sqrt(6.0 / static_cast<double>(in * 9)), rng);
    return layer;
}

DenseLayer make_dense(std::size_t in, std::size_t out, Rng& rng) {
    DenseLayer layer{in, out, std::vector<double>(out * in), std::vector<double>(out, 0.0)};
    fill_uniform(layer.weights, std::sqrt(6.0 / static_cast<double>(in)), rng);
    return layer;
}

// Per-sample record of a forward pass.
struct Trace {
    std::vector<Tensor> inputs;  // inputs[l] feeds layer l
    std::vector<Tensor> preactivations;
    std::vector<std::vector<std::size_t>> routes;
    std::vector<double> logits;
};

Trace run_forward(const CnnModel& model, const Tensor& input) {
    if (!(input.shape == model.input)) {
        throw DataError("input geometry does not match the model");
    }
    Trace trace;
    const std::size_t n = model.layers.size();
    trace.inputs.reserve(n);
    trace.preactivations.resize(n);
    trace.routes.resize(n);
    Tensor current = input;
    for (std::size_t l = 0; l < n; ++l) {
        trace.inputs.push_back(current);
        std::visit(overloaded{
                       [&](const ConvLayer& conv) {
                           Tensor pre = conv_preactivation(current, conv);
                           current = pre;
                           for (double& v : current.data) v = std::max(v, 0.0);
                           trace.preactivations[l] = std::move(pre);
                       },
                       [&](const PoolLayer&) {
                           PoolResult pooled = pool_forward(current);
                           current = std::move(pooled.output);
                           trace.routes[l] = std::move(pooled.routing);
                       },
                       [&](const DenseLayer& dense) {
                           trace.logits = dense_logits(current.data, dense);
                       },
                   },
                   model.layers[l]);
    }
    return trace;
}

void accumulate_sample(const CnnModel& model, const Trace& trace, std::size_t target,
                       Gradients& grads, double scale) {
    const auto [loss, logit_grad] = softmax_cross_entropy(trace.logits, target);
    grads.loss += loss * scale;

    std::vector<double> upstream;  // gradient w.r.t. the output of the current layer
    for (std::size_t idx = model.layers.size(); idx-- > 0;) {
        const Tensor& x = trace.inputs[idx];
        LayerGradient& g = grads.layers[idx];
        std::vector<double> down(idx > 0 ? x.data.size() : 0, 0.0);
        std::visit(overloaded{
                       [&](const DenseLayer& dense) {
                           for (std::size_t o = 0; o < dense.outputs; ++o) {
                               const double go = logit_grad[o] * scale;
                               g.biases[o] += go;
                               const double* w = &dense.weights[o * dense.inputs];
                               double* gw = &g.weights[o * dense.inputs];
                               for (std::size_t i = 0; i < dense.inputs; ++i) {
                                   gw[i] += go * x.data[i];
                               }
                               if (!down.empty()) {
                                   for (std::size_t i = 0; i < dense.inputs; ++i) down[i] += w[i] * go;
                               }
                           }
                       },
                       [&](const PoolLayer&) {
                           if (down.empty()) return;
                           const auto& route = trace.routes[idx];
                           for (std::size_t o = 0; o < route.size(); ++o) down[route[o]] += upstream[o];
                       },
                       [&](const ConvLayer& conv) {
                           const Tensor& pre = trace.preactivations[idx];
                           const std::size_t oh = pre.shape.height;
                           const std::size_t ow = pre.shape.width;
                           const std::size_t iw = x.shape.width;
                           const std::size_t ih = x.shape.height;
                           for (std::size_t o = 0; o < conv.out_channels; ++o) {
                               for (std::size_t r = 0; r < oh; ++r) {
                                   for (std::size_t c = 0; c < ow; ++c) {
                                       const std::size_t flat = (o * oh + r) * ow + c;
                                       if (pre.data[flat] <= 0.0) continue;  // ReLU gate
                                       const double gpre = upstream[flat];
                                       if (gpre == 0.0) continue;
                                       g.biases[o] += gpre;
                                       for (std::size_t ch = 0; ch < conv.in_channels; ++ch) {
                                           const std::size_t wbase = (o * conv.in_channels + ch) * 9;
                                           const std::size_t xbase = ch * ih * iw;
                                           for (std::size_t a = 0; a < 3; ++a) {
                                               const std::size_t row = xbase + (r + a) * iw + c;
                                               for (std::size_t b = 0; b < 3; ++b) {
                                                   g.weights[wbase + a * 3 + b] += gpre * x.data[row + b];
                                                   if (!down.empty()) {
                                                       down[row + b] += conv.weights[wbase + a * 3 + b] * gpre;
                                                   }
                                               }
                                           }
                                       }
                                   }
                               }
                           }
                       },
                   },
                   model.layers[idx]);
        upstream = std::move(down);
    }
}

Gradients zero_gradients(const CnnModel& model) {
    Gradients grads;
    for (const auto& layer : model.layers) {
        LayerGradient g;
        std::visit(overloaded{
                       [&](const ConvLayer& c) {
                           g.weights.assign(c.weights.size(), 0.0);
                           g.biases.assign(c.biases.size(), 0.0);
                       },
                       [&](const DenseLayer& d) {
                           g.weights.assign(d.weights.size(), 0.0);
                           g.biases.assign(d.biases.size(), 0.0);
                       },
                       [](const PoolLayer&) {},
                   },
                   layer);
        grads.layers.push_back(std::move(g));
    }
    return grads;
}

void apply_update(CnnModel& model, const Gradients& grads, double lr) {
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto update = [&](std::vector<double>& w, std::vector<double>& b) {
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * grads.layers[l].weights[i];
            for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * grads.layers[l].biases[i];
        };
        std::visit(overloaded{
                       [&](ConvLayer& c) { update(c.weights, c.biases); },
                       [&](DenseLayer& d) { update(d.weights, d.biases); },
                       [](PoolLayer&) {},
                   },
                   model.layers[l]);
    }
}

}  // namespace

CnnModel make_model(Shape input, std::vector<std::string> classes, std::uint64_t seed) {
    if (classes.size() < 2) {
        throw DataError("a classifier needs at least two classes");
    }
    if (input.channels == 0 || input.height < 10 || input.width < 10) {
        throw ConfigError("input geometry too small for the five-layer stack (need >= 10x10)");
    }
    Rng rng(seed);
    CnnModel model;
    model.input = input;
    model.classes = std::move(classes);
    model.layers.emplace_back(make_conv(input.channels, 8, rng));
    model.layers.emplace_back(PoolLayer{});
    model.layers.emplace_back(make_conv(8, 16, rng));
    model.layers.emplace_back(PoolLayer{});
    Shape flat = input;
    for (const auto& layer : model.layers) flat = output_shape(flat, layer);
    model.layers.emplace_back(make_dense(flat.volume(), model.classes.size(), rng));
    return model;
}

Shape output_shape(const Shape& input, const Layer& layer) {
    return std::visit(
        overloaded{
            [&](const ConvLayer& c) {
                if (c.in_channels != input.channels || input.height < 3 || input.width < 3) {
                    throw DataError("convolution layer does not fit its input");
                }
                return Shape{c.out_channels, input.height - 2, input.width - 2};
            },
            [&](const PoolLayer&) {
                if (input.height < 2 || input.width < 2) {
                    throw DataError("pooling layer input smaller than 2x2");
                }
                return Shape{input.channels, input.height / 2, input.width / 2};
            },
            [&](const DenseLayer& d) {
                if (d.inputs != input.volume()) {
                    throw DataError("dense layer width does not match its input");
                }
                return Shape{d.outputs, 1, 1};
            },
        },
        layer);
}

void validate(const CnnModel& model) {
    if (model.layers.empty() || !std::holds_alternative<DenseLayer>(model.layers.back())) {
        throw DataError("model must end with a dense layer");
    }
    Shape shape = model.input;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        if (l + 1 < model.layers.size() && std::holds_alternative<DenseLayer>(model.layers[l])) {
            throw DataError("dense layer allowed only at the output");
        }
        const auto check = [](const std::vector<double>& w, std::size_t n, const std::vector<double>& b,
                              std::size_t nb) {
            if (w.size() != n || b.size() != nb) throw DataError("layer parameter count mismatch");
            for (double v : w) if (!std::isfinite(v)) throw DataError("non-finite weight");
            for (double v : b) if (!std::isfinite(v)) throw DataError("non-finite bias");
        };
        std::visit(overloaded{
                       [&](const ConvLayer& c) {
                           check(c.weights, c.out_channels * c.in_channels * 9, c.biases, c.out_channels);
                       },
                       [&](const DenseLayer& d) { check(d.weights, d.outputs * d.inputs, d.biases, d.outputs); },
                       [](const PoolLayer&) {},
                   },
                   model.layers[l]);
        shape = output_shape(shape, model.layers[l]);
    }
    if (shape.channels != model.class_count()) {
        throw DataError("output layer width differs from the class count");
    }
}

Tensor conv_preactivation(const Tensor& input, const ConvLayer& layer) {
    if (input.shape.channels != layer.in_channels) {
        throw DataError("conv_forward: channel count mismatch");
    }
    if (input.shape.height < 3 || input.shape.width < 3) {
        throw DataError("conv_forward: input smaller than 3x3");
    }
    const std::size_t ih = input.shape.height;
    const std::size_t iw = input.shape.width;
    const std::size_t oh = ih - 2;
    const std::size_t ow = iw - 2;
    Tensor out(Shape{layer.out_channels, oh, ow});
    for (std::size_t o = 0; o < layer.out_channels; ++o) {
        double* dst = &out.data[o * oh * ow];
        std::fill(dst, dst + oh * ow, layer.biases[o]);
        for (std::size_t ch = 0; ch < layer.in_channels; ++ch) {
            const double* src = &input.data[ch * ih * iw];
            for (std::size_t a = 0; a < 3; ++a) {
                for (std::size_t b = 0; b < 3; ++b) {
                    const double w = layer.weight(o, ch, a, b);
                    for (std::size_t r = 0; r < oh; ++r) {
                        const double* row = src + (r + a) * iw + b;
                        double* out_row = dst + r * ow;
                        for (std::size_t c = 0; c < ow; ++c) out_row[c] += w * row[c];
                    }
                }
            }
        }
    }
    return out;
}

Tensor conv_forward(const Tensor& input, const ConvLayer& layer) {
    Tensor out = conv_preactivation(input, layer);
    for (double& v : out.data) v = std::max(v, 0.0);
    return out;
}

PoolResult pool_forward(const Tensor& input) {
    const auto [channels, ih, iw] = input.shape;
    if (ih < 2 || iw < 2) {
        throw DataError("pool_forward: input smaller than 2x2");
    }
    const std::size_t oh = ih / 2;
    const std::size_t ow = iw / 2;
    PoolResult result{Tensor(Shape{channels, oh, ow}), std::vector<std::size_t>(channels * oh * ow)};
    for (std::size_t ch = 0; ch < channels; ++ch) {
        for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t c = 0; c < ow; ++c) {
                std::size_t best = (ch * ih + 2 * r) * iw + 2 * c;
                for (std::size_t dr = 0; dr < 2; ++dr) {
                    for (std::size_t dc = 0; dc < 2; ++dc) {
                        const std::size_t idx = (ch * ih + 2 * r + dr) * iw + 2 * c + dc;
                        if (input.data[idx] > input.data[best]) best = idx;
                    }
                }
                const std::size_t o = (ch * oh + r) * ow + c;
                result.output.data[o] = input.data[best];
                result.routing[o] = best;
            }
        }
    }
    return result;
}

std::vector<double> dense_logits(std::span<const double> input, const DenseLayer& layer) {
    if (input.size() != layer.inputs) {
        throw DataError("dense layer: input width mismatch");
    }
    std::vector<double> logits(layer.outputs);
    for (std::size_t o = 0; o < layer.outputs; ++o) {
        const double* w = &layer.weights[o * layer.inputs];
        double acc = layer.biases[o];
        for (std::size_t i = 0; i < layer.inputs; ++i) acc += w[i] * input[i];
        logits[o] = acc;
    }
    return logits;
}

std::vector<double> softmax(std::span<const double> logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - peak);
        total += p[i];
    }
    for (double& v : p) v /= total;
    return p;
}

std::vector<double> dense_softmax_forward(std::span<const double> input, const DenseLayer& layer) {
    return softmax(dense_logits(input, layer));
}

LossAndGradient softmax_cross_entropy(std::span<const double> logits, std::size_t target) {
    if (target >= logits.size()) {
        throw DataError("target class out of range");
    }
    const double peak = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double z : logits) total += std::exp(z - peak);
    LossAndGradient out;
    out.loss = std::log(total) - (logits[target] - peak);
    out.logit_gradient = softmax(logits);
    out.logit_gradient[target] -= 1.0;
    return out;
}

Gradients backward(const CnnModel& model, std::span<const Tensor> batch,
                   std::span<const std::size_t> targets) {
    if (batch.size() != targets.size() || batch.empty()) {
        throw DataError("backward: batch and target counts differ or batch is empty");
    }
    Gradients grads = zero_gradients(model);
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const Trace trace = run_forward(model, batch[s]);
        accumulate_sample(model, trace, targets[s], grads, scale);
    }
    return grads;
}

std::vector<double> forward(const CnnModel& model, const Tensor& input) {
    return softmax(run_forward(model, input).logits);
}

std::size_t argmax(std::span<const double> values) {
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

Prediction predict(const CnnModel& model, const Tensor& input) {
    Prediction p;
    p.probabilities = forward(model, input);
    p.label = argmax(p.probabilities);
    return p;
}

TrainResult train(std::span<const Tensor> inputs, std::span<const std::size_t> labels,
                  std::vector<std::string> classes, Shape input, const TrainConfig& config) {
    CnnModel initial = make_model(input, std::move(classes), config.seed);
    return train_from(std::move(initial), inputs, labels, config);
}

TrainResult train_from(CnnModel model, std::span<const Tensor> inputs,
                       std::span<const std::size_t> labels, const TrainConfig& config) {
    validate(model);
    if (inputs.size() != labels.size() || inputs.empty()) {
        throw DataError("training set is empty or labels do not match inputs");
    }
    if (config.batch == 0) {
        throw ConfigError("batch size must be positive");
    }
    std::vector<std::size_t> per_class(model.class_count(), 0);
    for (std::size_t label : labels) {
        if (label >= per_class.size()) throw DataError("training label out of range");
        ++per_class[label];
    }
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        if (per_class[c] == 0) {
            throw DataError("class '" + model.classes[c] + "' has no training samples");
        }
    }
    model.training = config;

    Rng rng(config.seed ^ 0xa0761d6478bd642fULL);
    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);
    TrainResult result;
    std::vector<Tensor> batch;
    std::vector<std::size_t> targets;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            const std::size_t end = std::min(order.size(), start + config.batch);
            batch.clear();
            targets.clear();
            for (std::size_t k = start; k < end; ++k) {
                batch.push_back(inputs[order[k]]);
                targets.push_back(labels[order[k]]);
            }
            const Gradients grads = backward(model, batch, targets);
            if (!std::isfinite(grads.loss)) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch + 1));
            }
            epoch_loss += grads.loss * static_cast<double>(end - start);
            apply_update(model, grads, config.learning_rate);
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (predict(model, inputs[i]).label == labels[i]) ++correct;
    }
    result.training_accuracy = static_cast<double>(correct) / static_cast<double>(inputs.size());
    result.model = std::move(model);
    return result;
}

Tensor prepare_input(const cpwt::PatternImage& pattern, const gwo::FeatureMask& mask, Shape geometry) {
    if (geometry.channels != 1) {
        throw ConfigError("pattern inputs are single-channel");
    }
    Frame reduced = cpwt::haar_reduce(pattern);
    for (double& v : reduced.pixels()) {
        if (!mask.contains(static_cast<std::size_t>(std::lround(v)))) v = 0.0;
    }
    Tensor out(geometry);
    const long rh = static_cast<long>(reduced.height());
    const long rw = static_cast<long>(reduced.width());
    const long gh = static_cast<long>(geometry.height);
    const long gw = static_cast<long>(geometry.width);
    // Source coordinate = target coordinate + offset; negative offsets pad.
    const long off_r = (rh - gh) / 2;
    const long off_c = (rw - gw) / 2;
    for (long r = 0; r < gh; ++r) {
        const long sr = r + off_r;
        if (sr < 0 || sr >= rh) continue;
        for (long c = 0; c < gw; ++c) {
            const long sc = c + off_c;
            if (sc < 0 || sc >= rw) continue;
            out.at(0, static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
                reduced.at(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc)) / 255.0;
        }
    }
    return out;
}

nlohmann::json to_json(const CnnModel& model) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : model.layers) {
        std::visit(overloaded{
                       [&](const ConvLayer& c) {
                           layers.push_back({{"kind", "conv"},
                                             {"shape", {c.out_channels, c.in_channels, 3, 3}},
                                             {"weights", c.weights},
                                             {"biases", c.biases}});
                       },
                       [&](const PoolLayer&) {
                           layers.push_back({{"kind", "pool"}, {"shape", {2, 2}}});
                       },
                       [&](const DenseLayer& d) {
                           layers.push_back({{"kind", "dense"},
                                             {"shape", {d.outputs, d.inputs}},
                                             {"weights", d.weights},
                                             {"biases", d.biases}});
                       },
                   },
                   layer);
    }
    return {{"version", 1},
            {"geometry", {model.input.channels, model.input.height, model.input.width}},
            {"classes", model.classes},
            {"training",
             {{"learning_rate", model.training.learning_rate},
              {"epochs", model.training.epochs},
              {"batch", model.training.batch},
              {"seed", model.training.seed}}},
            {"layers", std::move(layers)}};
}

CnnModel model_from_json(const nlohmann::json& doc) {
    CnnModel model;
    try {
        if (doc.at("version").get<int>() != 1) {
            throw DataError("unsupported model file version");
        }
        const auto geometry = doc.at("geometry").get<std::vector<std::size_t>>();
        if (geometry.size() != 3) throw DataError("model geometry must have three entries");
        model.input = Shape{geometry[0], geometry[1], geometry[2]};
        model.classes = doc.at("classes").get<std::vector<std::string>>();
        const auto& training = doc.at("training");
        model.training.learning_rate = training.at("learning_rate").get<double>();
        model.training.epochs = training.at("epochs").get<std::size_t>();
        model.training.batch = training.at("batch").get<std::size_t>();
        model.training.seed = training.at("seed").get<std::uint64_t>();
        for (const auto& entry : doc.at("layers")) {
            const auto kind = entry.at("kind").get<std::string>();
            const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
            if (kind == "conv" && shape.size() == 4) {
                model.layers.emplace_back(ConvLayer{shape[1], shape[0],
                                                    entry.at("weights").get<std::vector<double>>(),
                                                    entry.at("biases").get<std::vector<double>>()});
            } else if (kind == "pool") {
                model.layers.emplace_back(PoolLayer{});
            } else if (kind == "dense" && shape.size() == 2) {
                model.layers.emplace_back(DenseLayer{shape[1], shape[0],
                                                     entry.at("weights").get<std::vector<double>>(),
                                                     entry.at("biases").get<std::vector<double>>()});
            } else {
                throw DataError("unknown layer kind '" + kind + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
    validate(model);
    return model;
}

void save_model(const CnnModel& model, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << to_json(model).dump() << '\n';
}

CnnModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing model artifact: " + path.string());
    try {
        return model_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("malformed model file " + path.string() + ": " + e.what());
    }
}

}  // namespace cpwtnet::cnn
