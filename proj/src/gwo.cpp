#include "cpwtnet/gwo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace cpwtnet::gwo {

namespace {

double evaluate(const Fitness& fitness, std::span<const double> position) {
    const double value = fitness(position);
    if (!std::isfinite(value)) {
        throw NumericError("fitness callback returned a non-finite value");
    }
    return value;
}

void promote(std::array<Wolf, 3>& leaders, const Wolf& wolf) {
    if (wolf.fitness < leaders[0].fitness) {
        leaders[2] = std::move(leaders[1]);
        leaders[1] = std::move(leaders[0]);
        leaders[0] = wolf;
    } else if (wolf.fitness < leaders[1].fitness) {
        leaders[2] = std::move(leaders[1]);
        leaders[1] = wolf;
    } else if (wolf.fitness < leaders[2].fitness) {
        leaders[2] = wolf;
    }
}

}  // namespace

double coefficient_schedule(std::size_t t, std::size_t max_iterations) {
    if (max_iterations == 0 || t > max_iterations) {
        throw ConfigError("coefficient schedule needs 0 <= t <= T and T >= 1");
    }
    return 2.0 * (1.0 - static_cast<double>(t) / static_cast<double>(max_iterations));
}

PackState init_pack(std::size_t n_wolves, std::size_t dim, std::uint64_t seed,
                    const Fitness& fitness, std::size_t max_iterations) {
    if (n_wolves < 4) {
        throw ConfigError("a pack needs at least four wolves (alpha, beta, delta, omega)");
    }
    if (dim == 0) {
        throw ConfigError("search dimension must be positive");
    }
    if (max_iterations == 0) {
        throw ConfigError("maximum iteration count must be positive");
    }
    Rng rng(seed);
    PackState pack;
    pack.max_iterations = max_iterations;
    pack.wolves.resize(n_wolves);
    for (auto& wolf : pack.wolves) {
        wolf.position.resize(dim);
        for (double& x : wolf.position) x = rng.uniform();
    }
    for (auto& leader : pack.leaders) leader.fitness = std::numeric_limits<double>::infinity();
    for (auto& wolf : pack.wolves) {
        wolf.fitness = evaluate(fitness, wolf.position);
        promote(pack.leaders, wolf);
    }
    pack.a = coefficient_schedule(0, max_iterations);
    return pack;
}

void step(PackState& pack, const Fitness& fitness, Rng& rng) {
    const std::size_t dim = pack.leaders[0].position.size();
    const double a = pack.a;

    // r1, r2 per wolf, leader and dimension, drawn in a fixed order.
    std::vector<double> draws(pack.wolves.size() * 3 * dim * 2);
    for (double& r : draws) r = rng.uniform();

    std::size_t k = 0;
    for (auto& wolf : pack.wolves) {
        std::vector<double> next(dim, 0.0);
        for (std::size_t leader = 0; leader < 3; ++leader) {
            const auto& lead = pack.leaders[leader].position;
            for (std::size_t j = 0; j < dim; ++j) {
                const double r1 = draws[k++];
                const double r2 = draws[k++];
                const double A = 2.0 * a * r1 - a;
                const double C = 2.0 * r2;
                const double D = std::abs(C * lead[j] - wolf.position[j]);
                next[j] += lead[j] - A * D;
            }
        }
        for (std::size_t j = 0; j < dim; ++j) {
            wolf.position[j] = std::clamp(next[j] / 3.0, 0.0, 1.0);
        }
    }
    for (auto& wolf : pack.wolves) {
        wolf.fitness = evaluate(fitness, wolf.position);
    }
    for (const auto& wolf : pack.wolves) promote(pack.leaders, wolf);

    pack.iteration += 1;
    pack.a = coefficient_schedule(std::min(pack.iteration, pack.max_iterations), pack.max_iterations);
}

OptimizeResult optimize(const Fitness& fitness, std::size_t n_wolves, std::size_t dim,
                        std::size_t iterations, std::uint64_t seed) {
    if (iterations == 0) {
        throw ConfigError("GWO needs at least one iteration");
    }
    PackState pack = init_pack(n_wolves, dim, seed, fitness, iterations);
    // Separate stream for the hunt so init and step draws never overlap.
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    OptimizeResult result;
    result.history.reserve(iterations);
    for (std::size_t t = 0; t < iterations; ++t) {
        step(pack, fitness, rng);
        result.history.push_back(pack.alpha().fitness);
    }
    result.best_position = pack.alpha().position;
    result.best_fitness = pack.alpha().fitness;
    return result;
}

std::size_t FeatureMask::selected_count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::vector<std::size_t> FeatureMask::selected() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) out.push_back(i);
    }
    return out;
}

FeatureMask FeatureMask::all(std::size_t dim) { return FeatureMask{std::vector<std::uint8_t>(dim, 1)}; }

FeatureMask threshold_mask(std::span<const double> position, double threshold) {
    FeatureMask mask{std::vector<std::uint8_t>(position.size(), 0)};
    bool any = false;
    for (std::size_t i = 0; i < position.size(); ++i) {
        if (position[i] > threshold) {
            mask.bits[i] = 1;
            any = true;
        }
    }
    if (!any && !position.empty()) {
        const auto best = std::max_element(position.begin(), position.end());
        mask.bits[static_cast<std::size_t>(best - position.begin())] = 1;
    }
    return mask;
}

namespace {

struct CentroidModel {
    std::vector<std::size_t> classes;
    std::vector<cpwt::FeatureVector> centroids;
};

CentroidModel fit_centroids(std::span<const cpwt::FeatureVector> train,
                            std::span<const std::size_t> labels) {
    std::map<std::size_t, std::pair<cpwt::FeatureVector, std::size_t>> sums;
    for (std::size_t i = 0; i < train.size(); ++i) {
        auto& [sum, count] = sums[labels[i]];
        for (std::size_t b = 0; b < cpwt::kBins; ++b) sum.bins[b] += train[i].bins[b];
        ++count;
    }
    CentroidModel model;
    for (auto& [label, entry] : sums) {
        auto& [sum, count] = entry;
        for (double& b : sum.bins) b /= static_cast<double>(count);
        model.classes.push_back(label);
        model.centroids.push_back(sum);
    }
    return model;
}

double centroid_accuracy(const CentroidModel& model, std::span<const cpwt::FeatureVector> validation,
                         std::span<const std::size_t> labels, std::span<const std::size_t> bins) {
    if (validation.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < validation.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t predicted = 0;
        for (std::size_t c = 0; c < model.centroids.size(); ++c) {
            double dist = 0.0;
            for (std::size_t b : bins) {
                const double d = validation[i].bins[b] - model.centroids[c].bins[b];
                dist += d * d;
            }
            if (dist < best) {
                best = dist;
                predicted = model.classes[c];
            }
        }
        if (predicted == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(validation.size());
}

}  // namespace

double nearest_centroid_accuracy(std::span<const cpwt::FeatureVector> train,
                                 std::span<const std::size_t> train_labels,
                                 std::span<const cpwt::FeatureVector> validation,
                                 std::span<const std::size_t> validation_labels,
                                 const FeatureMask& mask) {
    if (train.size() != train_labels.size() || validation.size() != validation_labels.size()) {
        throw DataError("feature and label counts differ");
    }
    const auto model = fit_centroids(train, train_labels);
    const auto bins = mask.selected();
    return centroid_accuracy(model, validation, validation_labels, bins);
}

Selection select_features(std::span<const cpwt::FeatureVector> features,
                          std::span<const std::size_t> labels, const SelectionConfig& config) {
    if (features.size() != labels.size()) {
        throw DataError("feature and label counts differ");
    }
    const std::set<std::size_t> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) {
        throw DataError("feature selection needs at least two classes (single-class input)");
    }
    if (!(config.validation_fraction > 0.0 && config.validation_fraction < 1.0)) {
        throw ConfigError("validation fraction must lie in (0, 1)");
    }

    // Stratified internal split: round(fraction * n) per class, at least one
    // validation item for classes with two or more samples.
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    Rng split_rng(config.seed ^ 0x5bd1e995ULL);
    std::vector<cpwt::FeatureVector> train, validation;
    std::vector<std::size_t> train_labels, validation_labels;
    for (auto& [label, members] : by_class) {
        split_rng.shuffle(members);
        std::size_t n_val = 0;
        if (members.size() >= 2) {
            n_val = static_cast<std::size_t>(
                std::llround(config.validation_fraction * static_cast<double>(members.size())));
            n_val = std::clamp<std::size_t>(n_val, 1, members.size() - 1);
        }
        for (std::size_t k = 0; k < members.size(); ++k) {
            if (k < n_val) {
                validation.push_back(features[members[k]]);
                validation_labels.push_back(label);
            } else {
                train.push_back(features[members[k]]);
                train_labels.push_back(label);
            }
        }
    }

    const auto model = fit_centroids(train, train_labels);
    const double dim = static_cast<double>(cpwt::kBins);
    auto score = [&](std::span<const double> position, double* accuracy_out) {
        const FeatureMask mask = threshold_mask(position, config.threshold);
        const auto bins = mask.selected();
        const double accuracy = centroid_accuracy(model, validation, validation_labels, bins);
        if (accuracy_out != nullptr) *accuracy_out = accuracy;
        return (1.0 - accuracy) + config.size_penalty * static_cast<double>(bins.size()) / dim;
    };
    const Fitness fitness = [&](std::span<const double> position) { return score(position, nullptr); };

    const auto best = optimize(fitness, config.wolves, cpwt::kBins, config.iterations, config.seed);
    Selection selection;
    selection.position = best.best_position;
    selection.mask = threshold_mask(best.best_position, config.threshold);
    selection.fitness = score(best.best_position, &selection.validation_accuracy);
    selection.history = best.history;
    return selection;
}

nlohmann::json to_json(const Selection& selection) {
    return {{"dim", selection.mask.dim()},
            {"selected", selection.mask.selected()},
            {"position", selection.position},
            {"fitness", selection.fitness},
            {"validation_accuracy", selection.validation_accuracy}};
}

FeatureMask mask_from_json(const nlohmann::json& doc) {
    try {
        const auto dim = doc.at("dim").get<std::size_t>();
        FeatureMask mask{std::vector<std::uint8_t>(dim, 0)};
        for (const auto& bin : doc.at("selected")) {
            const auto b = bin.get<std::size_t>();
            if (b >= dim) throw DataError("mask bin index out of range");
            mask.bits[b] = 1;
        }
        if (mask.selected_count() == 0) throw DataError("mask selects no bins");
        return mask;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed feature mask: ") + e.what());
    }
}

}  // namespace cpwtnet::gwo
