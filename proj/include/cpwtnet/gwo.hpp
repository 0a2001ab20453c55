#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"

#include "cpwtnet/cpwt.hpp"
#include "cpwtnet/rng.hpp"

// Grey wolf optimiser over the unit box [0, 1]^d (minimisation), and its use
// as a wrapper selector of descriptor histogram bins.
namespace cpwtnet::gwo {

using Fitness = std::function<double(std::span<const double>)>;

struct Wolf {
    std::vector<double> position;
    double fitness = 0.0;
};

struct PackState {
    std::vector<Wolf> wolves;
    // alpha, beta, delta: best-so-far, fitness non-decreasing along the array.
    std::array<Wolf, 3> leaders;
    std::size_t iteration = 0;
    std::size_t max_iterations = 1;
    double a = 2.0;

    const Wolf& alpha() const { return leaders[0]; }
};

/// Linear decay a = 2 (1 - t / T).
double coefficient_schedule(std::size_t t, std::size_t max_iterations);

/// Uniform positions from a seeded engine; requires at least four wolves.
PackState init_pack(std::size_t n_wolves, std::size_t dim, std::uint64_t seed,
                    const Fitness& fitness, std::size_t max_iterations = 1);

/// One hunting step. For every wolf, dimension and leader L:
///   A = 2 a r1 - a,  C = 2 r2,  D = |C x_L - x|,  X_L = x_L - A D
/// and the wolf moves to the mean of the three X_L, clamped to [0, 1].
/// All random draws of the step are taken before any fitness evaluation.
void step(PackState& pack, const Fitness& fitness, Rng& rng);

struct OptimizeResult {
    std::vector<double> best_position;
    double best_fitness = 0.0;
    std::vector<double> history;  // alpha fitness after each step
};

OptimizeResult optimize(const Fitness& fitness, std::size_t n_wolves, std::size_t dim,
                        std::size_t iterations, std::uint64_t seed);

struct FeatureMask {
    std::vector<std::uint8_t> bits;

    std::size_t dim() const { return bits.size(); }
    std::size_t selected_count() const;
    std::vector<std::size_t> selected() const;
    bool contains(std::size_t bin) const { return bin < bits.size() && bits[bin] != 0; }

    static FeatureMask all(std::size_t dim);
};

/// Entries above the threshold are selected; when none is, the largest entry
/// (lowest index on ties) is switched on.
FeatureMask threshold_mask(std::span<const double> position, double threshold = 0.5);

struct SelectionConfig {
    std::size_t wolves = 20;
    std::size_t iterations = 60;
    std::uint64_t seed = 7;
    double threshold = 0.5;
    double size_penalty = 0.01;
    double validation_fraction = 0.2;
};

struct Selection {
    FeatureMask mask;
    std::vector<double> position;
    double fitness = 0.0;
    double validation_accuracy = 0.0;
    std::vector<double> history;
};

/// Accuracy of a nearest-centroid classifier restricted to the masked bins.
/// Ties go to the lowest class index.
double nearest_centroid_accuracy(std::span<const cpwt::FeatureVector> train,
                                 std::span<const std::size_t> train_labels,
                                 std::span<const cpwt::FeatureVector> validation,
                                 std::span<const std::size_t> validation_labels,
                                 const FeatureMask& mask);

/// Wrapper selection: fitness = (1 - validation accuracy) + penalty * selected / d
/// on a stratified internal train/validation split of the given features.
Selection select_features(std::span<const cpwt::FeatureVector> features,
                          std::span<const std::size_t> labels, const SelectionConfig& config);

nlohmann::json to_json(const Selection& selection);
FeatureMask mask_from_json(const nlohmann::json& doc);

}  // namespace cpwtnet::gwo
