#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpwtnet/frame.hpp"

namespace cpwtnet::metrics {

/// Rows are actual classes, columns predicted classes.
struct ConfusionMatrix {
    std::size_t n_classes = 0;
    std::vector<std::uint64_t> counts;

    explicit ConfusionMatrix(std::size_t n = 0) : n_classes(n), counts(n * n, 0) {}

    std::uint64_t& at(std::size_t actual, std::size_t predicted) {
        return counts[actual * n_classes + predicted];
    }
    std::uint64_t at(std::size_t actual, std::size_t predicted) const {
        return counts[actual * n_classes + predicted];
    }
    std::uint64_t total() const;
};

ConfusionMatrix confusion(std::span<const std::size_t> actual, std::span<const std::size_t> predicted,
                          std::size_t n_classes);

struct BinaryCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;
};

/// Treat `cls` as the positive class.
BinaryCounts one_vs_rest(const ConfusionMatrix& cm, std::size_t cls);

// Ratios with a zero denominator are reported as 0; MCC is 0 when any
// factor under its root is 0, and kappa is 0 when chance agreement is 1.
struct Scores {
    double sensitivity = 0.0;
    double specificity = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double jaccard = 0.0;
    double dice = 0.0;
    double f1 = 0.0;
    double mcc = 0.0;
    double accuracy = 0.0;
    double error_rate = 0.0;
    double observed_agreement = 0.0;
    double chance_agreement = 0.0;
    double kappa = 0.0;
};

Scores binary_scores(const BinaryCounts& counts);

struct ClassReport {
    BinaryCounts counts;
    Scores scores;
};

struct MetricsReport {
    std::vector<ClassReport> per_class;
    Scores macro;                   // unweighted mean over classes
    double overall_accuracy = 0.0;  // trace / total
    std::uint64_t total = 0;
};

MetricsReport report(const ConfusionMatrix& cm);

struct RocPoint {
    double threshold;  // +inf for the (0, 0) origin
    double fpr;
    double tpr;
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

/// Sweeps thresholds over the distinct scores, highest first; a sample is
/// called positive when its score is >= the threshold. AUC by trapezoids.
RocCurve roc(std::span<const double> scores, std::span<const std::uint8_t> positive);

struct MsePsnr {
    double mse = 0.0;
    double psnr = 0.0;  // +infinity when mse == 0

    bool saturated() const;
};

MsePsnr mse_psnr(const Frame& a, const Frame& b);

std::string format_double(double v);

nlohmann::json to_json(const MetricsReport& report, const std::vector<std::string>& classes);
std::string to_csv(const MetricsReport& report, const std::vector<std::string>& classes);
std::string confusion_csv(const ConfusionMatrix& cm);
std::string roc_csv(const RocCurve& curve);

}  // namespace cpwtnet::metrics
