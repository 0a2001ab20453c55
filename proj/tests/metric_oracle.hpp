#pragma once

#include <cmath>
#include <cstdint>

// Textbook formulas evaluated in long double directly from the four counts,
// written without reference to the library code.
namespace testing {

struct OracleScores {
    long double sensitivity, specificity, precision, recall, jaccard, dice, f1, mcc, accuracy, error_rate,
        observed, chance, kappa;
};

inline long double safe_div(long double num, long double den) { return den == 0 ? 0.0L : num / den; }

inline OracleScores oracle_scores(std::uint64_t tp_, std::uint64_t fp_, std::uint64_t tn_, std::uint64_t fn_) {
    const long double tp = tp_, fp = fp_, tn = tn_, fn = fn_;
    const long double n = tp + fp + tn + fn;
    OracleScores s{};
    s.sensitivity = safe_div(tp, tp + fn);
    s.specificity = safe_div(tn, tn + fp);
    s.precision = safe_div(tp, tp + fp);
    s.recall = safe_div(tp, tp + fn);
    s.jaccard = safe_div(tp, tp + fp + fn);
    s.dice = safe_div(2 * tp, 2 * tp + fp + fn);
    const long double p = s.precision, r = s.recall;
    s.f1 = safe_div(2 * p * r, p + r);
    const long double root = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    s.mcc = root == 0 ? 0.0L : (tp * tn - fp * fn) / std::sqrt(root);
    s.accuracy = safe_div(tp + tn, n);
    s.error_rate = safe_div(fp + fn, n);
    s.observed = s.accuracy;
    const long double yes = safe_div(tp + fp, n) * safe_div(tp + fn, n);
    const long double no = safe_div(fn + tn, n) * safe_div(fp + tn, n);
    s.chance = yes + no;
    s.kappa = s.chance == 1 ? 0.0L : (s.observed - s.chance) / (1 - s.chance);
    return s;
}

inline bool close_relative(double got, long double want, long double tol = 1e-12L) {
    const long double diff = std::fabs(static_cast<long double>(got) - want);
    const long double scale = std::fmax(std::fabs(static_cast<long double>(got)), std::fabs(want));
    return diff <= tol * scale || diff == 0;
}

}  // namespace testing
