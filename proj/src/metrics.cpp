#include "cpwtnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace cpwtnet::metrics {

std::uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

ConfusionMatrix confusion(std::span<const std::size_t> actual, std::span<const std::size_t> predicted,
                          std::size_t n_classes) {
    if (actual.size() != predicted.size()) {
        throw DataError("confusion: actual and predicted label counts differ");
    }
    ConfusionMatrix cm(n_classes);
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (actual[i] >= n_classes || predicted[i] >= n_classes) {
            throw DataError("confusion: label out of range");
        }
        ++cm.at(actual[i], predicted[i]);
    }
    return cm;
}

BinaryCounts one_vs_rest(const ConfusionMatrix& cm, std::size_t cls) {
    BinaryCounts b;
    const std::uint64_t total = cm.total();
    for (std::size_t k = 0; k < cm.n_classes; ++k) {
        if (k == cls) continue;
        b.fn += cm.at(cls, k);
        b.fp += cm.at(k, cls);
    }
    b.tp = cm.at(cls, cls);
    b.tn = total - b.tp - b.fn - b.fp;
    return b;
}

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

Scores binary_scores(const BinaryCounts& counts) {
    const double tp = static_cast<double>(counts.tp);
    const double fp = static_cast<double>(counts.fp);
    const double tn = static_cast<double>(counts.tn);
    const double fn = static_cast<double>(counts.fn);
    const double n = tp + tn + fp + fn;

    Scores s;
    s.sensitivity = ratio(tp, tp + fn);
    s.specificity = ratio(tn, tn + fp);
    s.jaccard = ratio(tp, tp + fn + fp);
    s.dice = ratio(2.0 * tp, fp + 2.0 * tp + fn);
    s.precision = ratio(tp, tp + fp);
    s.recall = ratio(tp, tp + fn);
    // 2PR / (P + R) reduced over the counts, so it agrees with Dice bit for bit.
    s.f1 = ratio(2.0 * tp, 2.0 * tp + fp + fn);
    const double product = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    s.mcc = product == 0.0 ? 0.0 : (tp * tn - fp * fn) / std::sqrt(product);
    s.accuracy = ratio(tp + tn, n);
    s.error_rate = 1.0 - s.accuracy;
    s.observed_agreement = ratio(tp + tn, n);
    s.chance_agreement = ratio((tp + fp) * (tp + fn) + (tn + fp) * (tn + fn), n * n);
    // (P_o - P_e) / (1 - P_e) with the n^2 cancelled; the direct form loses
    // digits to cancellation when kappa is near zero.
    s.kappa = ratio(2.0 * (tp * tn - fp * fn), (tp + fp) * (fp + tn) + (tp + fn) * (fn + tn));
    return s;
}

MetricsReport report(const ConfusionMatrix& cm) {
    MetricsReport r;
    r.total = cm.total();
    if (cm.n_classes == 0 || r.total == 0) {
        throw DataError("report: confusion matrix is empty");
    }
    std::uint64_t trace = 0;
    for (std::size_t c = 0; c < cm.n_classes; ++c) {
        trace += cm.at(c, c);
        ClassReport cr;
        cr.counts = one_vs_rest(cm, c);
        cr.scores = binary_scores(cr.counts);
        r.per_class.push_back(cr);
    }
    r.overall_accuracy = static_cast<double>(trace) / static_cast<double>(r.total);

    const double n = static_cast<double>(cm.n_classes);
    auto mean = [&](double Scores::*field) {
        double acc = 0.0;
        for (const auto& cr : r.per_class) acc += cr.scores.*field;
        return acc / n;
    };
    r.macro.sensitivity = mean(&Scores::sensitivity);
    r.macro.specificity = mean(&Scores::specificity);
    r.macro.precision = mean(&Scores::precision);
    r.macro.recall = mean(&Scores::recall);
    r.macro.jaccard = mean(&Scores::jaccard);
    r.macro.dice = mean(&Scores::dice);
    r.macro.f1 = mean(&Scores::f1);
    r.macro.mcc = mean(&Scores::mcc);
    r.macro.accuracy = mean(&Scores::accuracy);
    r.macro.error_rate = mean(&Scores::error_rate);
    r.macro.observed_agreement = mean(&Scores::observed_agreement);
    r.macro.chance_agreement = mean(&Scores::chance_agreement);
    r.macro.kappa = mean(&Scores::kappa);
    return r;
}

RocCurve roc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
    if (scores.size() != positive.size()) {
        throw DataError("roc: score and label counts differ");
    }
    const auto n_pos = static_cast<std::size_t>(std::count_if(
        positive.begin(), positive.end(), [](std::uint8_t v) { return v != 0; }));
    const std::size_t n_neg = positive.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw DataError("roc: both classes must be present (single-class input)");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    for (std::size_t k = 0; k < order.size();) {
        const double threshold = scores[order[k]];
        while (k < order.size() && scores[order[k]] == threshold) {
            if (positive[order[k]]) ++tp; else ++fp;
            ++k;
        }
        curve.points.push_back({threshold, static_cast<double>(fp) / static_cast<double>(n_neg),
                                static_cast<double>(tp) / static_cast<double>(n_pos)});
    }
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& p = curve.points[i - 1];
        const auto& q = curve.points[i];
        curve.auc += (q.fpr - p.fpr) * (q.tpr + p.tpr) / 2.0;
    }
    return curve;
}

bool MsePsnr::saturated() const { return std::isinf(psnr); }

MsePsnr mse_psnr(const Frame& a, const Frame& b) {
    if (!a.same_shape(b)) {
        throw DataError("mse_psnr: frame dimensions differ");
    }
    if (a.empty()) {
        throw DataError("mse_psnr: empty frames");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.pixels()[i] - b.pixels()[i];
        acc += d * d;
    }
    MsePsnr out;
    out.mse = acc / static_cast<double>(a.size());
    out.psnr = out.mse == 0.0 ? std::numeric_limits<double>::infinity()
                              : 10.0 * std::log10(255.0 * 255.0 / out.mse);
    return out;
}

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

nlohmann::json scores_json(const Scores& s) {
    return {{"sensitivity", s.sensitivity},
            {"specificity", s.specificity},
            {"precision", s.precision},
            {"recall", s.recall},
            {"jaccard", s.jaccard},
            {"dice", s.dice},
            {"f1", s.f1},
            {"mcc", s.mcc},
            {"accuracy", s.accuracy},
            {"error_rate", s.error_rate},
            {"observed_agreement", s.observed_agreement},
            {"chance_agreement", s.chance_agreement},
            {"kappa", s.kappa}};
}

const char* kScoreColumns =
    "sensitivity,specificity,precision,recall,jaccard,dice,f1,mcc,accuracy,error_rate,"
    "observed_agreement,chance_agreement,kappa";

std::string scores_csv(const Scores& s) {
    const double values[] = {s.sensitivity, s.specificity, s.precision, s.recall, s.jaccard,
                             s.dice, s.f1, s.mcc, s.accuracy, s.error_rate,
                             s.observed_agreement, s.chance_agreement, s.kappa};
    std::string out;
    for (double v : values) {
        out += ',';
        out += format_double(v);
    }
    return out;
}

}  // namespace

nlohmann::json to_json(const MetricsReport& report, const std::vector<std::string>& classes) {
    nlohmann::json per_class = nlohmann::json::array();
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const auto& cr = report.per_class[c];
        per_class.push_back({{"class", c < classes.size() ? classes[c] : std::to_string(c)},
                             {"tp", cr.counts.tp},
                             {"fp", cr.counts.fp},
                             {"tn", cr.counts.tn},
                             {"fn", cr.counts.fn},
                             {"scores", scores_json(cr.scores)}});
    }
    return {{"total", report.total},
            {"overall_accuracy", report.overall_accuracy},
            {"macro", scores_json(report.macro)},
            {"per_class", std::move(per_class)},
            {"conventions", "one-vs-rest per class, unweighted macro mean; zero-denominator ratios are 0; "
                            "MCC is 0 when a factor under the root is 0; kappa is 0 when chance agreement is 1"}};
}

std::string to_csv(const MetricsReport& report, const std::vector<std::string>& classes) {
    std::ostringstream out;
    out << "class,tp,fp,tn,fn," << kScoreColumns << '\n';
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const auto& cr = report.per_class[c];
        out << (c < classes.size() ? classes[c] : std::to_string(c)) << ',' << cr.counts.tp << ','
            << cr.counts.fp << ',' << cr.counts.tn << ',' << cr.counts.fn << scores_csv(cr.scores) << '\n';
    }
    out << "macro,,,," << scores_csv(report.macro) << '\n';
    out << "overall_accuracy," << format_double(report.overall_accuracy) << '\n';
    return out.str();
}

std::string confusion_csv(const ConfusionMatrix& cm) {
    std::ostringstream out;
    out << "actual\\predicted";
    for (std::size_t c = 0; c < cm.n_classes; ++c) out << ',' << c;
    out << '\n';
    for (std::size_t r = 0; r < cm.n_classes; ++r) {
        out << r;
        for (std::size_t c = 0; c < cm.n_classes; ++c) out << ',' << cm.at(r, c);
        out << '\n';
    }
    return out.str();
}

std::string roc_csv(const RocCurve& curve) {
    std::ostringstream out;
    out << "threshold,fpr,tpr\n";
    for (const auto& p : curve.points) {
        out << format_double(p.threshold) << ',' << format_double(p.fpr) << ',' << format_double(p.tpr) << '\n';
    }
    return out.str();
}

}  // namespace cpwtnet::metrics
