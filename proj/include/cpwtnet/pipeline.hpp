#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpwtnet/cnn.hpp"
#include "cpwtnet/config.hpp"
#include "cpwtnet/cpwt.hpp"
#include "cpwtnet/frameio.hpp"
#include "cpwtnet/gwo.hpp"
#include "cpwtnet/metrics.hpp"
#include "cpwtnet/preprocess.hpp"

// End-to-end orchestration. Every stage reads the previous stage's artifacts
// from the output directory and writes its own, so running the stages one by
// one and running the whole pipeline produce the same bytes.
//
//   out/manifest.json             scan + split
//   out/filtered/<video>/*.pgm    cellular-automaton filtered frames
//   out/patterns/<video>/*.pgm    descriptor code images
//   out/features.csv              video_id,frame_index,label,b0..b255
//   out/mask.json                 selected histogram bins
//   out/model.json, train_log.csv
//   out/predictions.csv, video_predictions.csv, confusion.csv,
//   out/report.json, report.csv, roc/roc_<class>.csv
//   out/run_record.json           timings and artifact checksums (run only)
namespace cpwtnet::pipeline {

namespace fs = std::filesystem;

enum class Aggregation { Vote, MeanProbability };

struct PipelineConfig {
    fs::path dataset_root;
    fs::path output_dir = "out";
    double train_fraction = 0.7;
    std::uint64_t split_seed = 1;
    preprocess::LaplacianMask laplacian;
    cpwt::Config descriptor;
    gwo::SelectionConfig selection;
    cnn::TrainConfig training;
    cnn::Shape geometry = cnn::kDefaultInput;
    Aggregation aggregation = Aggregation::Vote;

    /// Reads [dataset], [output], [preprocess], [cpwt], [gwo], [cnn] and
    /// [pipeline] sections; absent keys keep their defaults.
    static PipelineConfig from(const KeyValueConfig& kv);
    void validate() const;
    nlohmann::json to_json() const;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct Artifact {
    std::string path;  // relative to the output directory
    std::string checksum;
};

struct RunRecord {
    std::vector<StageTiming> timings;
    double train_seconds = 0.0;
    double test_seconds = 0.0;
    std::vector<Artifact> artifacts;
    nlohmann::json config;
};

struct EvalResult {
    metrics::ConfusionMatrix confusion;
    metrics::MetricsReport report;
    double frame_accuracy = 0.0;
    std::vector<double> class_auc;  // NaN when a class lacks positives or negatives
    double macro_auc = 0.0;
};

/// Modal label, lowest label on ties.
std::size_t vote(std::span<const std::size_t> frame_labels);
/// Argmax of the mean probability vector, lowest label on ties.
std::size_t mean_probability_label(std::span<const std::vector<double>> frame_probabilities);

/// Worker count from CPWT_THREADS (default: hardware concurrency, at least 1).
std::size_t worker_count();
/// Runs body(i) for i in [0, n) on a worker pool; rethrows the failure with
/// the lowest index.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

std::string fnv1a64_hex(const fs::path& file);

void stage_preprocess(const PipelineConfig& config);
void stage_extract(const PipelineConfig& config);
void stage_select(const PipelineConfig& config);
void stage_train(const PipelineConfig& config);
EvalResult stage_eval(const PipelineConfig& config);

/// All stages in order plus out/run_record.json.
std::pair<RunRecord, EvalResult> run_pipeline(const PipelineConfig& config);

/// Filters one frame file into one PGM.
void preprocess_file(const fs::path& input, const fs::path& output,
                     const preprocess::LaplacianMask& mask = {});

struct FeatureRow {
    std::string video_id;
    std::size_t frame_index = 0;
    std::size_t label = 0;
    cpwt::FeatureVector feature;
};

void write_features_csv(const std::vector<FeatureRow>& rows, const fs::path& path);
std::vector<FeatureRow> read_features_csv(const fs::path& path);

fs::path filtered_path(const fs::path& out, const frameio::Video& video, std::size_t frame);
fs::path pattern_path(const fs::path& out, const frameio::Video& video, std::size_t frame);

}  // namespace cpwtnet::pipeline
