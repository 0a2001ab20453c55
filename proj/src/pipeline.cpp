#include "cpwtnet/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace cpwtnet::pipeline {

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kFeatures = "features.csv";
constexpr const char* kMask = "mask.json";
constexpr const char* kModel = "model.json";
constexpr const char* kRunRecord = "run_record.json";

// Re-throws stage failures with the stage name, keeping the error category.
template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
    const std::string prefix = std::string("stage ") + stage + ": ";
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    } catch (const NumericError& e) {
        throw NumericError(prefix + e.what());
    } catch (const DataError& e) {
        throw DataError(prefix + e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        throw DataError(prefix + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(std::string("missing ") + what + " artifact: " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

nlohmann::json read_json(const fs::path& path, const char* what) {
    try {
        return nlohmann::json::parse(read_text(path, what));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("malformed " + std::string(what) + " artifact " + path.string() + ": " + e.what());
    }
}

frameio::DatasetManifest load_split_manifest(const fs::path& out) {
    auto manifest = frameio::load_manifest(out / kManifest);
    for (const auto& v : manifest.videos) {
        if (v.split == frameio::Split::Unassigned) {
            throw DataError("manifest has videos without a split: " + v.id);
        }
    }
    return manifest;
}

struct FrameRef {
    std::size_t video;
    std::size_t frame;
};

std::vector<FrameRef> frames_of(const frameio::DatasetManifest& manifest,
                                std::optional<frameio::Split> only = std::nullopt) {
    std::vector<FrameRef> refs;
    for (std::size_t v = 0; v < manifest.videos.size(); ++v) {
        if (only && manifest.videos[v].split != *only) continue;
        for (std::size_t f = 0; f < manifest.videos[v].frames.size(); ++f) refs.push_back({v, f});
    }
    return refs;
}

cpwt::PatternImage load_pattern(const fs::path& path) {
    if (!fs::exists(path)) {
        throw DataError("missing pattern artifact: " + path.string());
    }
    return cpwt::PatternImage::from_frame(frameio::load_frame(path));
}

std::vector<cnn::Tensor> load_inputs(const PipelineConfig& config, const frameio::DatasetManifest& manifest,
                                     const std::vector<FrameRef>& refs, const gwo::FeatureMask& mask) {
    std::vector<cnn::Tensor> inputs(refs.size());
    parallel_for(refs.size(), [&](std::size_t i) {
        const auto& video = manifest.videos[refs[i].video];
        inputs[i] = cnn::prepare_input(load_pattern(pattern_path(config.output_dir, video, refs[i].frame)),
                                       mask, config.geometry);
    });
    return inputs;
}

gwo::FeatureMask load_mask(const fs::path& out) { return gwo::mask_from_json(read_json(out / kMask, "mask")); }

std::string safe_name(const std::string& s) {
    std::string out = s;
    for (char& ch : out) {
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
    }
    return out;
}

}  // namespace

PipelineConfig PipelineConfig::from(const KeyValueConfig& kv) {
    PipelineConfig c;
    auto non_negative = [&](const std::string& key, long long fallback) {
        const long long v = kv.get_int(key, fallback);
        if (v < 0) throw ConfigError(key + " must be non-negative");
        return static_cast<std::uint64_t>(v);
    };
    c.dataset_root = kv.get_string("dataset.root", "");
    c.output_dir = kv.get_string("output.dir", c.output_dir.string());
    c.train_fraction = kv.get_double("dataset.train_fraction", c.train_fraction);
    c.split_seed = non_negative("dataset.split_seed", static_cast<long long>(c.split_seed));
    if (kv.has("preprocess.laplacian_mask")) {
        c.laplacian = preprocess::LaplacianMask::from_values(kv.get_doubles("preprocess.laplacian_mask"));
    }
    if (kv.has("cpwt.convolution_mask")) {
        c.descriptor.mask = cpwt::ConvolutionMask5::from_values(kv.get_doubles("cpwt.convolution_mask"));
    }
    c.selection.wolves = non_negative("gwo.wolves", static_cast<long long>(c.selection.wolves));
    c.selection.iterations = non_negative("gwo.iterations", static_cast<long long>(c.selection.iterations));
    c.selection.seed = non_negative("gwo.seed", static_cast<long long>(c.selection.seed));
    c.selection.threshold = kv.get_double("gwo.threshold", c.selection.threshold);
    c.selection.size_penalty = kv.get_double("gwo.size_penalty", c.selection.size_penalty);
    c.selection.validation_fraction = kv.get_double("gwo.validation_fraction", c.selection.validation_fraction);
    c.training.learning_rate = kv.get_double("cnn.learning_rate", c.training.learning_rate);
    c.training.epochs = non_negative("cnn.epochs", static_cast<long long>(c.training.epochs));
    c.training.batch = non_negative("cnn.batch", static_cast<long long>(c.training.batch));
    c.training.seed = non_negative("cnn.seed", static_cast<long long>(c.training.seed));
    const auto side = non_negative("cnn.input_size", static_cast<long long>(c.geometry.height));
    c.geometry = cnn::Shape{1, side, side};
    const auto aggregation = kv.get_string("pipeline.aggregation", "vote");
    if (aggregation == "vote") {
        c.aggregation = Aggregation::Vote;
    } else if (aggregation == "mean_prob") {
        c.aggregation = Aggregation::MeanProbability;
    } else {
        throw ConfigError("pipeline.aggregation must be 'vote' or 'mean_prob'");
    }
    c.validate();
    return c;
}

void PipelineConfig::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("dataset.train_fraction must lie in (0, 1)");
    }
    if (selection.wolves < 4) throw ConfigError("gwo.wolves must be at least 4");
    if (selection.iterations < 1) throw ConfigError("gwo.iterations must be at least 1");
    if (training.batch < 1) throw ConfigError("cnn.batch must be at least 1");
    if (!(training.learning_rate >= 0.0) || !std::isfinite(training.learning_rate)) {
        throw ConfigError("cnn.learning_rate must be a finite non-negative number");
    }
    if (geometry.height < 10) throw ConfigError("cnn.input_size must be at least 10");
    if (output_dir.empty()) throw ConfigError("output.dir must be set");
}

nlohmann::json PipelineConfig::to_json() const {
    return {{"dataset", {{"root", dataset_root.generic_string()},
                         {"train_fraction", train_fraction},
                         {"split_seed", split_seed}}},
            {"output", {{"dir", output_dir.generic_string()}}},
            {"preprocess", {{"laplacian_mask", laplacian.weights}}},
            {"cpwt", {{"convolution_mask", descriptor.mask.weights}}},
            {"gwo", {{"wolves", selection.wolves},
                     {"iterations", selection.iterations},
                     {"seed", selection.seed},
                     {"threshold", selection.threshold},
                     {"size_penalty", selection.size_penalty},
                     {"validation_fraction", selection.validation_fraction}}},
            {"cnn", {{"learning_rate", training.learning_rate},
                     {"epochs", training.epochs},
                     {"batch", training.batch},
                     {"seed", training.seed},
                     {"input_size", geometry.height}}},
            {"pipeline", {{"aggregation", aggregation == Aggregation::Vote ? "vote" : "mean_prob"}}}};
}

std::size_t vote(std::span<const std::size_t> frame_labels) {
    if (frame_labels.empty()) {
        throw DataError("vote: no frame labels");
    }
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t label : frame_labels) ++counts[label];
    std::size_t best = counts.begin()->first;
    std::size_t best_count = 0;
    for (const auto& [label, count] : counts) {
        if (count > best_count) {
            best = label;
            best_count = count;
        }
    }
    return best;
}

std::size_t mean_probability_label(std::span<const std::vector<double>> frame_probabilities) {
    if (frame_probabilities.empty()) {
        throw DataError("mean_probability_label: no frames");
    }
    std::vector<double> mean(frame_probabilities.front().size(), 0.0);
    for (const auto& p : frame_probabilities) {
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += p[k];
    }
    return cnn::argmax(mean);
}

std::size_t worker_count() {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("CPWT_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) n = static_cast<std::size_t>(v);
    }
    return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min(worker_count(), n);
    std::vector<std::exception_ptr> errors(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
                break;
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i; !failed && (i = next.fetch_add(1)) < n;) {
                    try {
                        body(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                        failed = true;
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::string fnv1a64_hex(const fs::path& file) {
    const std::string bytes = read_text(file, "checksummed");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

fs::path filtered_path(const fs::path& out, const frameio::Video& video, std::size_t frame) {
    return out / "filtered" / video.id / (video.frames.at(frame).stem().string() + ".pgm");
}

fs::path pattern_path(const fs::path& out, const frameio::Video& video, std::size_t frame) {
    return out / "patterns" / video.id / (video.frames.at(frame).stem().string() + ".pgm");
}

void preprocess_file(const fs::path& input, const fs::path& output, const preprocess::LaplacianMask& mask) {
    const Frame frame = frameio::load_frame(input);
    require_intensity_range(frame, input.string());
    frameio::save_pgm(preprocess::ca_filter(frame, mask), output);
}

void write_features_csv(const std::vector<FeatureRow>& rows, const fs::path& path) {
    std::ostringstream out;
    out << "video_id,frame_index,label";
    for (std::size_t b = 0; b < cpwt::kBins; ++b) out << ",b" << b;
    out << '\n';
    for (const auto& row : rows) {
        out << row.video_id << ',' << row.frame_index << ',' << row.label;
        for (double v : row.feature.bins) out << ',' << metrics::format_double(v);
        out << '\n';
    }
    write_text(path, out.str());
}

std::vector<FeatureRow> read_features_csv(const fs::path& path) {
    std::istringstream in(read_text(path, "features"));
    std::string line;
    if (!std::getline(in, line) || line.rfind("video_id,frame_index,label", 0) != 0) {
        throw DataError("features file lacks the expected header: " + path.string());
    }
    std::vector<FeatureRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream fields(line);
        std::string cell;
        while (std::getline(fields, cell, ',')) cells.push_back(cell);
        if (cells.size() != 3 + cpwt::kBins) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": wrong column count");
        }
        FeatureRow row;
        row.video_id = cells[0];
        try {
            row.frame_index = std::stoul(cells[1]);
            row.label = std::stoul(cells[2]);
            for (std::size_t b = 0; b < cpwt::kBins; ++b) row.feature.bins[b] = std::stod(cells[3 + b]);
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed number");
        }
        row.feature.normalized = true;
        rows.push_back(std::move(row));
    }
    return rows;
}

void stage_preprocess(const PipelineConfig& config) {
    in_stage("preprocess", [&] {
        config.validate();
        auto manifest = frameio::split_dataset(frameio::scan_dataset(config.dataset_root),
                                               config.train_fraction, config.split_seed);
        frameio::save_manifest(manifest, config.output_dir / kManifest);
        const auto refs = frames_of(manifest);
        parallel_for(refs.size(), [&](std::size_t i) {
            const auto& video = manifest.videos[refs[i].video];
            const auto& source = video.frames[refs[i].frame];
            try {
                preprocess_file(source, filtered_path(config.output_dir, video, refs[i].frame), config.laplacian);
            } catch (const DataError& e) {
                throw DataError(source.string() + ": " + e.what());
            }
        });
    });
}

void stage_extract(const PipelineConfig& config) {
    in_stage("extract", [&] {
        const auto manifest = load_split_manifest(config.output_dir);
        const auto refs = frames_of(manifest);
        std::vector<FeatureRow> rows(refs.size());
        parallel_for(refs.size(), [&](std::size_t i) {
            const auto& video = manifest.videos[refs[i].video];
            const auto source = filtered_path(config.output_dir, video, refs[i].frame);
            if (!fs::exists(source)) {
                throw DataError("missing filtered frame artifact: " + source.string());
            }
            try {
                const Frame frame = frameio::load_frame(source);
                auto extraction = cpwt::extract(frame, config.descriptor);
                frameio::save_pgm(extraction.pattern.to_frame(), pattern_path(config.output_dir, video, refs[i].frame));
                rows[i] = FeatureRow{video.id, refs[i].frame, video.label, extraction.feature};
            } catch (const DataError& e) {
                throw DataError(source.string() + ": " + e.what());
            }
        });
        write_features_csv(rows, config.output_dir / kFeatures);
    });
}

void stage_select(const PipelineConfig& config) {
    in_stage("select", [&] {
        const auto manifest = load_split_manifest(config.output_dir);
        std::map<std::string, frameio::Split> split_of;
        for (const auto& v : manifest.videos) split_of[v.id] = v.split;
        std::vector<cpwt::FeatureVector> features;
        std::vector<std::size_t> labels;
        for (auto& row : read_features_csv(config.output_dir / kFeatures)) {
            const auto it = split_of.find(row.video_id);
            if (it == split_of.end()) throw DataError("features reference unknown video " + row.video_id);
            if (it->second != frameio::Split::Train) continue;
            features.push_back(row.feature);
            labels.push_back(row.label);
        }
        const auto selection = gwo::select_features(features, labels, config.selection);
        write_text(config.output_dir / kMask, gwo::to_json(selection).dump(2) + "\n");
    });
}

void stage_train(const PipelineConfig& config) {
    in_stage("train", [&] {
        const auto manifest = load_split_manifest(config.output_dir);
        const auto mask = load_mask(config.output_dir);
        const auto refs = frames_of(manifest, frameio::Split::Train);
        const auto inputs = load_inputs(config, manifest, refs, mask);
        std::vector<std::size_t> labels;
        for (const auto& ref : refs) labels.push_back(manifest.videos[ref.video].label);
        const auto result = cnn::train(inputs, labels, manifest.classes, config.geometry, config.training);
        cnn::save_model(result.model, config.output_dir / kModel);
        std::ostringstream log;
        log << "epoch,loss\n";
        for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
            log << e + 1 << ',' << metrics::format_double(result.epoch_loss[e]) << '\n';
        }
        log << "training_accuracy," << metrics::format_double(result.training_accuracy) << '\n';
        write_text(config.output_dir / "train_log.csv", log.str());
    });
}

EvalResult stage_eval(const PipelineConfig& config) {
    return in_stage("eval", [&] {
        const auto model = cnn::load_model(config.output_dir / kModel);
        const auto manifest = load_split_manifest(config.output_dir);
        if (model.classes != manifest.classes) {
            throw DataError("model classes differ from the manifest classes");
        }
        const auto mask = load_mask(config.output_dir);
        const auto refs = frames_of(manifest, frameio::Split::Test);
        if (refs.empty()) throw DataError("no test videos in the manifest");
        const auto inputs = load_inputs(config, manifest, refs, mask);
        std::vector<cnn::Prediction> predictions(refs.size());
        parallel_for(refs.size(), [&](std::size_t i) { predictions[i] = cnn::predict(model, inputs[i]); });

        const std::size_t n_classes = manifest.class_count();
        std::ostringstream frame_csv;
        frame_csv << "video_id,frame_index,label,predicted";
        for (std::size_t k = 0; k < n_classes; ++k) frame_csv << ",p" << k;
        frame_csv << '\n';
        std::size_t frame_correct = 0;
        for (std::size_t i = 0; i < refs.size(); ++i) {
            const auto& video = manifest.videos[refs[i].video];
            frame_csv << video.id << ',' << refs[i].frame << ',' << video.label << ',' << predictions[i].label;
            for (double p : predictions[i].probabilities) frame_csv << ',' << metrics::format_double(p);
            frame_csv << '\n';
            if (predictions[i].label == video.label) ++frame_correct;
        }

        // Group frame predictions per video, in manifest order.
        std::vector<std::size_t> video_actual, video_predicted;
        std::vector<std::vector<double>> video_scores;
        std::ostringstream video_csv;
        video_csv << "video_id,label,predicted";
        for (std::size_t k = 0; k < n_classes; ++k) video_csv << ",mean_p" << k;
        video_csv << '\n';
        for (std::size_t start = 0; start < refs.size();) {
            std::size_t end = start;
            while (end < refs.size() && refs[end].video == refs[start].video) ++end;
            std::vector<std::size_t> labels;
            std::vector<std::vector<double>> probs;
            std::vector<double> mean(n_classes, 0.0);
            for (std::size_t i = start; i < end; ++i) {
                labels.push_back(predictions[i].label);
                probs.push_back(predictions[i].probabilities);
                for (std::size_t k = 0; k < n_classes; ++k) mean[k] += predictions[i].probabilities[k];
            }
            for (double& m : mean) m /= static_cast<double>(end - start);
            const auto& video = manifest.videos[refs[start].video];
            const std::size_t predicted =
                config.aggregation == Aggregation::Vote ? vote(labels) : mean_probability_label(probs);
            video_actual.push_back(video.label);
            video_predicted.push_back(predicted);
            video_scores.push_back(mean);
            video_csv << video.id << ',' << video.label << ',' << predicted;
            for (double m : mean) video_csv << ',' << metrics::format_double(m);
            video_csv << '\n';
            start = end;
        }

        EvalResult result;
        result.confusion = metrics::confusion(video_actual, video_predicted, n_classes);
        result.report = metrics::report(result.confusion);
        result.frame_accuracy = static_cast<double>(frame_correct) / static_cast<double>(refs.size());

        double auc_sum = 0.0;
        std::size_t auc_count = 0;
        for (std::size_t k = 0; k < n_classes; ++k) {
            std::vector<double> scores;
            std::vector<std::uint8_t> positive;
            for (std::size_t v = 0; v < video_actual.size(); ++v) {
                scores.push_back(video_scores[v][k]);
                positive.push_back(video_actual[v] == k ? 1 : 0);
            }
            const bool both = std::count(positive.begin(), positive.end(), 1) > 0 &&
                              std::count(positive.begin(), positive.end(), 0) > 0;
            if (!both) {
                result.class_auc.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            const auto curve = metrics::roc(scores, positive);
            result.class_auc.push_back(curve.auc);
            auc_sum += curve.auc;
            ++auc_count;
            write_text(config.output_dir / "roc" / ("roc_" + safe_name(manifest.classes[k]) + ".csv"),
                       metrics::roc_csv(curve));
        }
        result.macro_auc = auc_count > 0 ? auc_sum / static_cast<double>(auc_count) : 0.0;

        nlohmann::json report = metrics::to_json(result.report, manifest.classes);
        report["frame_accuracy"] = result.frame_accuracy;
        report["aggregation"] = config.aggregation == Aggregation::Vote ? "vote" : "mean_prob";
        nlohmann::json aucs = nlohmann::json::array();
        for (double a : result.class_auc) aucs.push_back(std::isnan(a) ? nlohmann::json() : nlohmann::json(a));
        report["roc_auc"] = {{"per_class", aucs}, {"macro", result.macro_auc}};

        write_text(config.output_dir / "predictions.csv", frame_csv.str());
        write_text(config.output_dir / "video_predictions.csv", video_csv.str());
        write_text(config.output_dir / "confusion.csv", metrics::confusion_csv(result.confusion));
        write_text(config.output_dir / "report.json", report.dump(2) + "\n");
        write_text(config.output_dir / "report.csv", metrics::to_csv(result.report, manifest.classes));
        return result;
    });
}

std::pair<RunRecord, EvalResult> run_pipeline(const PipelineConfig& config) {
    using clock = std::chrono::steady_clock;
    RunRecord record;
    record.config = config.to_json();
    auto timed = [&](const char* name, auto&& fn) {
        const auto start = clock::now();
        fn();
        const double seconds = std::chrono::duration<double>(clock::now() - start).count();
        record.timings.push_back({name, seconds});
        return seconds;
    };
    EvalResult eval;
    timed("preprocess", [&] { stage_preprocess(config); });
    timed("extract", [&] { stage_extract(config); });
    record.train_seconds += timed("select", [&] { stage_select(config); });
    record.train_seconds += timed("train", [&] { stage_train(config); });
    record.test_seconds = timed("eval", [&] { eval = stage_eval(config); });

    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(config.output_dir)) {
        if (entry.is_regular_file() && entry.path().filename() != kRunRecord) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        record.artifacts.push_back({fs::relative(f, config.output_dir).generic_string(), fnv1a64_hex(f)});
    }

    nlohmann::json timings = nlohmann::json::array();
    for (const auto& t : record.timings) timings.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    nlohmann::json artifacts = nlohmann::json::array();
    for (const auto& a : record.artifacts) artifacts.push_back({{"path", a.path}, {"fnv1a64", a.checksum}});
    const nlohmann::json doc = {{"config", record.config},
                                {"timings", timings},
                                {"train_seconds", record.train_seconds},
                                {"test_seconds", record.test_seconds},
                                {"artifacts", artifacts}};
    write_text(config.output_dir / kRunRecord, doc.dump(2) + "\n");
    return {record, eval};
}

}  // namespace cpwtnet::pipeline
