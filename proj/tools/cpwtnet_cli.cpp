// cpwtnet: frame-level action classification pipeline.
//
//   cpwtnet synth --out data                 write the texture video fixture
//   cpwtnet run --config run.cfg             every stage plus run_record.json
//   cpwtnet preprocess|extract|select|train|eval --config run.cfg
//   cpwtnet preprocess --input f.png --output f.pgm
//   cpwtnet report --out out --format csv
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "cpwtnet/pipeline.hpp"
#include "cpwtnet/synthetic.hpp"

namespace {

using namespace cpwtnet;
namespace fs = std::filesystem;

struct Overrides {
    std::string config_path;
    std::string data;
    std::string out;
    std::optional<std::size_t> wolves, iterations, gwo_seed;
    std::optional<double> lr;
    std::optional<std::size_t> epochs, batch, cnn_seed;
    std::string laplacian_mask;
    std::string aggregation;
};

pipeline::PipelineConfig resolve(const Overrides& o) {
    KeyValueConfig kv;
    if (!o.config_path.empty()) kv = KeyValueConfig::load(o.config_path);
    if (!o.data.empty()) kv.set("dataset.root", o.data);
    if (!o.out.empty()) kv.set("output.dir", o.out);
    if (!o.laplacian_mask.empty()) kv.set("preprocess.laplacian_mask", o.laplacian_mask);
    if (!o.aggregation.empty()) kv.set("pipeline.aggregation", o.aggregation);
    auto c = pipeline::PipelineConfig::from(kv);
    if (o.wolves) c.selection.wolves = *o.wolves;
    if (o.iterations) c.selection.iterations = *o.iterations;
    if (o.gwo_seed) c.selection.seed = *o.gwo_seed;
    if (o.lr) c.training.learning_rate = *o.lr;
    if (o.epochs) c.training.epochs = *o.epochs;
    if (o.batch) c.training.batch = *o.batch;
    if (o.cnn_seed) c.training.seed = *o.cnn_seed;
    c.validate();
    return c;
}

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "Pipeline config file");
    cmd->add_option("--data", o.data, "Dataset root (class/video/frame layout)");
    cmd->add_option("--out", o.out, "Output directory");
}

void add_gwo(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--wolves", o.wolves, "Pack size");
    cmd->add_option("--iters", o.iterations, "GWO iterations");
    cmd->add_option("--seed", o.gwo_seed, "GWO seed");
}

void add_cnn(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--lr", o.lr, "Learning rate");
    cmd->add_option("--epochs", o.epochs, "Training epochs");
    cmd->add_option("--batch", o.batch, "Mini-batch size");
    cmd->add_option("--seed", o.cnn_seed, "CNN seed");
}

void print_summary(const pipeline::EvalResult& r) {
    std::printf("videos %zu  accuracy %.4f  frame accuracy %.4f  macro AUC %.4f\n", r.report.total,
                r.report.overall_accuracy, r.frame_accuracy, r.macro_auc);
}

int run(int argc, char** argv) {
    CLI::App app{"Frame-level action classification with CA filtering, CPWT descriptors, GWO selection and a CNN"};
    app.require_subcommand(1);
    Overrides o;

    auto* synth = app.add_subcommand("synth", "Write the synthetic texture video dataset");
    synthetic::TextureDatasetSpec spec;
    std::string synth_out;
    synth->add_option("--out", synth_out, "Dataset root")->required();
    synth->add_option("--videos", spec.videos_per_class, "Videos per class");
    synth->add_option("--frames", spec.frames_per_video, "Frames per video");
    synth->add_option("--size", spec.size, "Frame side length");
    synth->add_option("--noise", spec.impulse_density, "Impulse noise density");
    synth->add_option("--period-min", spec.period_min, "Shortest texture period");
    synth->add_option("--period-max", spec.period_max, "Longest texture period");
    synth->add_option("--seed", spec.seed, "Generator seed");

    auto* pre = app.add_subcommand("preprocess", "Cellular-automaton filtering of every frame");
    add_common(pre, o);
    std::string single_in, single_out;
    pre->add_option("--input", single_in, "Filter one frame file");
    pre->add_option("--output", single_out, "Destination PGM for --input");
    pre->add_option("--laplacian-mask", o.laplacian_mask, "Nine comma-separated mask weights");

    auto* ext = app.add_subcommand("extract", "Descriptor patterns and histograms");
    add_common(ext, o);
    auto* sel = app.add_subcommand("select", "Grey wolf feature selection on the training split");
    add_common(sel, o);
    add_gwo(sel, o);
    auto* trn = app.add_subcommand("train", "Train the CNN on masked training patterns");
    add_common(trn, o);
    add_cnn(trn, o);
    auto* evl = app.add_subcommand("eval", "Predict test videos and write the reports");
    add_common(evl, o);
    evl->add_option("--aggregation", o.aggregation, "vote or mean_prob");

    auto* all = app.add_subcommand("run", "All stages in order");
    add_common(all, o);
    all->add_option("--aggregation", o.aggregation, "vote or mean_prob");
    all->add_option("--wolves", o.wolves, "Pack size");
    all->add_option("--iters", o.iterations, "GWO iterations");
    all->add_option("--gwo-seed", o.gwo_seed, "GWO seed");
    all->add_option("--lr", o.lr, "Learning rate");
    all->add_option("--epochs", o.epochs, "Training epochs");
    all->add_option("--batch", o.batch, "Mini-batch size");
    all->add_option("--cnn-seed", o.cnn_seed, "CNN seed");

    auto* rep = app.add_subcommand("report", "Print the evaluation report");
    std::string format = "json";
    add_common(rep, o);
    rep->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (synth->parsed()) {
        synthetic::write_texture_dataset(synth_out, spec);
        return 0;
    }
    if (pre->parsed() && !single_in.empty()) {
        if (single_out.empty()) throw ConfigError("--input requires --output");
        preprocess::LaplacianMask mask;
        if (!o.laplacian_mask.empty()) {
            mask = preprocess::LaplacianMask::from_values(parse_double_list(o.laplacian_mask, "--laplacian-mask"));
        }
        pipeline::preprocess_file(single_in, single_out, mask);
        return 0;
    }
    if (rep->parsed()) {
        const auto c = resolve(o);
        const fs::path path = c.output_dir / (format == "json" ? "report.json" : "report.csv");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("missing report artifact: " + path.string() + " (run eval first)");
        std::cout << in.rdbuf();
        return 0;
    }

    const auto config = resolve(o);
    if (pre->parsed()) pipeline::stage_preprocess(config);
    if (ext->parsed()) pipeline::stage_extract(config);
    if (sel->parsed()) pipeline::stage_select(config);
    if (trn->parsed()) pipeline::stage_train(config);
    if (evl->parsed()) print_summary(pipeline::stage_eval(config));
    if (all->parsed()) {
        const auto [record, eval] = pipeline::run_pipeline(config);
        print_summary(eval);
        std::printf("train %.2f s  test %.2f s\n", record.train_seconds, record.test_seconds);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const cpwtnet::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const cpwtnet::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const cpwtnet::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
