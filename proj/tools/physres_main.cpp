#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "physres/artifact.hpp"
#include "physres/common.hpp"
#include "physres/config.hpp"
#include "physres/csv.hpp"
#include "physres/eval.hpp"
#include "physres/explain.hpp"
#include "physres/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace physres;

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::optional<int> held_out;
    bool no_shap = false;
    std::optional<int> mc_samples;
    std::optional<int> workers;
};

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg = opts.config_path.empty() ? default_config() : load_config_file(opts.config_path);
    if (opts.seed.has_value()) cfg.pipeline.seed = *opts.seed;
    if (opts.no_shap) cfg.pipeline.use_shap = false;
    if (opts.mc_samples.has_value()) cfg.pipeline.predict_mc_samples = *opts.mc_samples;
    if (opts.workers.has_value()) cfg.pipeline.workers = *opts.workers;
    if (opts.held_out.has_value()) {
        fault_label_from_int(*opts.held_out);
        cfg.held_out = *opts.held_out;
    }
    return cfg;
}

void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) throw DataError("cannot create output directory: " + out);
}

void write_json_file(const std::string& path, const json& doc) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open file for writing: " + path);
    f << doc.dump(2) << "\n";
    if (!f) throw DataError("write failed: " + path);
}

json eval_report_json(const EvalReport& r) {
    json confusion = json::array();
    for (long i = 0; i < r.confusion.rows(); ++i) {
        json row = json::array();
        for (long j = 0; j < r.confusion.cols(); ++j) row.push_back(r.confusion(i, j));
        confusion.push_back(std::move(row));
    }
    std::vector<int> labels;
    for (const FaultLabel l : r.class_labels) labels.push_back(static_cast<int>(l));
    json doc;
    doc["class_labels"] = labels;
    doc["overall_accuracy"] = r.overall_accuracy;
    doc["per_class_accuracy"] = std::vector<double>(r.per_class_accuracy.data(),
                                                    r.per_class_accuracy.data() + r.per_class_accuracy.size());
    doc["confusion"] = confusion;
    doc["mean_total"] = std::vector<double>(r.mean_total.data(), r.mean_total.data() + r.mean_total.size());
    doc["mean_aleatoric"] =
        std::vector<double>(r.mean_aleatoric.data(), r.mean_aleatoric.data() + r.mean_aleatoric.size());
    doc["mean_epistemic"] =
        std::vector<double>(r.mean_epistemic.data(), r.mean_epistemic.data() + r.mean_epistemic.size());
    doc["trainable_params"] = r.trainable_params;
    doc["num_samples"] = r.num_samples;
    return doc;
}

void write_confusion_csv(const std::string& path, const EvalReport& r) {
    std::vector<std::string> header = {"true_label"};
    for (const FaultLabel l : r.class_labels) {
        header.push_back("pred_" + std::to_string(static_cast<int>(l)));
    }
    std::vector<std::vector<double>> rows;
    for (long i = 0; i < r.confusion.rows(); ++i) {
        std::vector<double> row;
        row.push_back(static_cast<double>(static_cast<int>(r.class_labels[static_cast<std::size_t>(i)])));
        for (long j = 0; j < r.confusion.cols(); ++j) row.push_back(r.confusion(i, j));
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

void write_shapley_csv(const std::string& path, const ShapleyReport& report) {
    std::vector<std::string> header = {"channel", "aggregate_phi", "rank"};
    const long K = report.per_class.rows();
    for (long k = 0; k < K; ++k) header.push_back("class" + std::to_string(k) + "_phi");

    std::ofstream out(path);
    if (!out) throw DataError("cannot open file for writing: " + path);
    for (std::size_t c = 0; c < header.size(); ++c) out << header[c] << (c + 1 < header.size() ? "," : "\n");
    std::vector<int> rank_of(report.names.size());
    for (std::size_t pos = 0; pos < report.ranking.size(); ++pos) {
        rank_of[static_cast<std::size_t>(report.ranking[pos])] = static_cast<int>(pos) + 1;
    }
    for (std::size_t c = 0; c < report.names.size(); ++c) {
        out << report.names[c] << "," << format_double(report.values[static_cast<long>(c)]) << ","
            << rank_of[c];
        for (long k = 0; k < K; ++k) out << "," << format_double(report.per_class(k, static_cast<long>(c)));
        out << "\n";
    }
    if (!out) throw DataError("write failed: " + path);
}

std::vector<Window> load_data_dir(const std::string& data_dir, int window_len, int hop) {
    const fs::path manifest_path = fs::path(data_dir) / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open manifest: " + manifest_path.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw DataError("manifest parse error: " + std::string(e.what()));
    }
    std::vector<Window> windows;
    for (const auto& entry : manifest.at("files")) {
        const std::string rel = entry.at("path").get<std::string>();
        const FaultLabel label = fault_label_from_int(entry.at("label").get<int>());
        const double rate = entry.at("sample_rate_hz").get<double>();
        RawRecording rec = ingest_csv((fs::path(data_dir) / rel).string(), label, rate);
        rec.load_level = entry.value("load", 0.0);
        auto rec_windows = segment(rec, window_len, hop);
        windows.insert(windows.end(), std::make_move_iterator(rec_windows.begin()),
                       std::make_move_iterator(rec_windows.end()));
    }
    if (windows.empty()) throw DataError("manifest lists no usable recordings");
    return windows;
}

std::vector<Window> windows_for_training(const RunConfig& cfg, const std::string& data_dir,
                                         std::optional<int> exclude_label) {
    std::vector<Window> windows =
        data_dir.empty() ? build_synthetic_dataset(cfg.pipeline)
                         : load_data_dir(data_dir, cfg.pipeline.window_len, cfg.pipeline.hop);
    if (exclude_label.has_value()) {
        const FaultLabel held = fault_label_from_int(*exclude_label);
        std::erase_if(windows, [&](const Window& w) { return w.label == held; });
        if (windows.empty()) throw DataError("no training windows left after excluding held-out class");
    }
    return windows;
}

int cmd_synth(const CommonOpts& opts) {
    const RunConfig cfg = resolve_config(opts);
    ensure_out_dir(opts.out);

    json manifest;
    manifest["config"] = cfg.resolved();
    manifest["seed"] = cfg.pipeline.seed;
    json files = json::array();
    for (std::size_t ci = 0; ci < cfg.pipeline.classes.size(); ++ci) {
        const FaultLabel label = fault_label_from_int(cfg.pipeline.classes[ci]);
        for (std::size_t li = 0; li < cfg.pipeline.loads.size(); ++li) {
            const std::uint64_t rec_seed = mix_seed(cfg.pipeline.seed, 1000 + ci * 64 + li);
            const RawRecording rec =
                synthesize_recording(label, cfg.pipeline.loads[li], cfg.pipeline.synth, rec_seed);
            const std::string name = "recording_c" + std::to_string(cfg.pipeline.classes[ci]) + "_l" +
                                     std::to_string(li) + ".csv";
            write_recording_csv((fs::path(opts.out) / name).string(), rec);
            files.push_back({{"path", name},
                             {"label", cfg.pipeline.classes[ci]},
                             {"load", cfg.pipeline.loads[li]},
                             {"seed", rec_seed},
                             {"sample_rate_hz", cfg.pipeline.synth.sample_rate_hz}});
            log_info("wrote " + name);
        }
    }
    manifest["files"] = std::move(files);
    write_json_file((fs::path(opts.out) / "manifest.json").string(), manifest);
    return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& data_dir, const std::string& artifact_path) {
    const RunConfig cfg = resolve_config(opts);
    const std::vector<Window> windows = windows_for_training(cfg, data_dir, opts.held_out);

    log_info("training on " + std::to_string(windows.size()) + " windows");
    const FeatureMatrix features = extract_features(windows);
    const TrainedModel model = train_pipeline(features, cfg.pipeline);

    const fs::path out_path = artifact_path.empty() ? fs::path(opts.out) / "model.json"
                                                    : fs::path(artifact_path);
    if (out_path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(out_path.parent_path(), ec);
    }
    save_artifact(out_path.string(), model, cfg);
    log_info("artifact written to " + out_path.string());

    std::vector<std::vector<double>> trace_rows;
    for (std::size_t e = 0; e < model.loss_trace.size(); ++e) {
        trace_rows.push_back({static_cast<double>(e), model.loss_trace[e]});
    }
    const fs::path trace_path = out_path.parent_path() / (out_path.stem().string() + "_loss_trace.csv");
    write_csv(trace_path.string(), {"epoch", "loss"}, trace_rows);
    return 0;
}

int cmd_predict(const std::string& artifact_path, const std::string& input_csv, const CommonOpts& opts,
                const std::string& out_file) {
    const LoadedArtifact loaded = load_artifact(artifact_path);
    const TrainedModel& model = loaded.model;
    const RunConfig cfg = parse_config(loaded.config_echo);

    const int mc = opts.mc_samples.value_or(cfg.pipeline.predict_mc_samples);
    const int workers = opts.workers.value_or(cfg.pipeline.workers);
    const std::uint64_t seed = opts.seed.value_or(cfg.pipeline.seed);

    const RawRecording rec = ingest_csv(input_csv, FaultLabel::Healthy, cfg.pipeline.synth.sample_rate_hz);
    const auto windows = segment(rec, cfg.pipeline.window_len, cfg.pipeline.hop);
    const FeatureMatrix features = standardize_with(model, extract_features(windows));
    const auto results = predict_batch(model, features, mc, seed, workers);

    std::ofstream file_out;
    std::ostream* out = &std::cout;
    if (!out_file.empty()) {
        file_out.open(out_file);
        if (!file_out) throw DataError("cannot open file for writing: " + out_file);
        out = &file_out;
    }
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        json line;
        line["window"] = i;
        Eigen::Index best = 0;
        r.probs.maxCoeff(&best);
        line["predicted_label"] = static_cast<int>(model.class_labels[static_cast<std::size_t>(best)]);
        json probs = json::object();
        for (int k = 0; k < model.num_classes(); ++k) {
            probs[std::to_string(static_cast<int>(model.class_labels[static_cast<std::size_t>(k)]))] =
                r.probs[k];
        }
        line["probs"] = std::move(probs);
        line["total"] = r.total;
        line["aleatoric"] = r.aleatoric;
        line["epistemic"] = r.epistemic;
        (*out) << line.dump() << "\n";
    }
    return 0;
}

int cmd_explain(const std::string& artifact_path, const std::string& data_dir, const CommonOpts& opts) {
    const LoadedArtifact loaded = load_artifact(artifact_path);
    const TrainedModel& model = loaded.model;
    const RunConfig cfg = parse_config(loaded.config_echo);
    ensure_out_dir(opts.out);

    std::vector<Window> windows =
        data_dir.empty() ? build_synthetic_dataset(cfg.pipeline)
                         : load_data_dir(data_dir, cfg.pipeline.window_len, cfg.pipeline.hop);
    std::erase_if(windows, [&](const Window& w) { return model.class_index(w.label) < 0; });
    if (windows.empty()) throw DataError("no validation windows for the trained classes");

    const FeatureMatrix validation = standardize_with(model, extract_features(windows));
    const ShapleyReport report = rank_channels(model, validation);

    const fs::path csv_path =
        fs::path(opts.out) / ("explain_" + std::to_string(cfg.pipeline.seed) + ".csv");
    write_shapley_csv(csv_path.string(), report);
    log_info("Shapley report written to " + csv_path.string());
    return 0;
}

int cmd_evaluate(const CommonOpts& opts) {
    const RunConfig cfg = resolve_config(opts);
    ensure_out_dir(opts.out);
    const std::string seed_tag = std::to_string(cfg.pipeline.seed);

    const std::vector<Window> windows = build_synthetic_dataset(cfg.pipeline);

    // unseen-fault protocol
    const UnseenFaultReport unseen =
        unseen_fault_protocol(windows, fault_label_from_int(cfg.held_out), cfg.pipeline);
    json unseen_doc;
    unseen_doc["config"] = cfg.resolved();
    unseen_doc["held_out"] = cfg.held_out;
    unseen_doc["seen"] = eval_report_json(unseen.seen);
    unseen_doc["seen_uncertainty"] = {{"total", unseen.seen_uncertainty.mean_total},
                                      {"aleatoric", unseen.seen_uncertainty.mean_aleatoric},
                                      {"epistemic", unseen.seen_uncertainty.mean_epistemic},
                                      {"num_samples", unseen.seen_uncertainty.num_samples}};
    unseen_doc["unseen_uncertainty"] = {{"total", unseen.unseen_uncertainty.mean_total},
                                        {"aleatoric", unseen.unseen_uncertainty.mean_aleatoric},
                                        {"epistemic", unseen.unseen_uncertainty.mean_epistemic},
                                        {"num_samples", unseen.unseen_uncertainty.num_samples}};
    unseen_doc["epistemic_ratio"] = unseen.epistemic_ratio;
    write_json_file((fs::path(opts.out) / ("unseen_" + seed_tag + ".json")).string(), unseen_doc);
    write_confusion_csv((fs::path(opts.out) / ("unseen_confusion_" + seed_tag + ".csv")).string(),
                        unseen.seen);

    // per-sample uncertainty export
    {
        std::vector<std::vector<double>> rows;
        for (const auto& p : unseen.seen_predictions) {
            rows.push_back({0.0, p.total, p.aleatoric, p.epistemic});
        }
        for (const auto& p : unseen.unseen_predictions) {
            rows.push_back({1.0, p.total, p.aleatoric, p.epistemic});
        }
        write_csv((fs::path(opts.out) / ("unseen_samples_" + seed_tag + ".csv")).string(),
                  {"is_unseen", "total", "aleatoric", "epistemic"}, rows);
    }

    // readout ablation
    const AblationReport ablation = readout_ablation(windows, cfg.pipeline);
    json ablation_doc;
    ablation_doc["config"] = cfg.resolved();
    ablation_doc["untrained"] = eval_report_json(ablation.untrained);
    ablation_doc["trained"] = eval_report_json(ablation.trained);
    ablation_doc["accuracy_gain"] = ablation.accuracy_gain;
    write_json_file((fs::path(opts.out) / ("ablation_" + seed_tag + ".json")).string(), ablation_doc);

    // training-effort comparison; wall times go to a separate, explicitly
    // non-deterministic timing file
    const CompareReport compare = baseline_bnn_compare(windows, cfg.pipeline);
    json compare_doc;
    compare_doc["config"] = cfg.resolved();
    compare_doc["proposed_params"] = compare.proposed_params;
    compare_doc["baseline_params"] = compare.baseline_params;
    compare_doc["proposed_accuracy"] = compare.proposed_accuracy;
    compare_doc["baseline_accuracy"] = compare.baseline_accuracy;
    write_json_file((fs::path(opts.out) / ("compare_" + seed_tag + ".json")).string(), compare_doc);
    write_json_file((fs::path(opts.out) / ("compare_timing_" + seed_tag + ".json")).string(),
                    json{{"proposed_seconds", compare.proposed_seconds},
                         {"baseline_seconds", compare.baseline_seconds}});

    std::cout << "unseen: seen_accuracy=" << unseen.seen.overall_accuracy
              << " epistemic_ratio=" << unseen.epistemic_ratio << "\n"
              << "ablation: gain=" << ablation.accuracy_gain << "\n"
              << "compare: params " << compare.proposed_params << " vs " << compare.baseline_params
              << ", seconds " << compare.proposed_seconds << " vs " << compare.baseline_seconds << "\n";
    return 0;
}

int cmd_shift_sweep(const CommonOpts& opts) {
    const RunConfig cfg = resolve_config(opts);
    ensure_out_dir(opts.out);

    const std::vector<Window> windows = build_synthetic_dataset(cfg.pipeline);
    const auto points = shift_sweep(windows, cfg.shift_levels, cfg.pipeline);

    std::vector<std::vector<double>> rows;
    for (const auto& p : points) rows.push_back({p.level, p.accuracy, p.mean_total_uncertainty});
    const std::string seed_tag = std::to_string(cfg.pipeline.seed);
    write_csv((fs::path(opts.out) / ("shift_sweep_" + seed_tag + ".csv")).string(),
              {"level", "accuracy", "mean_total_uncertainty"}, rows);

    json doc;
    doc["config"] = cfg.resolved();
    json arr = json::array();
    for (const auto& p : points) {
        arr.push_back({{"level", p.level},
                       {"accuracy", p.accuracy},
                       {"mean_total_uncertainty", p.mean_total_uncertainty}});
    }
    doc["points"] = std::move(arr);
    write_json_file((fs::path(opts.out) / ("shift_sweep_" + seed_tag + ".json")).string(), doc);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"physics-aware probabilistic reservoir for gearbox fault diagnosis"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string data_dir, artifact_path, input_csv, out_file;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_path, "JSON config file");
        cmd->add_option("--seed", opts.seed, "master seed override");
        cmd->add_option("--out", opts.out, "output directory");
        cmd->add_option("--held-out", opts.held_out, "fault label excluded from training");
        cmd->add_flag("--no-shap", opts.no_shap, "skip the SHAP pre-pass (round-robin allocation)");
        cmd->add_option("--mc-samples", opts.mc_samples, "Monte-Carlo samples at prediction");
        cmd->add_option("--workers", opts.workers, "parallel prediction workers");
    };

    auto* synth = app.add_subcommand("synth", "generate synthetic recordings + manifest");
    add_common(synth);

    auto* train = app.add_subcommand("train", "train a model and write the artifact");
    add_common(train);
    train->add_option("--data", data_dir, "data directory with manifest.json (default: synthetic)");
    train->add_option("--artifact", artifact_path, "artifact output path (default <out>/model.json)");

    auto* predict = app.add_subcommand("predict", "per-window class probabilities as JSON lines");
    add_common(predict);
    predict->add_option("--artifact", artifact_path, "model artifact")->required();
    predict->add_option("--input", input_csv, "recording CSV")->required();
    predict->add_option("--output", out_file, "output file (default stdout)");

    auto* explain = app.add_subcommand("explain", "channel-level Shapley report CSV");
    add_common(explain);
    explain->add_option("--artifact", artifact_path, "model artifact")->required();
    explain->add_option("--data", data_dir, "validation data directory (default: synthetic)");

    auto* evaluate = app.add_subcommand("evaluate", "unseen-fault, ablation and baseline protocols");
    add_common(evaluate);

    auto* sweep = app.add_subcommand("shift-sweep", "distribution-shift sweep CSV");
    add_common(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) return cmd_synth(opts);
        if (train->parsed()) return cmd_train(opts, data_dir, artifact_path);
        if (predict->parsed()) return cmd_predict(artifact_path, input_csv, opts, out_file);
        if (explain->parsed()) return cmd_explain(artifact_path, data_dir, opts);
        if (evaluate->parsed()) return cmd_evaluate(opts);
        if (sweep->parsed()) return cmd_shift_sweep(opts);
    } catch (const UsageError& e) {
        log_error(e.what());
        return 1;
    } catch (const DataError& e) {
        log_error(e.what());
        return 2;
    } catch (const NumericalError& e) {
        log_error(e.what());
        return 3;
    } catch (const std::exception& e) {
        log_error(std::string("unexpected failure: ") + e.what());
        return 3;
    }
    return 0;
}
