#include "physres/config.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "physres/common.hpp"

namespace physres {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& section) {
    if (!obj.is_object()) throw UsageError("config section '" + section + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.contains(key)) {
            throw UsageError("unknown config key '" + key + "' in section '" + section + "'");
        }
    }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw UsageError("config key '" + key + "': " + e.what());
    }
}

}  // namespace

RunConfig default_config() { return RunConfig{}; }

RunConfig parse_config(const json& doc) {
    RunConfig cfg;
    reject_unknown_keys(doc, {"seed", "synth", "data", "features", "reservoir", "train", "eval"}, "<root>");

    cfg.pipeline.seed = get_or<std::uint64_t>(doc, "seed", cfg.pipeline.seed);

    if (doc.contains("synth")) {
        const json& s = doc.at("synth");
        reject_unknown_keys(s, {"duration_s", "sample_rate_hz", "base_speed_hz", "noise_std", "fault_intensity"},
                            "synth");
        auto& sc = cfg.pipeline.synth;
        sc.duration_s = get_or(s, "duration_s", sc.duration_s);
        sc.sample_rate_hz = get_or(s, "sample_rate_hz", sc.sample_rate_hz);
        sc.base_speed_hz = get_or(s, "base_speed_hz", sc.base_speed_hz);
        sc.noise_std = get_or(s, "noise_std", sc.noise_std);
        sc.fault_intensity = get_or(s, "fault_intensity", sc.fault_intensity);
    }

    if (doc.contains("data")) {
        const json& d = doc.at("data");
        reject_unknown_keys(d, {"classes", "loads", "window_len", "hop"}, "data");
        cfg.pipeline.classes = get_or(d, "classes", cfg.pipeline.classes);
        cfg.pipeline.loads = get_or(d, "loads", cfg.pipeline.loads);
        cfg.pipeline.window_len = get_or(d, "window_len", cfg.pipeline.window_len);
        cfg.pipeline.hop = get_or(d, "hop", cfg.pipeline.hop);
        if (cfg.pipeline.classes.empty()) throw UsageError("data.classes must be nonempty");
        for (const int c : cfg.pipeline.classes) fault_label_from_int(c);
    }

    if (doc.contains("features")) {
        const json& f = doc.at("features");
        reject_unknown_keys(f, {"tau", "density"}, "features");
        cfg.pipeline.tau = get_or(f, "tau", cfg.pipeline.tau);
        const std::string kind = get_or<std::string>(f, "density", "histogram");
        if (kind == "histogram") cfg.pipeline.density_kind = DensityKind::Histogram;
        else if (kind == "kde") cfg.pipeline.density_kind = DensityKind::Kde;
        else throw UsageError("features.density must be 'histogram' or 'kde'");
    }

    if (doc.contains("reservoir")) {
        const json& r = doc.at("reservoir");
        reject_unknown_keys(r, {"nodes_per_class", "leak_alpha", "spectral_radius", "input_scaling", "t_drive"},
                            "reservoir");
        cfg.pipeline.nodes_per_class = get_or(r, "nodes_per_class", cfg.pipeline.nodes_per_class);
        cfg.pipeline.leak_alpha = get_or(r, "leak_alpha", cfg.pipeline.leak_alpha);
        cfg.pipeline.spectral_radius = get_or(r, "spectral_radius", cfg.pipeline.spectral_radius);
        cfg.pipeline.input_scaling = get_or(r, "input_scaling", cfg.pipeline.input_scaling);
        cfg.pipeline.t_drive = get_or(r, "t_drive", cfg.pipeline.t_drive);
    }

    if (doc.contains("train")) {
        const json& t = doc.at("train");
        reject_unknown_keys(t, {"learning_rate", "epochs", "mc_train_samples", "batch_size", "beta",
                                "use_shap", "shap_validation_fraction"},
                            "train");
        auto& tc = cfg.pipeline.train;
        tc.learning_rate = get_or(t, "learning_rate", tc.learning_rate);
        tc.epochs = get_or(t, "epochs", tc.epochs);
        tc.mc_train_samples = get_or(t, "mc_train_samples", tc.mc_train_samples);
        tc.batch_size = get_or(t, "batch_size", tc.batch_size);
        if (t.contains("beta") && !t.at("beta").is_null()) tc.beta = t.at("beta").get<double>();
        cfg.pipeline.use_shap = get_or(t, "use_shap", cfg.pipeline.use_shap);
        cfg.pipeline.shap_validation_fraction =
            get_or(t, "shap_validation_fraction", cfg.pipeline.shap_validation_fraction);
    }

    if (doc.contains("eval")) {
        const json& e = doc.at("eval");
        reject_unknown_keys(e, {"test_fraction", "held_out", "mc_samples", "shift_levels", "workers"}, "eval");
        cfg.pipeline.test_fraction = get_or(e, "test_fraction", cfg.pipeline.test_fraction);
        cfg.held_out = get_or(e, "held_out", cfg.held_out);
        cfg.pipeline.predict_mc_samples = get_or(e, "mc_samples", cfg.pipeline.predict_mc_samples);
        cfg.shift_levels = get_or(e, "shift_levels", cfg.shift_levels);
        cfg.pipeline.workers = get_or(e, "workers", cfg.pipeline.workers);
        fault_label_from_int(cfg.held_out);
    }

    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw UsageError("config parse error in " + path + ": " + e.what());
    }
    return parse_config(doc);
}

nlohmann::json RunConfig::resolved() const {
    json doc;
    doc["seed"] = pipeline.seed;
    doc["synth"] = {{"duration_s", pipeline.synth.duration_s},
                    {"sample_rate_hz", pipeline.synth.sample_rate_hz},
                    {"base_speed_hz", pipeline.synth.base_speed_hz},
                    {"noise_std", pipeline.synth.noise_std},
                    {"fault_intensity", pipeline.synth.fault_intensity}};
    doc["data"] = {{"classes", pipeline.classes},
                   {"loads", pipeline.loads},
                   {"window_len", pipeline.window_len},
                   {"hop", pipeline.hop}};
    doc["features"] = {{"tau", pipeline.tau},
                       {"density", pipeline.density_kind == DensityKind::Histogram ? "histogram" : "kde"}};
    doc["reservoir"] = {{"nodes_per_class", pipeline.nodes_per_class},
                        {"leak_alpha", pipeline.leak_alpha},
                        {"spectral_radius", pipeline.spectral_radius},
                        {"input_scaling", pipeline.input_scaling},
                        {"t_drive", pipeline.t_drive}};
    doc["train"] = {{"learning_rate", pipeline.train.learning_rate},
                    {"epochs", pipeline.train.epochs},
                    {"mc_train_samples", pipeline.train.mc_train_samples},
                    {"batch_size", pipeline.train.batch_size},
                    {"beta", pipeline.train.beta.has_value() ? json(*pipeline.train.beta) : json(nullptr)},
                    {"use_shap", pipeline.use_shap},
                    {"shap_validation_fraction", pipeline.shap_validation_fraction}};
    doc["eval"] = {{"test_fraction", pipeline.test_fraction},
                   {"held_out", held_out},
                   {"mc_samples", pipeline.predict_mc_samples},
                   {"shift_levels", shift_levels},
                   {"workers", pipeline.workers}};
    return doc;
}

}  // namespace physres
