#include "physres/artifact.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "physres/common.hpp"

namespace physres {

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (long r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (long c = 0; c < m.cols(); ++c) {
            if (!std::isfinite(m(r, c))) throw NumericalError("artifact: non-finite matrix entry");
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows, const std::string& field) {
    if (!rows.is_array() || rows.empty()) throw DataError("artifact field '" + field + "' must be a matrix");
    const long nr = static_cast<long>(rows.size());
    const long nc = static_cast<long>(rows.at(0).size());
    Eigen::MatrixXd m(nr, nc);
    for (long r = 0; r < nr; ++r) {
        const json& row = rows.at(static_cast<std::size_t>(r));
        if (static_cast<long>(row.size()) != nc) {
            throw DataError("artifact field '" + field + "' has ragged rows");
        }
        for (long c = 0; c < nc; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (long i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
    Eigen::VectorXd v(static_cast<long>(arr.size()));
    for (long i = 0; i < v.size(); ++i) v[i] = arr.at(static_cast<std::size_t>(i)).get<double>();
    return v;
}

}  // namespace

std::string fnv1a64_hex(const std::string& payload) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const unsigned char byte : payload) {
        hash ^= byte;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return std::string(buf);
}

json artifact_to_json(const TrainedModel& model, const RunConfig& cfg) {
    json doc;
    doc["format_version"] = kArtifactFormatVersion;
    doc["seed"] = cfg.pipeline.seed;
    doc["config"] = cfg.resolved();

    std::vector<int> labels;
    for (const FaultLabel l : model.class_labels) labels.push_back(static_cast<int>(l));
    doc["priors"] = {{"class_labels", labels},
                     {"mean", matrix_to_json(model.prior.mean)},
                     {"var", matrix_to_json(model.prior.var)},
                     {"tau", model.prior.tau}};

    doc["global_stats"] = {{"mean", vector_to_json(model.stats.mean)},
                           {"std", vector_to_json(model.stats.std)},
                           {"zero_variance", model.stats.zero_variance}};

    doc["reservoir"] = {{"num_nodes", model.reservoir_cfg.num_nodes},
                        {"leak_alpha", model.reservoir_cfg.leak_alpha},
                        {"spectral_radius", model.reservoir_cfg.spectral_radius},
                        {"input_scaling", model.reservoir_cfg.input_scaling},
                        {"t_drive", model.reservoir_cfg.t_drive},
                        {"seed", model.reservoir_cfg.seed},
                        {"num_features", model.reservoir_cfg.num_features},
                        {"node_to_feature", model.reservoir_cfg.node_to_feature},
                        {"channel_node_counts", model.reservoir_cfg.channel_node_counts},
                        {"w_in", matrix_to_json(model.reservoir.w_in)},
                        {"w", matrix_to_json(model.reservoir.w)},
                        {"achieved_rho", model.reservoir.achieved_rho}};

    // sigma is the documented surface; rho_raw preserves exact round-trips
    doc["posterior"] = {{"mu", matrix_to_json(model.q.mu)},
                        {"sigma", matrix_to_json(model.q.sigma())},
                        {"rho_raw", matrix_to_json(model.q.rho)}};

    doc["loss_trace"] = model.loss_trace;

    if (model.shap.has_value()) {
        const ShapleyReport& s = *model.shap;
        doc["shap"] = {{"names", s.names},
                       {"values", vector_to_json(s.values)},
                       {"per_class", matrix_to_json(s.per_class)},
                       {"ranking", s.ranking},
                       {"baseline_value", s.baseline_value},
                       {"full_value", s.full_value}};
    } else {
        doc["shap"] = nullptr;
    }

    doc["checksum"] = fnv1a64_hex(doc.dump());
    return doc;
}

LoadedArtifact artifact_from_json(const json& doc) {
    if (!doc.is_object()) throw DataError("artifact: not a JSON object");
    if (!doc.contains("format_version") || doc.at("format_version").get<int>() != kArtifactFormatVersion) {
        throw DataError("artifact: unsupported format_version");
    }
    if (!doc.contains("checksum")) throw DataError("artifact: missing checksum");
    json body = doc;
    const std::string stored = body.at("checksum").get<std::string>();
    body.erase("checksum");
    const std::string computed = fnv1a64_hex(body.dump());
    if (stored != computed) {
        throw DataError("artifact checksum mismatch (stored " + stored + ", computed " + computed +
                        "); refusing to load");
    }

    LoadedArtifact loaded;
    loaded.config_echo = doc.at("config");
    TrainedModel& model = loaded.model;

    const json& priors = doc.at("priors");
    for (const auto& l : priors.at("class_labels")) {
        model.class_labels.push_back(fault_label_from_int(l.get<int>()));
    }
    model.prior.class_labels = model.class_labels;
    model.prior.mean = matrix_from_json(priors.at("mean"), "priors.mean");
    model.prior.var = matrix_from_json(priors.at("var"), "priors.var");
    model.prior.tau = priors.at("tau").get<double>();

    const json& stats = doc.at("global_stats");
    model.stats.mean = vector_from_json(stats.at("mean"));
    model.stats.std = vector_from_json(stats.at("std"));
    model.stats.zero_variance = stats.at("zero_variance").get<std::vector<bool>>();

    const json& res = doc.at("reservoir");
    model.reservoir_cfg.num_nodes = res.at("num_nodes").get<int>();
    model.reservoir_cfg.leak_alpha = res.at("leak_alpha").get<double>();
    model.reservoir_cfg.spectral_radius = res.at("spectral_radius").get<double>();
    model.reservoir_cfg.input_scaling = res.at("input_scaling").get<double>();
    model.reservoir_cfg.t_drive = res.at("t_drive").get<int>();
    model.reservoir_cfg.seed = res.at("seed").get<std::uint64_t>();
    model.reservoir_cfg.num_features = res.at("num_features").get<int>();
    model.reservoir_cfg.node_to_feature = res.at("node_to_feature").get<std::vector<int>>();
    model.reservoir_cfg.channel_node_counts = res.at("channel_node_counts").get<std::vector<int>>();
    model.reservoir.w_in = matrix_from_json(res.at("w_in"), "reservoir.w_in");
    model.reservoir.w = matrix_from_json(res.at("w"), "reservoir.w");
    model.reservoir.achieved_rho = res.at("achieved_rho").get<double>();

    const json& post = doc.at("posterior");
    model.q.mu = matrix_from_json(post.at("mu"), "posterior.mu");
    model.q.rho = matrix_from_json(post.at("rho_raw"), "posterior.rho_raw");

    model.loss_trace = doc.at("loss_trace").get<std::vector<double>>();

    if (doc.contains("shap") && !doc.at("shap").is_null()) {
        const json& s = doc.at("shap");
        ShapleyReport report;
        report.names = s.at("names").get<std::vector<std::string>>();
        report.values = vector_from_json(s.at("values"));
        report.per_class = matrix_from_json(s.at("per_class"), "shap.per_class");
        report.ranking = s.at("ranking").get<std::vector<int>>();
        report.baseline_value = s.at("baseline_value").get<double>();
        report.full_value = s.at("full_value").get<double>();
        model.shap = std::move(report);
    }

    // the prior-initialized posterior and node-level prior are derived state
    const ReadoutInit init = init_readout_from_priors(model.prior, model.reservoir_cfg.node_to_feature);
    model.node_prior = init.prior;
    model.q0 = init.posterior;
    return loaded;
}

void save_artifact(const std::string& path, const TrainedModel& model, const RunConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open artifact for writing: " + path);
    out << artifact_to_json(model, cfg).dump(2) << "\n";
    if (!out) throw DataError("artifact write failed: " + path);
}

LoadedArtifact load_artifact(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open artifact: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError("artifact parse error in " + path + ": " + e.what());
    }
    return artifact_from_json(doc);
}

}  // namespace physres
