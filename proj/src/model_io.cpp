#include "pathmon/learn.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pathmon/csv.hpp"

namespace pathmon {

using json = nlohmann::ordered_json;

namespace {

std::vector<Prediction> to_predictions(const FeatureTable& rows, const Eigen::VectorXd& scores) {
    std::vector<Prediction> out;
    out.reserve(std::size_t(rows.rows()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        const auto r = std::size_t(i);
        out.push_back({rows.prefix_ids[r], rows.case_ids[r], rows.lengths[r], scores[i], rows.labels[r]});
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

std::vector<Prediction> predict_logreg(const LogRegModel<double>& model, const FeatureTable& rows) {
    return to_predictions(rows, model.predict_proba(rows.values));
}

std::vector<Prediction> predict_rf(const RandomForestModel& model, const FeatureTable& rows) {
    return to_predictions(rows, model.predict_proba(rows.values));
}

LogRegModel<double> train_logreg(const FeatureTable& table, const LogRegHyper& hyper) {
    return train_logreg<double>(table.values, table.label_vector(), hyper);
}

RandomForestModel train_rf(const FeatureTable& table, const ForestHyper& hyper) {
    return train_rf(table.values, table.label_vector(), hyper);
}

std::string ModelFile::kind() const {
    return std::holds_alternative<LogRegModel<double>>(model) ? "logreg" : "rf";
}

ModelFile make_model_file(std::variant<LogRegModel<double>, RandomForestModel> model, const FeatureSpec& spec) {
    return ModelFile{std::move(model), spec.column_names, spec.fingerprint()};
}

std::string serialize_model(const ModelFile& file) {
    json j;
    j["format"] = "pathmon-model";
    j["version"] = 1;
    j["kind"] = file.kind();
    j["columns"] = file.columns;
    j["spec_fingerprint"] = file.spec_fingerprint;
    if (const auto* lr = std::get_if<LogRegModel<double>>(&file.model)) {
        j["hyper"] = {{"l2_lambda", lr->hyper.l2_lambda},
                      {"max_iters", lr->hyper.max_iters},
                      {"tolerance", lr->hyper.tolerance},
                      {"seed", lr->hyper.seed},
                      {"balanced_class_weight", lr->hyper.balanced_class_weight}};
        j["training"] = {{"iterations", lr->iterations},
                         {"final_objective", lr->final_objective},
                         {"converged", lr->converged}};
        j["weights"] = std::vector<double>(lr->weights.data(), lr->weights.data() + lr->weights.size());
        j["bias"] = lr->bias;
    } else {
        const auto& rf = std::get<RandomForestModel>(file.model);
        j["hyper"] = {{"n_trees", rf.hyper.n_trees},
                      {"max_depth", rf.hyper.max_depth},
                      {"min_samples_leaf", rf.hyper.min_samples_leaf},
                      {"features_per_split", rf.hyper.features_per_split},
                      {"seed", rf.hyper.seed},
                      {"bootstrap", rf.hyper.bootstrap}};
        j["width"] = rf.width;
        // Trees as parallel arrays: compact and exact.
        j["trees"] = json::array();
        for (const auto& t : rf.trees) {
            json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
                 value = json::array();
            for (const auto& n : t.nodes) {
                feature.push_back(n.feature);
                threshold.push_back(n.threshold);
                left.push_back(n.left);
                right.push_back(n.right);
                value.push_back(n.value);
            }
            j["trees"].push_back({{"feature", feature},
                                  {"threshold", threshold},
                                  {"left", left},
                                  {"right", right},
                                  {"value", value}});
        }
    }
    return j.dump(1) + "\n";
}

ModelFile parse_model(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error("malformed_model", std::string("model file: ") + e.what());
    }
    if (j.value("format", "") != "pathmon-model") throw Error("malformed_model", "not a model file");
    if (j.value("version", 0) != 1) throw Error("malformed_model", "unsupported model file version");
    try {
        ModelFile file;
        file.columns = j.at("columns").get<std::vector<std::string>>();
        file.spec_fingerprint = j.at("spec_fingerprint").get<std::string>();
        const auto kind = j.at("kind").get<std::string>();
        const auto& h = j.at("hyper");
        if (kind == "logreg") {
            LogRegModel<double> lr;
            lr.hyper.l2_lambda = h.at("l2_lambda").get<double>();
            lr.hyper.max_iters = h.at("max_iters").get<int>();
            lr.hyper.tolerance = h.at("tolerance").get<double>();
            lr.hyper.seed = h.at("seed").get<std::uint64_t>();
            lr.hyper.balanced_class_weight = h.at("balanced_class_weight").get<bool>();
            const auto& t = j.at("training");
            lr.iterations = t.at("iterations").get<int>();
            lr.final_objective = t.at("final_objective").get<double>();
            lr.converged = t.at("converged").get<bool>();
            const auto w = j.at("weights").get<std::vector<double>>();
            lr.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), Eigen::Index(w.size()));
            lr.bias = j.at("bias").get<double>();
            if (w.size() != file.columns.size()) throw Error("malformed_model", "weight count differs from column count");
            file.model = std::move(lr);
        } else if (kind == "rf") {
            RandomForestModel rf;
            rf.hyper.n_trees = h.at("n_trees").get<int>();
            rf.hyper.max_depth = h.at("max_depth").get<int>();
            rf.hyper.min_samples_leaf = h.at("min_samples_leaf").get<int>();
            rf.hyper.features_per_split = h.at("features_per_split").get<int>();
            rf.hyper.seed = h.at("seed").get<std::uint64_t>();
            rf.hyper.bootstrap = h.at("bootstrap").get<bool>();
            rf.width = j.at("width").get<Eigen::Index>();
            for (const auto& t : j.at("trees")) {
                const auto feature = t.at("feature").get<std::vector<int>>();
                const auto threshold = t.at("threshold").get<std::vector<double>>();
                const auto left = t.at("left").get<std::vector<int>>();
                const auto right = t.at("right").get<std::vector<int>>();
                const auto value = t.at("value").get<std::vector<double>>();
                const auto n = feature.size();
                if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n || n == 0) {
                    throw Error("malformed_model", "tree arrays have inconsistent lengths");
                }
                DecisionTree tree;
                for (std::size_t i = 0; i < n; ++i) {
                    TreeNode node{feature[i], threshold[i], left[i], right[i], value[i]};
                    if (!node.is_leaf() && (node.feature >= rf.width || node.left <= int(i) || node.right <= int(i) ||
                                            node.left >= int(n) || node.right >= int(n))) {
                        throw Error("malformed_model", "tree node references an invalid column or child");
                    }
                    if (node.value < 0.0 || node.value > 1.0) throw Error("malformed_model", "leaf value outside [0,1]");
                    tree.nodes.push_back(node);
                }
                rf.trees.push_back(std::move(tree));
            }
            if (rf.width != Eigen::Index(file.columns.size())) {
                throw Error("malformed_model", "forest width differs from column count");
            }
            file.model = std::move(rf);
        } else {
            throw Error("malformed_model", "unknown model kind '" + kind + "'");
        }
        return file;
    } catch (const json::exception& e) {
        throw Error("malformed_model", std::string("model file: ") + e.what());
    }
}

void save_model(const ModelFile& file, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write '" + path.string() + "'");
    out << serialize_model(file);
}

ModelFile load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("missing_file", "cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

void check_compatible(const ModelFile& file, const FeatureSpec& spec) {
    if (file.spec_fingerprint != spec.fingerprint() || file.columns != spec.column_names) {
        throw Error("fingerprint_mismatch", "model was trained on feature spec " + file.spec_fingerprint.substr(0, 12) +
                                                ", refusing to score features from spec " +
                                                spec.fingerprint().substr(0, 12));
    }
}

std::vector<Prediction> predict(const ModelFile& file, const FeatureTable& rows) {
    check_compatible(file, rows.spec);
    return std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, RandomForestModel>) {
                return predict_rf(m, rows);
            } else {
                return predict_logreg(m, rows);
            }
        },
        file.model);
}

void write_predictions_csv(const std::vector<Prediction>& predictions, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write '" + path.string() + "'");
    csv::write_row(out, {"prefix_id", "case_id", "length", "score", "label"});
    for (const auto& p : predictions) {
        csv::write_row(out, {p.prefix_id, p.case_id, std::to_string(p.length), format_double(p.score),
                             std::to_string(p.label)});
    }
}

std::vector<Prediction> read_predictions_csv(const std::filesystem::path& path) {
    auto doc = csv::read(path);
    if (doc.header != csv::Row{"prefix_id", "case_id", "length", "score", "label"}) {
        throw Error("malformed_predictions", path.string() + ": unexpected header");
    }
    std::vector<Prediction> out;
    for (const auto& row : doc.rows) {
        Prediction p;
        p.prefix_id = row[0];
        p.case_id = row[1];
        std::from_chars(row[2].data(), row[2].data() + row[2].size(), p.length);
        std::from_chars(row[3].data(), row[3].data() + row[3].size(), p.score);
        std::from_chars(row[4].data(), row[4].data() + row[4].size(), p.label);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace pathmon
