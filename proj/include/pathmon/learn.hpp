#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pathmon/featurize.hpp"
#include "pathmon/forest.hpp"
#include "pathmon/logreg.hpp"

namespace pathmon {

struct Prediction {
    std::string prefix_id;
    std::string case_id;
    std::size_t length = 0;
    double score = 0.0;
    int label = 0;
};

std::vector<Prediction> predict_logreg(const LogRegModel<double>& model, const FeatureTable& rows);
std::vector<Prediction> predict_rf(const RandomForestModel& model, const FeatureTable& rows);

// Trains on every row of `table` (callers pass the training subset).
LogRegModel<double> train_logreg(const FeatureTable& table, const LogRegHyper& hyper = {});
RandomForestModel train_rf(const FeatureTable& table, const ForestHyper& hyper = {});

// A trained model together with the feature layout it was trained on.
struct ModelFile {
    std::variant<LogRegModel<double>, RandomForestModel> model;
    std::vector<std::string> columns;
    std::string spec_fingerprint;

    std::string kind() const;
};

ModelFile make_model_file(std::variant<LogRegModel<double>, RandomForestModel> model, const FeatureSpec& spec);

std::string serialize_model(const ModelFile& file);
ModelFile parse_model(std::string_view text);
void save_model(const ModelFile& file, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

// Throws "fingerprint_mismatch" unless `spec` is the one the model was trained on.
void check_compatible(const ModelFile& file, const FeatureSpec& spec);

// Checks compatibility, then scores every row.
std::vector<Prediction> predict(const ModelFile& file, const FeatureTable& rows);

void write_predictions_csv(const std::vector<Prediction>& predictions, const std::filesystem::path& path);
std::vector<Prediction> read_predictions_csv(const std::filesystem::path& path);

}  // namespace pathmon
