#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "pathmon/eventlog.hpp"
#include "pathmon/featurize.hpp"
#include "pathmon/forest.hpp"
#include "pathmon/ingest.hpp"
#include "pathmon/logreg.hpp"
#include "pathmon/prefixing.hpp"
#include "pathmon/synth.hpp"

namespace pathmon {

enum class Stage { Lift, Log, Prefixes, Features, Train, Evaluate, Synth, All };

Stage parse_stage(std::string_view name);
const char* to_string(Stage stage);

struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> output_dir;
    std::optional<std::string> model;
};

struct PipelineConfig {
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 42;
    bool synthetic = false;  // event log comes from the generator, not from tables
    SynthConfig synth;

    LiftConfig lift;  // table paths already resolved against the config location
    std::vector<CollectorSpec> collectors;
    std::optional<std::string> case_attributes_table;
    TieBreak tie_break;

    TargetSpec target;
    std::optional<std::size_t> max_prefix_length;
    FeatureConfig features;
    double test_fraction = 0.2;

    std::string model = "logreg";
    LogRegHyper logreg;
    ForestHyper rf;

    double threshold = 0.5;
    std::vector<std::size_t> eval_lengths{1, 5, 10, 20, 30, 40, 50};

    std::string effective_json;  // the document after overrides, echoed into the manifest

    std::string fingerprint() const;  // sha256 of effective_json
};

// Relative paths inside the document resolve against base_dir.
PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir,
                            const ConfigOverrides& overrides = {});
PipelineConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

struct RunOptions {
    bool force = false;           // overwrite artifacts built under a different configuration
    std::ostream* report = nullptr;    // human-readable metrics
    std::ostream* warnings = nullptr;  // one line per diagnostic
};

struct StageResult {
    Stage stage;
    std::vector<std::filesystem::path> outputs;  // relative to the output directory
};

// Runs one stage (or the whole chain for Stage::All) and appends to
// <out>/manifest.json. Errors: "missing_prerequisite" naming the stage to
// run first, "fingerprint_mismatch" / "digest_mismatch" unless forced.
std::vector<StageResult> run_stage(Stage stage, const PipelineConfig& config, const RunOptions& options = {});

inline constexpr const char* kManifestFile = "manifest.json";

}  // namespace pathmon
