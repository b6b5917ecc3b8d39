// pathmon: stage-by-stage clinical pathway prediction pipeline.
//
//   pathmon <stage> --config run.json [--seed N] [--out DIR] [--model logreg|rf] [--force]
//
// Failures print one JSON line on stderr: {"error": <code>, "message": ..., "stage": ...}

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "pathmon/pipeline.hpp"

namespace {

int fail(const std::string& code, const std::string& message, const std::string& stage) {
    nlohmann::ordered_json j;
    j["error"] = code;
    j["message"] = message;
    if (!stage.empty()) j["stage"] = stage;
    std::cerr << j.dump() << std::endl;
    return code == "usage" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Predictive monitoring of clinical pathways: event-log construction, prefix features, models"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::int64_t seed = -1;
    std::string out_dir;
    std::string model;
    bool force = false;

    const char* stages[][2] = {
        {"lift", "clean source tables, apply correction rules and infer timestamps"},
        {"log", "collect events into a canonical event log"},
        {"prefixes", "derive case labels and enumerate prefixes"},
        {"features", "split cases, fit the feature spec, write the feature table"},
        {"train", "train a model on the training cases"},
        {"evaluate", "score the test cases and report metrics"},
        {"synth", "generate a synthetic event log"},
        {"all", "run every stage in order"},
    };
    for (const auto& [name, help] : stages) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "pipeline configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "global seed (overrides the config)")->check(CLI::NonNegativeNumber);
        sub->add_option("--out", out_dir, "output directory (overrides the config)");
        sub->add_option("--model", model, "model kind")->check(CLI::IsMember({"logreg", "rf"}));
        sub->add_flag("--force", force, "overwrite artifacts built under a different configuration");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), "");
    }

    const std::string stage = app.get_subcommands().front()->get_name();
    try {
        pathmon::ConfigOverrides overrides;
        if (seed >= 0) overrides.seed = std::uint64_t(seed);
        if (!out_dir.empty()) overrides.output_dir = out_dir;
        if (!model.empty()) overrides.model = model;
        const auto config = pathmon::load_config(config_path, overrides);

        pathmon::RunOptions options;
        options.force = force;
        options.report = &std::cout;
        options.warnings = &std::cerr;
        for (const auto& r : pathmon::run_stage(pathmon::parse_stage(stage), config, options)) {
            for (const auto& p : r.outputs) {
                std::cout << pathmon::to_string(r.stage) << ": wrote " << (config.output_dir / p).string() << "\n";
            }
        }
        return 0;
    } catch (const pathmon::Error& e) {
        return fail(e.code(), e.what(), stage);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), stage);
    }
}
