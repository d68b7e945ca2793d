#include "exwave/error.hpp"
#include "exwave/harness.hpp"

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"

namespace exwave {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

const char* kOutputEnv = "EXWAVE_OUTPUT_DIR";

nlohmann::json error_record(const std::string& kind, const std::string& message, const std::string& command)
{
    return {{"status", "error"}, {"command", command}, {"kind", kind}, {"message", message}};
}

}  // namespace

int run_cli(int argc, const char* const* argv)
{
    CLI::App app{"Exterior wave simulation and inverse source reconstruction"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;

    const std::vector<std::pair<std::string, std::string>> commands{
        {"check-domain", "Validate the geometry and print a JSON report"},
        {"simulate", "Run the forward problem and write energy, norms and the final field"},
        {"moments", "Accumulate time moments, boundary traces and Poisson residuals"},
        {"reconstruct", "Recover the separated datum at a fixed truncation radius"},
        {"decay", "Fit exponential local energy decay around the obstacle"},
        {"sweep-rho", "Reconstruction error over the truncation radii"},
        {"sweep-noise", "Reconstruction error over radii and noise levels"},
        {"speed-contrast", "Recover a sound-speed contrast from two runs"},
        {"end-to-end", "Full pipeline with data norms and tradeoff tables"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("config", config_path, "TOML experiment configuration")->required();
        sub->add_option("-o,--out", out_dir, "Output directory (overrides the config and " + std::string(kOutputEnv) + ")");
        sub->add_option("--seed", seed, "Noise seed (overrides [recon] seed)");
        sub->add_option("--workers", workers, "Worker threads (results do not depend on it)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cout << error_record("UsageError", e.what(), "").dump() << std::endl;
        return kExitValidation;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        auto config = load_config(config_path);
        if (seed) config.recon.seed = *seed;
        if (workers) {
            if (*workers < 1) throw Error(ErrorKind::ConfigError, "--workers must be positive");
            config.sim.workers = *workers;
        }
        std::filesystem::path out = config.output_dir;
        if (const char* env = std::getenv(kOutputEnv); env && *env) out = env;
        if (!out_dir.empty()) out = out_dir;

        if (command == "check-domain") {
            const auto report = check_domain(config);
            std::filesystem::create_directories(out);
            write_json(out / "report.json", report);
            std::cout << report.dump(2) << std::endl;
            return kExitOk;
        }

        std::filesystem::create_directories(out);
        ExperimentOutput result;
        if (command == "simulate")
            result = experiment_simulate(config, out);
        else if (command == "moments")
            result = experiment_moments(config, out);
        else if (command == "decay")
            result = experiment_decay(config, out);
        else if (command == "reconstruct")
            result = experiment_reconstruct(config, out, ReconstructionMode::Single);
        else if (command == "sweep-rho")
            result = experiment_reconstruct(config, out, ReconstructionMode::SweepRho);
        else if (command == "sweep-noise")
            result = experiment_reconstruct(config, out, ReconstructionMode::SweepNoise);
        else if (command == "speed-contrast")
            result = experiment_speed(config, out);
        else
            result = experiment_end_to_end(config, out);

        nlohmann::json files = nlohmann::json::array();
        for (const auto& f : result.files) files.push_back(f.string());
        std::cout << nlohmann::json{{"status", "ok"},
                                    {"command", command},
                                    {"config_hash", result.report.value("config_hash", "")},
                                    {"output_dir", out.string()},
                                    {"files", files}}
                         .dump()
                  << std::endl;
        return kExitOk;
    } catch (const Error& e) {
        std::cout << error_record(std::string(to_string(e.kind())), e.what(), command).dump() << std::endl;
        return is_numerical(e.kind()) ? kExitNumerical : kExitValidation;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cout << error_record("IoError", e.what(), command).dump() << std::endl;
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cout << error_record("InternalError", e.what(), command).dump() << std::endl;
        return kExitNumerical;
    }
}

}  // namespace exwave
