// beamlab <scenario | module subcommand> [--config <path>] [--out <dir>]
// Exit codes: 0 pass, 1 threshold failure, 2 configuration or usage error, 3 numerical failure.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "beamlab/config.hpp"
#include "beamlab/errors.hpp"
#include "beamlab/scenarios.hpp"

int main(int argc, char** argv) {
    using namespace beamlab;
    CLI::App app{"Gaussian beams, ray transforms and waveguide DN maps"};
    std::vector<std::string> target;
    std::string config_path, out_dir;
    app.add_option("target", target, "scenario name, or module and subcommand")->required()->expected(1, 2);
    app.add_option("--config", config_path, "INI run file (defaults for every missing key)");
    app.add_option("--out", out_dir, "output directory (default: [output] dir)");
    app.footer(usage_text());
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const RunConfig cfg = config_path.empty() ? default_config() : load_config(config_path);
        if (out_dir.empty()) out_dir = cfg.text("output", "dir");
        const ScenarioResult r = target.size() == 1 ? run_scenario(target[0], cfg, out_dir)
                                                    : run_command(target[0], target[1], cfg, out_dir);
        const std::string record = write_result_record(r, out_dir);
        for (const auto& f : r.files) std::cout << "wrote " << f << "\n";
        for (const auto& [k, v] : r.metrics) std::cout << "  " << k << " = " << v << "\n";
        if (!r.pass) {
            for (const auto& f : r.failures) std::cerr << "FAIL " << r.name << ": " << f << "\n";
            std::cerr << "failure record: " << record << "\n";
            return 1;
        }
        std::cout << "PASS " << r.name << "\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    }
}
