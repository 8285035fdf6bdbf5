// Batch front end: `stefan run|validate|plotdata`.

#include "stefan/config.hpp"
#include "stefan/plotdata.hpp"
#include "stefan/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using stefan::ExitCode;

int code(ExitCode c) { return static_cast<int>(c); }

std::filesystem::path default_output(const std::filesystem::path& config, const stefan::RunConfig& cfg) {
    if (!cfg.output.empty()) return cfg.output;
    return std::filesystem::path("runs") / config.stem();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Enthalpy-method Stefan solver with polynomial-chaos uncertainty quantification"};
    app.require_subcommand(1);

    std::string config_path, run_dir, check_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> out;
    int bins = 30;

    auto* run = app.add_subcommand("run", "execute a configuration and write its artifacts");
    run->add_option("config", config_path, "configuration file")->required();
    run->add_option("--seed", seed, "override the random seed");
    run->add_option("--out", out, "output directory");
    run->add_option("--threads", threads, "worker threads (0 = all cores)");
    run->add_option("--check", check_path, "tolerance file; exit 4 when a metric misses");

    auto* validate = app.add_subcommand("validate", "parse and validate a configuration");
    validate->add_option("config", config_path, "configuration file")->required();

    auto* plot = app.add_subcommand("plotdata", "write plot-ready series for a completed run");
    plot->add_option("run-dir", run_dir, "run output directory")->required();
    plot->add_option("--bins", bins, "histogram bins")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : code(ExitCode::config);
    }

    try {
        if (*validate) {
            auto cfg = stefan::load_config(config_path);
            std::cout << cfg.resolved();
            return 0;
        }
        if (*plot) {
            for (const auto& f : stefan::emit_plot_data(run_dir, bins)) std::cout << f << "\n";
            return 0;
        }

        stefan::RunOverrides o;
        o.seed = seed;
        o.threads = threads;
        if (out) o.output = *out;
        auto cfg = stefan::apply_overrides(stefan::load_config(config_path), o);
        std::vector<stefan::ToleranceCheck> checks;
        if (!check_path.empty()) checks = stefan::parse_tolerances(stefan::read_file(check_path));

        const auto dir = default_output(config_path, cfg);
        auto report = stefan::run(cfg, dir);
        std::cout << "wrote " << report.files.size() << " artifacts to " << dir.string() << "\n";
        for (const auto& [k, v] : report.metrics) std::cout << "  " << k << " = " << stefan::format_double(v) << "\n";

        if (!checks.empty()) {
            bool ok = true;
            for (const auto& c : stefan::check_tolerances(checks, report.metrics)) {
                std::cout << (c.pass ? "PASS " : "FAIL ") << c.describe() << "\n";
                ok = ok && c.pass;
            }
            if (!ok) return code(ExitCode::tolerance_miss);
        }
        return 0;
    } catch (const stefan::Error& e) {
        std::cerr << "error [" << e.tag() << "]: " << e.what() << "\n";
        return code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return code(ExitCode::numerical);
    }
}
