#include "lab/errors.hpp"
#include "lab/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

// Unrecognized "--section.key=value" or "--section.key value" tokens become config overrides.
void apply_extras(lab::Config& cfg, const std::vector<std::string>& extras) {
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& tok = extras[i];
        if (tok.rfind("--", 0) != 0) throw lab::ConfigError("unexpected argument '" + tok + "'");
        const std::string body = tok.substr(2);
        if (body.find('=') != std::string::npos) {
            cfg.apply_override(body);
        } else {
            if (i + 1 >= extras.size()) throw lab::ConfigError("override '" + tok + "' has no value");
            cfg.set(body, extras[++i]);
        }
    }
}

int run(int argc, char** argv) {
    CLI::App app{"Scalar-curvature stability experiments"};
    app.allow_extras();
    std::string experiment, config_path, out, grid;
    int workers = 0;
    std::vector<std::string> sets;
    app.add_option("experiment", experiment, "sharpness | stability | rotsym | inmeasure | asymptotics | selftest")
        ->required();
    app.add_option("--config", config_path, "INI file with one section per experiment")->required();
    app.add_option("--out", out, "output directory (run.out)");
    app.add_option("--workers", workers, "concurrent sweep points (run.workers)");
    app.add_option("--grid", grid, "nr,ntheta,nphi (grid.*)");
    app.add_option("--set", sets, "section.key=value override, repeatable");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : lab::kExitConfig;
    }

    try {
        lab::Config cfg = lab::Config::load(config_path);
        for (const auto& s : sets) cfg.apply_override(s);
        apply_extras(cfg, app.remaining());
        if (!out.empty()) cfg.set("run.out", out);
        if (workers > 0) cfg.set("run.workers", std::to_string(workers));
        if (!grid.empty()) {
            const auto dims = [&] {
                lab::Config tmp;
                tmp.set("grid.dims", grid);
                return tmp.int_list("grid.dims");
            }();
            if (dims.size() != 3) throw lab::ConfigError("--grid needs nr,ntheta,nphi");
            cfg.set("grid.nr", std::to_string(dims[0]));
            cfg.set("grid.ntheta", std::to_string(dims[1]));
            cfg.set("grid.nphi", std::to_string(dims[2]));
        }
        const auto ecfg = lab::make_experiment_config(experiment, cfg);
        const auto report = lab::run_experiment(ecfg);
        const auto paths = lab::write_report(report, ecfg);
        for (const auto& c : report.checks)
            std::printf("%-28s %s  %s\n", c.name.c_str(), c.pass ? "PASS" : "FAIL", c.detail.c_str());
        for (const auto& f : report.fits)
            std::printf("fit %-24s slope %.6g residual %.3g (%zu points)\n", f.name.c_str(), f.fit.slope,
                        f.fit.residual, f.points);
        for (const auto& n : report.notes) std::printf("note: %s\n", n.c_str());
        for (const auto& p : paths) std::printf("wrote %s\n", p.c_str());
        return lab::exit_code(report);
    } catch (const lab::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return lab::kExitConfig;
    } catch (const lab::ArgumentError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return lab::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return lab::kExitSolver;
    }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
