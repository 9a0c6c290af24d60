#include "lab/errors.hpp"
#include "lab/harness.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace lab {

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// JSON cannot carry nan/inf; keep them visible as strings
nlohmann::json jnum(double v) {
    if (std::isfinite(v)) return v;
    return fmt(v);
}

}  // namespace

void Table::add(std::vector<double> row) {
    if (row.size() != columns.size())
        throw ArgumentError("table '" + name + "': row has " + std::to_string(row.size()) + " entries, expected " +
                            std::to_string(columns.size()));
    rows.push_back(std::move(row));
}

std::vector<double> Table::column(const std::string& col) const {
    const auto it = std::find(columns.begin(), columns.end(), col);
    if (it == columns.end()) throw ArgumentError("table '" + name + "' has no column '" + col + "'");
    const auto c = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
}

bool ExperimentReport::passed() const {
    if (solver_failure || checks.empty()) return false;
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* ExperimentReport::check(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

const FitRecord* ExperimentReport::fit(const std::string& name) const {
    for (const auto& f : fits)
        if (f.name == name) return &f;
    return nullptr;
}

const Table* ExperimentReport::table(const std::string& name) const {
    for (const auto& t : tables)
        if (t.name == name) return &t;
    return nullptr;
}

double ExperimentReport::scalar(const std::string& name) const {
    for (const auto& [k, v] : scalars)
        if (k == name) return v;
    throw ArgumentError("report has no scalar '" + name + "'");
}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"sharpness", "stability",   "rotsym",
                                                   "inmeasure", "asymptotics", "selftest"};
    return names;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    if (cfg.experiment == "sharpness") return run_sharpness(cfg);
    if (cfg.experiment == "stability") return run_stability(cfg);
    if (cfg.experiment == "rotsym") return run_rotsym(cfg);
    if (cfg.experiment == "inmeasure") return run_inmeasure(cfg);
    if (cfg.experiment == "asymptotics") return run_asymptotics(cfg);
    if (cfg.experiment == "selftest") return run_selftest(cfg);
    throw ConfigError("unknown experiment '" + cfg.experiment + "'");
}

std::string csv_text(const Table& table) {
    std::string out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c) out += ',';
        out += table.columns[c];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += fmt(row[c]);
        }
        out += '\n';
    }
    return out;
}

std::string summary_json(const ExperimentReport& report, const ExperimentConfig& cfg) {
    using nlohmann::json;
    json j;
    j["experiment"] = report.experiment;
    j["passed"] = report.passed();
    j["solver_failure"] = report.solver_failure;
    j["exit_code"] = exit_code(report);
    json fits = json::array();
    for (const auto& f : report.fits)
        fits.push_back({{"name", f.name},
                        {"slope", jnum(f.fit.slope)},
                        {"intercept", jnum(f.fit.intercept)},
                        {"residual", jnum(f.fit.residual)},
                        {"points", f.points}});
    j["fits"] = fits;
    json checks = json::array();
    for (const auto& c : report.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    j["checks"] = checks;
    json scalars = json::object();
    for (const auto& [k, v] : report.scalars) scalars[k] = jnum(v);
    j["scalars"] = scalars;
    j["notes"] = report.notes;
    json tables = json::array();
    for (const auto& t : report.tables) tables.push_back(cfg.experiment + "_" + t.name + ".csv");
    j["tables"] = tables;

    json stamp;
    stamp["grid"] = {cfg.nr, cfg.ntheta, cfg.nphi};
    stamp["seed"] = cfg.seed;
    stamp["lab_version"] = kLabVersion;
    stamp["compiler"] = __VERSION__;
    stamp["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                             std::to_string(EIGEN_MINOR_VERSION);
    stamp["boost_version"] = BOOST_LIB_VERSION;
    json conf = json::object();
    for (const auto& [k, v] : cfg.cfg.entries()) {
        // output location and worker count do not change any number
        if (k == "run.out" || k == "run.workers") continue;
        conf[k] = v;
    }
    stamp["config"] = conf;
    j["environment"] = stamp;
    return j.dump(2) + "\n";
}

std::vector<std::string> write_report(const ExperimentReport& report, const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
    std::vector<std::string> paths;
    auto put = [&](const std::string& name, const std::string& text) {
        const std::string path = (fs::path(cfg.out_dir) / name).string();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot write '" + path + "'");
        out << text;
        paths.push_back(path);
    };
    put(cfg.experiment + ".json", summary_json(report, cfg));
    for (const auto& t : report.tables) put(cfg.experiment + "_" + t.name + ".csv", csv_text(t));
    return paths;
}

int exit_code(const ExperimentReport& report) {
    if (report.solver_failure) return kExitSolver;
    return report.passed() ? kExitPass : kExitFail;
}

bool decreasing_with_ties(const std::vector<double>& v, double tie_tol, int ties_allowed, int* ties_used) {
    int ties = 0;
    bool ok = true;
    for (std::size_t i = 1; i < v.size(); ++i) {
        const double scale = std::max(std::abs(v[i - 1]), std::abs(v[i]));
        const bool tie = std::abs(v[i] - v[i - 1]) <= tie_tol * scale;
        if (tie)
            ++ties;
        else if (!(v[i] < v[i - 1]))
            ok = false;
    }
    if (ties_used) *ties_used = ties;
    return ok && ties <= ties_allowed;
}

}  // namespace lab
