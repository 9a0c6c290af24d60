#pragma once

#include "lab/fit.hpp"

#include <boost/property_tree/ptree.hpp>

#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace lab {

inline constexpr const char* kLabVersion = "0.1.0";

/// Flat `key = value` configuration with one section per experiment. Keys are
/// addressed as "section.key".
class Config {
public:
    Config() = default;

    bool has(const std::string& key) const;
    std::string str(const std::string& key) const;
    std::string str(const std::string& key, const std::string& fallback) const;
    double num(const std::string& key) const;
    double num(const std::string& key, double fallback) const;
    int integer(const std::string& key) const;
    int integer(const std::string& key, int fallback) const;
    bool flag(const std::string& key, bool fallback) const;
    /// comma separated numbers
    std::vector<double> list(const std::string& key) const;
    std::vector<int> int_list(const std::string& key) const;

    void set(const std::string& key, const std::string& value);
    /// "section.key=value"
    void apply_override(const std::string& assignment);
    /// every key as "section.key" in sorted order
    std::vector<std::pair<std::string, std::string>> entries() const;

    const boost::property_tree::ptree& tree() const { return tree_; }

    static Config parse(const std::string& text);
    static Config load(const std::string& path);

private:
    boost::property_tree::ptree tree_;
};

struct ARule {
    bool quarter_power = false;
    double a = 0.0;  // fixed scale

    static ARule parse(const std::string& text);
};

struct ExperimentConfig {
    std::string experiment;
    Config cfg;
    int nr = 64, ntheta = 48, nphi = 96;
    unsigned long long seed = 0;
    int workers = 1;
    std::string out_dir;

    /// key inside the experiment's own section
    std::string key(const std::string& k) const { return experiment + "." + k; }
    double num(const std::string& k) const { return cfg.num(key(k)); }
    double num(const std::string& k, double fallback) const { return cfg.num(key(k), fallback); }
    std::vector<double> list(const std::string& k) const { return cfg.list(key(k)); }
    std::string str(const std::string& k) const { return cfg.str(key(k)); }
    std::string str(const std::string& k, const std::string& fallback) const { return cfg.str(key(k), fallback); }
};

/// Reads [run] and [grid]; validates the experiment name.
ExperimentConfig make_experiment_config(const std::string& experiment, const Config& cfg);

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add(std::vector<double> row);
    std::vector<double> column(const std::string& name) const;
};

struct FitRecord {
    std::string name;
    RateFit fit;
    std::size_t points = 0;
};

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ExperimentReport {
    std::string experiment;
    std::vector<Table> tables;
    std::vector<FitRecord> fits;
    std::vector<Check> checks;
    std::vector<std::pair<std::string, double>> scalars;
    std::vector<std::string> notes;
    bool solver_failure = false;

    bool passed() const;
    const Check* check(const std::string& name) const;
    const FitRecord* fit(const std::string& name) const;
    const Table* table(const std::string& name) const;
    double scalar(const std::string& name) const;
    void add_scalar(const std::string& name, double v) { scalars.emplace_back(name, v); }
    void add_check(const std::string& name, bool pass, const std::string& detail) {
        checks.push_back({name, pass, detail});
    }
};

ExperimentReport run_sharpness(const ExperimentConfig& cfg);
ExperimentReport run_stability(const ExperimentConfig& cfg);
ExperimentReport run_rotsym(const ExperimentConfig& cfg);
ExperimentReport run_inmeasure(const ExperimentConfig& cfg);
ExperimentReport run_asymptotics(const ExperimentConfig& cfg);
ExperimentReport run_selftest(const ExperimentConfig& cfg);

const std::vector<std::string>& experiment_names();
ExperimentReport run_experiment(const ExperimentConfig& cfg);

std::string csv_text(const Table& table);
std::string summary_json(const ExperimentReport& report, const ExperimentConfig& cfg);
/// <out>/<experiment>.json and <out>/<experiment>_<table>.csv; returns the written paths
std::vector<std::string> write_report(const ExperimentReport& report, const ExperimentConfig& cfg);

enum ExitCode { kExitPass = 0, kExitFail = 1, kExitConfig = 2, kExitSolver = 3 };
int exit_code(const ExperimentReport& report);

/// Runs fn(i) for i < n on up to `workers` threads. Results keep index order;
/// a failed job leaves its slot empty and its exception in `errors`.
template <class T>
std::vector<std::optional<T>> parallel_map(std::size_t n, int workers, const std::function<T(std::size_t)>& fn,
                                           std::vector<std::exception_ptr>* errors = nullptr) {
    std::vector<std::optional<T>> out(n);
    std::vector<std::exception_ptr> errs(n);
    std::atomic<std::size_t> next{0};
    auto job = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    };
    const std::size_t nthreads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
    if (nthreads <= 1) {
        job();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(job);
        for (auto& th : pool) th.join();
    }
    if (errors) *errors = std::move(errs);
    return out;
}

/// Strictly decreasing sequence up to at most `ties_allowed` steps whose relative
/// change is within tie_tol. A step that increases beyond the tie tolerance fails.
bool decreasing_with_ties(const std::vector<double>& v, double tie_tol, int ties_allowed, int* ties_used = nullptr);

}  // namespace lab
