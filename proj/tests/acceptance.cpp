// Runs every experiment from the config directory and prints one verdict per acceptance criterion.

#include "lab/errors.hpp"
#include "lab/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <map>

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void need(const lab::ExperimentReport& rep, const std::string& check) {
        const lab::Check* c = rep.check(check);
        if (!c) {
            pass = false;
            add(rep.experiment + "." + check + " missing");
            return;
        }
        pass = pass && c->pass;
        add(check + (c->pass ? " ok" : " FAILED") + " (" + c->detail + ")");
    }
    void add(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

lab::ExperimentConfig load(const std::string& dir, const std::string& name, const std::string& out) {
    lab::Config cfg = lab::Config::load((std::filesystem::path(dir) / (name + ".ini")).string());
    cfg.set("run.out", out);
    return lab::make_experiment_config(name, cfg);
}

std::string csv_bodies(const lab::ExperimentReport& rep) {
    std::string s;
    for (const auto& t : rep.tables) s += lab::csv_text(t);
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string configs = "configs", out = "acceptance_out";
    app.add_option("--configs", configs, "directory with <experiment>.ini");
    app.add_option("--out", out, "report directory");
    CLI11_PARSE(app, argc, argv);

    std::map<std::string, lab::ExperimentReport> reps;
    std::map<std::string, std::string> errors;
    for (const std::string name : {"selftest", "sharpness", "stability", "rotsym", "inmeasure", "asymptotics"}) {
        try {
            const auto cfg = load(configs, name, (std::filesystem::path(out) / name).string());
            reps[name] = lab::run_experiment(cfg);
            lab::write_report(reps[name], cfg);
            for (const auto& n : reps[name].notes) std::printf("  [%s] note: %s\n", name.c_str(), n.c_str());
        } catch (const std::exception& e) {
            errors[name] = e.what();
            std::printf("  [%s] error: %s\n", name.c_str(), e.what());
        }
        std::fflush(stdout);
    }

    auto from = [&](const std::string& exp, std::initializer_list<const char*> checks) {
        Verdict v;
        if (!reps.count(exp)) {
            v.pass = false;
            v.add(exp + " did not run: " + errors[exp]);
            return v;
        }
        if (reps[exp].solver_failure) {
            v.pass = false;
            v.add(exp + " had solver failures");
        }
        for (const char* c : checks) v.need(reps[exp], c);
        return v;
    };
    auto merge = [](Verdict a, const Verdict& b) {
        a.pass = a.pass && b.pass;
        a.add(b.detail);
        return a;
    };

    std::vector<std::pair<std::string, Verdict>> crit;
    crit.emplace_back("weight algebra", from("selftest", {"weight_algebra"}));
    crit.emplace_back("Euclidean null suite", from("selftest", {"null_suite", "null_suite_order"}));
    crit.emplace_back("Green's function", merge(from("selftest", {"green_ball"}), from("asymptotics", {"lemma_order"})));
    crit.emplace_back("sharpness rate", from("sharpness", {"sharpness_exponent", "inf_R_lower_bound"}));
    crit.emplace_back("stability linear rate", from("stability", {"D_linear_rate", "D1_linear_rate"}));
    crit.emplace_back("Meyers-type rates", from("stability", {"L2_gradient_rate", "L4_gradient_rate", "sup_rate"}));
    crit.emplace_back("monotonicity", from("selftest", {"monotonicity", "euclidean_terms_vanish"}));
    crit.emplace_back("rotational identity", from("rotsym", {"identity_1d", "identity_3d", "euclidean_profile"}));
    crit.emplace_back("bulk asymptotics", from("asymptotics", {"bulk_order", "Ftilde0_over_t5_bounded"}));
    crit.emplace_back("in-measure experiment",
                      from("inmeasure", {"D_minus_D0_decreasing", "L2_grad_decreasing", "sup_decreasing",
                                         "c0_distance_stays"}));
    crit.emplace_back("coordinate normalization", from("selftest", {"normalization"}));

    // 12: rerun two experiments with the same config and compare CSV bodies byte for byte
    {
        Verdict v;
        for (const std::string name : {"sharpness", "asymptotics"}) {
            if (!reps.count(name)) {
                v.pass = false;
                v.add(name + " did not run");
                continue;
            }
            try {
                const auto cfg = load(configs, name, (std::filesystem::path(out) / (name + "_rerun")).string());
                const auto again = lab::run_experiment(cfg);
                lab::write_report(again, cfg);
                const bool same = csv_bodies(again) == csv_bodies(reps[name]);
                v.pass = v.pass && same;
                v.add(name + (same ? " identical" : " DIFFERS"));
            } catch (const std::exception& e) {
                v.pass = false;
                v.add(name + " rerun failed: " + e.what());
            }
        }
        crit.emplace_back("determinism", v);
    }

    int failed = 0;
    for (std::size_t i = 0; i < crit.size(); ++i) {
        const auto& [name, v] = crit[i];
        std::printf("criterion %2zu %-26s %s  %s\n", i + 1, name.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str());
        failed += v.pass ? 0 : 1;
    }
    if (reps.count("rotsym"))
        for (const char* c : {"D_linear_rate", "D1_linear_rate"})
            if (const auto* ch = reps["rotsym"].check(c))
                std::printf("info rotsym %s %s  %s\n", c, ch->pass ? "PASS" : "FAIL", ch->detail.c_str());
    std::printf("%d of %zu criteria failed\n", failed, crit.size());
    return failed == 0 ? 0 : 1;
}
