#include "lab/errors.hpp"
#include "lab/harness.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace lab {

namespace pt = boost::property_tree;

namespace {

// accepts plain numbers and simple fractions such as 1/64
double parse_number(const std::string& key, std::string text) {
    boost::algorithm::trim(text);
    auto one = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': '" + text + "' is not a number");
        }
        if (used != s.size()) throw ConfigError("key '" + key + "': '" + text + "' is not a number");
        return v;
    };
    const auto slash = text.find('/');
    if (slash == std::string::npos) return one(text);
    std::string num = text.substr(0, slash), den = text.substr(slash + 1);
    boost::algorithm::trim(num);
    boost::algorithm::trim(den);
    const double d = one(den);
    if (d == 0.0) throw ConfigError("key '" + key + "': division by zero in '" + text + "'");
    return one(num) / d;
}

void collect(const pt::ptree& t, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
    for (const auto& [k, child] : t) {
        const std::string full = prefix.empty() ? k : prefix + "." + k;
        if (child.empty())
            out.emplace_back(full, child.data());
        else
            collect(child, full, out);
    }
}

}  // namespace

bool Config::has(const std::string& key) const { return static_cast<bool>(tree_.get_child_optional(key)); }

std::string Config::str(const std::string& key) const {
    auto v = tree_.get_optional<std::string>(key);
    if (!v) throw ConfigError("missing config key '" + key + "'");
    std::string s = *v;
    boost::algorithm::trim(s);
    return s;
}

std::string Config::str(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
}

double Config::num(const std::string& key) const { return parse_number(key, str(key)); }

double Config::num(const std::string& key, double fallback) const { return has(key) ? num(key) : fallback; }

int Config::integer(const std::string& key) const {
    const double v = num(key);
    if (v != static_cast<double>(static_cast<long long>(v)))
        throw ConfigError("key '" + key + "' must be an integer");
    return static_cast<int>(v);
}

int Config::integer(const std::string& key, int fallback) const { return has(key) ? integer(key) : fallback; }

bool Config::flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = boost::algorithm::to_lower_copy(str(key));
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<double> Config::list(const std::string& key) const {
    std::vector<std::string> parts;
    const std::string text = str(key);
    boost::algorithm::split(parts, text, boost::algorithm::is_any_of(","));
    std::vector<double> out;
    for (const auto& p : parts) out.push_back(parse_number(key, p));
    if (out.empty() || text.empty()) throw ConfigError("key '" + key + "' must be a nonempty list");
    return out;
}

std::vector<int> Config::int_list(const std::string& key) const {
    std::vector<int> out;
    for (double v : list(key)) {
        if (v != static_cast<double>(static_cast<long long>(v)))
            throw ConfigError("key '" + key + "' must list integers");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

void Config::set(const std::string& key, const std::string& value) {
    if (key.find('.') == std::string::npos) throw ConfigError("override key '" + key + "' needs a section");
    tree_.put(key, value);
}

void Config::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    std::string key = assignment.substr(0, eq), value = assignment.substr(eq + 1);
    boost::algorithm::trim(key);
    boost::algorithm::trim(value);
    set(key, value);
}

std::vector<std::pair<std::string, std::string>> Config::entries() const {
    std::vector<std::pair<std::string, std::string>> out;
    collect(tree_, "", out);
    std::sort(out.begin(), out.end());
    return out;
}

Config Config::parse(const std::string& text) {
    Config c;
    std::istringstream in(text);
    try {
        pt::read_ini(in, c.tree_);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return c;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

ARule ARule::parse(const std::string& text) {
    ARule r;
    if (text == "quarter_power") {
        r.quarter_power = true;
        return r;
    }
    const std::string prefix = "fixed:";
    if (text.rfind(prefix, 0) == 0) {
        r.a = parse_number("a_rule", text.substr(prefix.size()));
        if (!(r.a > 0.0)) throw ConfigError("a_rule: fixed scale must be positive");
        return r;
    }
    throw ConfigError("a_rule must be 'fixed:<a>' or 'quarter_power', got '" + text + "'");
}

ExperimentConfig make_experiment_config(const std::string& experiment, const Config& cfg) {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), experiment) == names.end())
        throw ConfigError("unknown experiment '" + experiment + "'");
    ExperimentConfig e;
    e.experiment = experiment;
    e.cfg = cfg;
    e.nr = cfg.integer("grid.nr", 64);
    e.ntheta = cfg.integer("grid.ntheta", 48);
    e.nphi = cfg.integer("grid.nphi", 96);
    if (e.nr < 8 || e.ntheta < 4 || e.nphi < 4) throw ConfigError("grid too small");
    const double seed = cfg.num("run.seed", 0.0);
    if (seed < 0.0) throw ConfigError("run.seed must be nonnegative");
    e.seed = static_cast<unsigned long long>(seed);
    e.workers = cfg.integer("run.workers", 1);
    if (e.workers < 1) throw ConfigError("run.workers must be at least 1");
    e.out_dir = cfg.str("run.out", "out");
    return e;
}

}  // namespace lab
