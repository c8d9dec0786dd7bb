#include "stabsde/config.hpp"

#include "stabsde/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace stabsde {

TestFunction make_test_function(const std::string& name, double alpha, double beta, double threshold, double cap)
{
    TestFunction t;
    t.name = name;
    if (name == "smooth_bounded") {
        t.g = [](double x) { return 1.0 / (1.0 + x * x); };
    } else if (name == "lipschitz") {
        require(cap > 0.0, "test function lipschitz: g_cap must be positive");
        t.g = [cap](double x) { return std::min(std::abs(x), cap); };
    } else if (name == "indicator") {
        t.g = [threshold](double x) { return x <= threshold ? 1.0 : 0.0; };
    } else if (name == "power") {
        require(beta > 0.0 && beta < alpha,
                "test function power: need 0 < g_beta < alpha so that E|X|^beta is finite");
        t.g = [beta](double x) { return std::pow(std::abs(x), beta); };
        t.growth = beta;
    } else {
        throw Error("unknown test function '" + name + "' (smooth_bounded, lipschitz, indicator, power)");
    }
    return t;
}

namespace {

std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& v, const std::string& key)
{
    double x = 0.0;
    const char* end = v.data() + v.size();
    auto r = std::from_chars(v.data(), end, x);
    if (r.ec != std::errc() || r.ptr != end) throw Error("config: key '" + key + "' expects a number, got '" + v + "'");
    return x;
}

long to_long(const std::string& v, const std::string& key)
{
    // accept 2e5 style counts as long as they are integral
    double x = to_double(v, key);
    if (x != std::floor(x) || std::abs(x) > 9e15) throw Error("config: key '" + key + "' expects an integer, got '" + v + "'");
    return static_cast<long>(x);
}

std::uint64_t to_u64(const std::string& v, const std::string& key)
{
    std::uint64_t x = 0;
    const char* end = v.data() + v.size();
    auto r = std::from_chars(v.data(), end, x);
    if (r.ec != std::errc() || r.ptr != end) throw Error("config: key '" + key + "' expects an unsigned integer, got '" + v + "'");
    return x;
}

bool to_bool(const std::string& v, const std::string& key)
{
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error("config: key '" + key + "' expects true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : v + ",") {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    return out;
}

struct Field {
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Field num(T ExperimentConfig::*m)
{
    Field f;
    f.set = [m](ExperimentConfig& c, const std::string& v) {
        if constexpr (std::is_same_v<T, double>) c.*m = to_double(v, "");
        else if constexpr (std::is_same_v<T, std::uint64_t>) c.*m = to_u64(v, "");
        else c.*m = static_cast<T>(to_long(v, ""));
    };
    f.get = [m](const ExperimentConfig& c) {
        if constexpr (std::is_same_v<T, double>) return fmt(c.*m);
        else return std::to_string(c.*m);
    };
    return f;
}

Field str(std::string ExperimentConfig::*m)
{
    return {[m](ExperimentConfig& c, const std::string& v) { c.*m = v; },
            [m](const ExperimentConfig& c) { return c.*m; }};
}

template <class T>
Field preset_num(Preset ExperimentConfig::*p, T Preset::*m)
{
    return {[p, m](ExperimentConfig& c, const std::string& v) { (c.*p).*m = to_double(v, ""); },
            [p, m](const ExperimentConfig& c) { return fmt((c.*p).*m); }};
}

const std::map<std::string, Field>& schema()
{
    static const std::map<std::string, Field> s = [] {
        std::map<std::string, Field> m;
        m["alpha"] = num(&ExperimentConfig::alpha);
        m["scale"] = num(&ExperimentConfig::scale);
        m["gamma"] = num(&ExperimentConfig::gamma);
        m["dim"] = num(&ExperimentConfig::dim);
        m["spectral"] = str(&ExperimentConfig::spectral);
        for (auto [key, p] : {std::pair{"b", &ExperimentConfig::b}, std::pair{"f", &ExperimentConfig::f}}) {
            const std::string k = key;
            m[k + "_kind"] = {[p](ExperimentConfig& c, const std::string& v) { (c.*p).kind = v; },
                              [p](const ExperimentConfig& c) { return (c.*p).kind; }};
            m[k + "_level"] = preset_num(p, &Preset::level);
            m[k + "_amp"] = preset_num(p, &Preset::amp);
            m[k + "_width"] = preset_num(p, &Preset::width);
            m[k + "_freq"] = preset_num(p, &Preset::freq);
            m[k + "_phase"] = preset_num(p, &Preset::phase);
        }
        m["q"] = num(&ExperimentConfig::q);
        m["T"] = num(&ExperimentConfig::T);
        m["x0"] = num(&ExperimentConfig::x0);
        m["ladder"] = {[](ExperimentConfig& c, const std::string& v) {
                           c.ladder.clear();
                           for (auto& s : split_list(v)) c.ladder.push_back(static_cast<int>(to_long(s, "ladder")));
                       },
                       [](const ExperimentConfig& c) {
                           std::string s;
                           for (size_t i = 0; i < c.ladder.size(); ++i) s += (i ? ", " : "") + std::to_string(c.ladder[i]);
                           return s;
                       }};
        m["n_paths"] = num(&ExperimentConfig::n_paths);
        m["test_function"] = str(&ExperimentConfig::test_function);
        m["g_beta"] = num(&ExperimentConfig::g_beta);
        m["g_threshold"] = num(&ExperimentConfig::g_threshold);
        m["g_cap"] = num(&ExperimentConfig::g_cap);
        m["seed"] = num(&ExperimentConfig::seed);
        m["out_dir"] = str(&ExperimentConfig::out_dir);
        m["threads"] = num(&ExperimentConfig::threads);
        m["n_fine"] = num(&ExperimentConfig::n_fine);
        m["grid_points"] = num(&ExperimentConfig::grid_points);
        m["grid_half_width"] = num(&ExperimentConfig::grid_half_width);
        m["tail_fraction"] = num(&ExperimentConfig::tail_fraction);
        m["lag_steps"] = num(&ExperimentConfig::lag_steps);
        m["r_max"] = num(&ExperimentConfig::r_max);
        m["variant"] = str(&ExperimentConfig::variant);
        m["N"] = num(&ExperimentConfig::N);
        m["t"] = num(&ExperimentConfig::t);
        m["freeze"] = num(&ExperimentConfig::freeze);
        m["coarsen"] = num(&ExperimentConfig::coarsen);
        m["gate"] = num(&ExperimentConfig::gate);
        m["record_wall_time"] = {[](ExperimentConfig& c, const std::string& v) { c.record_wall_time = to_bool(v, "record_wall_time"); },
                                 [](const ExperimentConfig& c) { return std::string(c.record_wall_time ? "true" : "false"); }};
        m["n_samples"] = num(&ExperimentConfig::n_samples);
        m["report_items"] = {[](ExperimentConfig& c, const std::string& v) { c.report_items = split_list(v); },
                             [](const ExperimentConfig& c) {
                                 std::string s;
                                 for (size_t i = 0; i < c.report_items.size(); ++i) s += (i ? ", " : "") + c.report_items[i];
                                 return s;
                             }};
        return m;
    }();
    return s;
}

} // namespace

Model ExperimentConfig::model() const
{
    require(dim == 1, "config: coefficient models are one-dimensional (dim = 1)");
    StableSpec d = StableSpec::one_dim(alpha, scale, gamma);
    CoefficientField cf = CoefficientField::one_dim(make_preset(b), make_preset(f), q);
    return Model::make(d, cf, T);
}

TestFunction ExperimentConfig::test() const { return make_test_function(test_function, alpha, g_beta, g_threshold, g_cap); }

void ExperimentConfig::validate() const
{
    require(alpha > 0.0 && alpha < 2.0, "config: alpha must lie in the open interval (0, 2)");
    require(scale > 0.0, "config: scale must be positive");
    require(T > 0.0, "config: T must be positive");
    require(dim >= 1, "config: dim must be at least 1");
    require(!ladder.empty(), "config: ladder is empty");
    for (size_t i = 0; i < ladder.size(); ++i) {
        require(ladder[i] >= 1, "config: ladder entries must be positive");
        if (i > 0) require(ladder[i] == 2 * ladder[i - 1], "config: ladder must increase with ratio 2");
    }
    require(n_paths >= 2, "config: n_paths must be at least 2");
    require(n_samples >= 1, "config: n_samples must be positive");
    require(threads >= 0, "config: threads must be non-negative");
    require(n_fine >= 2 * ladder.back() && n_fine % (2 * ladder.back()) == 0 && n_fine % 2 == 0,
            "config: n_fine must be a multiple of twice the largest ladder entry");
    require(tail_fraction > 0.0 && tail_fraction < 0.5, "config: tail_fraction must lie in (0, 0.5)");
    require(lag_steps >= 2, "config: lag_steps must be at least 2");
    require(r_max >= 1, "config: r_max must be at least 1");
    require(N >= 1, "config: N must be positive");
    require(coarsen >= 1, "config: coarsen must be positive");
    require(t >= 0.0 && t <= T, "config: t must lie in [0, T] (0 means T)");
    require(gate > 0.0, "config: gate must be positive");
    test();
}

std::string ExperimentConfig::echo() const
{
    std::ostringstream s;
    for (const auto& [k, f] : schema()) s << k << " = " << f.get(*this) << "\n";
    return s.str();
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin)
{
    ExperimentConfig c;
    std::istringstream in(text);
    std::string line;
    int no = 0;
    const auto& sc = schema();
    std::map<std::string, int> seen;
    while (std::getline(in, line)) {
        ++no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        const std::string where = origin + ":" + std::to_string(no);
        if (eq == std::string::npos) throw Error(where + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        auto it = sc.find(key);
        if (it == sc.end()) throw Error(where + ": unknown key '" + key + "'");
        if (seen.count(key)) throw Error(where + ": key '" + key + "' repeats line " + std::to_string(seen[key]));
        seen[key] = no;
        try {
            it->second.set(c, val);
        } catch (const Error& e) {
            std::string msg = e.what();
            auto p = msg.find("key ''");
            if (p != std::string::npos) msg.replace(p, 6, "key '" + key + "'");
            throw Error(where + ": " + msg);
        }
    }
    return c;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "config: cannot open " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return parse_config(s.str(), path);
}

} // namespace stabsde
