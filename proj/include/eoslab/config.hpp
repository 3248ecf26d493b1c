#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "eoslab/canonical.hpp"
#include "eoslab/mlp.hpp"

namespace eoslab {

// Experiment configuration, serialized as flat `key = value` text with one
// nested block for the landscape spec:
//
//   preset = gap-scan-batch
//   eta = 0.01
//   batch_sizes = 8,16,32,64,128
//   ...
//   landscape = canonical {
//     h0 = 196
//     ...
//   }
//
// Round-trips losslessly (reals carry 17 significant digits).
struct ExperimentConfig {
    std::string preset;
    double eta = 0.01;
    std::vector<int> batch_sizes;
    std::vector<double> sigma_list;
    int runs = 1;
    long steps = 1000;
    double burn_in_fraction = 0.3;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    int threads = 1;
    long probe_every = 10;
    std::variant<CanonicalSpec, MlpSpec> landscape = CanonicalSpec{};

    bool landscape_is_mlp() const { return std::holds_alternative<MlpSpec>(landscape); }
    const CanonicalSpec& canonical() const { return std::get<CanonicalSpec>(landscape); }
    CanonicalSpec& canonical() { return std::get<CanonicalSpec>(landscape); }
    const MlpSpec& mlp() const { return std::get<MlpSpec>(landscape); }

    void validate() const {
        if (preset.empty()) throw Error("config: preset must be set");
        if (!(eta > 0.0)) throw Error("config: eta must be positive");
        if (runs < 1) throw Error("config: runs must be >= 1");
        if (steps < 1) throw Error("config: steps must be >= 1");
        if (burn_in_fraction < 0.0 || burn_in_fraction >= 1.0)
            throw Error("config: burn_in_fraction must be in [0, 1)");
        if (threads < 1) throw Error("config: threads must be >= 1");
        if (probe_every < 1) throw Error("config: probe_every must be >= 1");
        for (int b : batch_sizes)
            if (b < 1) throw Error("config: batch sizes must be positive");
        for (double s : sigma_list)
            if (s < 0.0) throw Error("config: sigma values must be >= 0");
    }
};

namespace detail {

inline std::string fmt_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_real(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error("config: bad numeric value for '" + key + "': " + s);
    }
}

inline long parse_int(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error("config: bad integer value for '" + key + "': " + s);
    }
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        std::uint64_t v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error("config: bad unsigned value for '" + key + "': " + s);
    }
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& s, Parse parse) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse(item));
    }
    return out;
}

} // namespace detail

inline std::string serialize_config(const ExperimentConfig& cfg) {
    using detail::fmt_real;
    std::string out;
    out += "preset = " + cfg.preset + "\n";
    out += "eta = " + fmt_real(cfg.eta) + "\n";
    out += "batch_sizes = ";
    for (std::size_t i = 0; i < cfg.batch_sizes.size(); ++i)
        out += (i ? "," : "") + std::to_string(cfg.batch_sizes[i]);
    out += "\n";
    out += "sigma_list = ";
    for (std::size_t i = 0; i < cfg.sigma_list.size(); ++i)
        out += (i ? "," : "") + fmt_real(cfg.sigma_list[i]);
    out += "\n";
    out += "runs = " + std::to_string(cfg.runs) + "\n";
    out += "steps = " + std::to_string(cfg.steps) + "\n";
    out += "burn_in_fraction = " + fmt_real(cfg.burn_in_fraction) + "\n";
    out += "seed = " + std::to_string(cfg.seed) + "\n";
    out += "out_dir = " + cfg.out_dir + "\n";
    out += "threads = " + std::to_string(cfg.threads) + "\n";
    out += "probe_every = " + std::to_string(cfg.probe_every) + "\n";
    if (cfg.landscape_is_mlp()) {
        const MlpSpec& m = cfg.mlp();
        out += "landscape = mlp {\n";
        out += "  input_dim = " + std::to_string(m.input_dim) + "\n";
        out += "  hidden_dim = " + std::to_string(m.hidden_dim) + "\n";
        out += "  output_dim = " + std::to_string(m.output_dim) + "\n";
        out += "  n_samples = " + std::to_string(m.n_samples) + "\n";
        out += "  seed = " + std::to_string(m.seed) + "\n";
        out += "  fd_hvp_scale = " + fmt_real(m.fd_hvp_scale) + "\n";
        out += "  fd_third_scale = " + fmt_real(m.fd_third_scale) + "\n";
        out += "}\n";
    } else {
        const CanonicalSpec& c = cfg.canonical();
        out += "landscape = canonical {\n";
        out += "  h0 = " + fmt_real(c.h0) + "\n";
        out += "  alpha0 = " + fmt_real(c.alpha0) + "\n";
        out += "  rho = " + fmt_real(c.rho) + "\n";
        out += "  lam = " + fmt_real(c.lam) + "\n";
        out += "  k_bulk = " + std::to_string(c.k_bulk) + "\n";
        out += "  noise_cov_scale = " + fmt_real(c.noise_cov_scale) + "\n";
        out += "  cubic = " + fmt_real(c.cubic) + "\n";
        out += "  x4 = " + fmt_real(c.x4) + "\n";
        out += "  n_samples = " + std::to_string(c.n_samples) + "\n";
        out += "  noise_dim = " + std::to_string(c.noise_dim) + "\n";
        out += "  seed = " + std::to_string(c.seed) + "\n";
        out += "}\n";
    }
    return out;
}

inline ExperimentConfig parse_config(const std::string& text) {
    using namespace detail;
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string raw;
    std::string block;  // "" | "canonical" | "mlp"
    std::map<std::string, std::string> block_kv;

    auto finish_block = [&]() {
        auto get = [&](const char* key) -> std::optional<std::string> {
            auto it = block_kv.find(key);
            if (it == block_kv.end()) return std::nullopt;
            return it->second;
        };
        if (block == "canonical") {
            CanonicalSpec c;
            if (auto v = get("h0")) c.h0 = parse_real(*v, "h0");
            if (auto v = get("alpha0")) c.alpha0 = parse_real(*v, "alpha0");
            if (auto v = get("rho")) c.rho = parse_real(*v, "rho");
            if (auto v = get("lam")) c.lam = parse_real(*v, "lam");
            if (auto v = get("k_bulk")) c.k_bulk = int(parse_int(*v, "k_bulk"));
            if (auto v = get("noise_cov_scale")) c.noise_cov_scale = parse_real(*v, "noise_cov_scale");
            if (auto v = get("cubic")) c.cubic = parse_real(*v, "cubic");
            if (auto v = get("x4")) c.x4 = parse_real(*v, "x4");
            if (auto v = get("n_samples")) c.n_samples = int(parse_int(*v, "n_samples"));
            if (auto v = get("noise_dim")) c.noise_dim = int(parse_int(*v, "noise_dim"));
            if (auto v = get("seed")) c.seed = parse_u64(*v, "seed");
            cfg.landscape = c;
        } else if (block == "mlp") {
            MlpSpec m;
            if (auto v = get("input_dim")) m.input_dim = int(parse_int(*v, "input_dim"));
            if (auto v = get("hidden_dim")) m.hidden_dim = int(parse_int(*v, "hidden_dim"));
            if (auto v = get("output_dim")) m.output_dim = int(parse_int(*v, "output_dim"));
            if (auto v = get("n_samples")) m.n_samples = int(parse_int(*v, "n_samples"));
            if (auto v = get("seed")) m.seed = parse_u64(*v, "seed");
            if (auto v = get("fd_hvp_scale")) m.fd_hvp_scale = parse_real(*v, "fd_hvp_scale");
            if (auto v = get("fd_third_scale")) m.fd_third_scale = parse_real(*v, "fd_third_scale");
            cfg.landscape = m;
        }
        block.clear();
        block_kv.clear();
    };

    while (std::getline(ss, raw)) {
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (!block.empty()) {
            if (line == "}") {
                finish_block();
                continue;
            }
            auto eq = line.find('=');
            if (eq == std::string::npos) throw Error("config: expected key = value in block: " + line);
            block_kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw Error("config: expected key = value: " + line);
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key == "landscape") {
            if (val.size() >= 1 && val.back() == '{') {
                block = trim(val.substr(0, val.size() - 1));
                if (block != "canonical" && block != "mlp")
                    throw Error("config: unknown landscape type '" + block + "'");
            } else {
                throw Error("config: landscape needs a block: landscape = <type> { ... }");
            }
        } else if (key == "preset") cfg.preset = val;
        else if (key == "eta") cfg.eta = parse_real(val, key);
        else if (key == "batch_sizes")
            cfg.batch_sizes = parse_list<int>(val, [&](const std::string& s) {
                return int(parse_int(s, "batch_sizes"));
            });
        else if (key == "sigma_list")
            cfg.sigma_list = parse_list<double>(val, [&](const std::string& s) {
                return parse_real(s, "sigma_list");
            });
        else if (key == "runs") cfg.runs = int(parse_int(val, key));
        else if (key == "steps") cfg.steps = parse_int(val, key);
        else if (key == "burn_in_fraction") cfg.burn_in_fraction = parse_real(val, key);
        else if (key == "seed") cfg.seed = parse_u64(val, key);
        else if (key == "out_dir") cfg.out_dir = val;
        else if (key == "threads") cfg.threads = int(parse_int(val, key));
        else if (key == "probe_every") cfg.probe_every = parse_int(val, key);
        else throw Error("config: unknown key '" + key + "'");
    }
    if (!block.empty()) throw Error("config: unterminated landscape block");
    return cfg;
}

inline std::shared_ptr<const Landscape> make_landscape(const ExperimentConfig& cfg) {
    if (cfg.landscape_is_mlp()) return make_mlp(cfg.mlp());
    return make_canonical(cfg.canonical());
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

inline void save_config(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("config: cannot write '" + path + "'");
    std::string body = serialize_config(cfg);
    f.write(body.data(), std::streamsize(body.size()));
}

} // namespace eoslab
