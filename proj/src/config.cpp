#include "superct/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace superct {

void ExperimentConfig::validate() const {
    geometry.validate();
    noise.validate();
    patch.validate();
    if (n_train < 1 || n_val < 0 || n_test < 1)
        throw std::invalid_argument("config: phantom counts invalid");
    if (transforms.clusters < 1 || transforms.iterations < 1)
        throw std::invalid_argument("config: transform learning settings invalid");
    if (transform_slices < 1 || transform_slices > n_train)
        throw std::invalid_argument("config: transform_slices must be in [1, n_train]");
    if (ep.delta <= 0.0 || ep.beta <= 0.0 || ep.iterations < 1)
        throw std::invalid_argument("config: EP settings invalid");
    for (const auto* u : {&ultra_layer, &ultra_standalone})
        if (u->beta < 0.0 || u->gamma <= 0.0 || u->outer < 1 || u->inner < 1)
            throw std::invalid_argument("config: ULTRA solver settings invalid");
    if (serial.mu < 0.0 || serial.alternations < 1 || serial.inner < 1)
        throw std::invalid_argument("config: serial SUPER settings invalid");
    denoiser.spec.validate();
    if (denoiser.epochs < 1 || denoiser.standalone_epochs < 1)
        throw std::invalid_argument("config: denoiser epochs invalid");
    if (denoiser.grad_clip < 0.0)
        throw std::invalid_argument("config: denoiser grad_clip must be >= 0");
    if (lambdas.empty()) throw std::invalid_argument("config: lambda candidate set is empty");
    for (double l : lambdas)
        if (l < 0.0 || l > 1.0)
            throw std::invalid_argument("config: lambda candidates must lie in [0, 1]");
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("config: lambda must lie in [0, 1]");
    if (layers < 0) throw std::invalid_argument("config: layers must be >= 0");
    if (output_dir.empty()) throw std::invalid_argument("config: output_dir is empty");
}

ExperimentConfig default_experiment_config() {
    ExperimentConfig cfg;
    cfg.geometry.beam = Beam::parallel;
    cfg.geometry.n_views = 96;
    cfg.geometry.n_detectors = 96;
    cfg.geometry.detector_pitch_mm = 1.0;
    cfg.geometry.angular_range_rad = M_PI;
    cfg.geometry.image_rows = 64;
    cfg.geometry.image_cols = 64;
    cfg.geometry.pixel_size_mm = 1.0;
    // paper-scale fan constants, used when beam = "fan-arc"
    cfg.geometry.source_to_detector_mm = 1085.6;
    cfg.geometry.source_to_center_mm = 595.0;

    cfg.noise.incident_photons = 1e4;
    cfg.noise.gaussian_variance = 25.0;
    cfg.noise.epsilon = 1e-5;
    cfg.noise.rng_seed = 5;

    cfg.transforms.clusters = 5;
    cfg.transforms.gamma = 20.0;
    cfg.transforms.iterations = 20;
    cfg.transforms.lambda0 = 0.01;
    cfg.transforms.rng_seed = 3;

    cfg.ultra_layer = UltraSolverConfig{1e5, 25.0, 15, 5};
    cfg.ultra_standalone = UltraSolverConfig{1e5, 25.0, 50, 5};
    cfg.serial = SerialConfig{5e5, 10, 5};
    return cfg;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

struct Value {
    std::string raw;
    std::string where;

    double num() const {
        try {
            std::size_t pos = 0;
            const double v = std::stod(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw std::invalid_argument("config: " + where + ": expected a number, got '" +
                                        raw + "'");
        }
    }
    long long integer() const {
        const double v = num();
        if (v != std::floor(v))
            throw std::invalid_argument("config: " + where + ": expected an integer");
        return static_cast<long long>(v);
    }
    bool boolean() const {
        if (raw == "true") return true;
        if (raw == "false") return false;
        throw std::invalid_argument("config: " + where + ": expected true/false");
    }
    std::string str() const {
        if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"')
            return raw.substr(1, raw.size() - 2);
        throw std::invalid_argument("config: " + where + ": expected a quoted string");
    }
    std::vector<double> numbers() const {
        if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']')
            throw std::invalid_argument("config: " + where + ": expected an array");
        std::vector<double> out;
        std::string inner = raw.substr(1, raw.size() - 2);
        std::istringstream is(inner);
        std::string item;
        while (std::getline(is, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                out.push_back(std::stod(item));
            } catch (...) {
                throw std::invalid_argument("config: " + where + ": bad array element '" +
                                            item + "'");
            }
        }
        return out;
    }
};

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
    ExperimentConfig cfg = default_experiment_config();
    using Setter = std::function<void(ExperimentConfig&, const Value&)>;
    static const std::map<std::string, Setter> setters = {
        {"geometry.beam",
         [](ExperimentConfig& c, const Value& v) {
             const std::string b = v.str();
             if (b == "parallel") c.geometry.beam = Beam::parallel;
             else if (b == "fan-arc") c.geometry.beam = Beam::fan_arc;
             else throw std::invalid_argument("config: " + v.where + ": unknown beam '" + b + "'");
         }},
        {"geometry.n_views", [](auto& c, const Value& v) { c.geometry.n_views = static_cast<int>(v.integer()); }},
        {"geometry.n_detectors", [](auto& c, const Value& v) { c.geometry.n_detectors = static_cast<int>(v.integer()); }},
        {"geometry.detector_pitch", [](auto& c, const Value& v) { c.geometry.detector_pitch_mm = v.num(); }},
        {"geometry.source_to_detector", [](auto& c, const Value& v) { c.geometry.source_to_detector_mm = v.num(); }},
        {"geometry.source_to_center", [](auto& c, const Value& v) { c.geometry.source_to_center_mm = v.num(); }},
        {"geometry.angular_range", [](auto& c, const Value& v) { c.geometry.angular_range_rad = v.num(); }},
        {"geometry.image_rows", [](auto& c, const Value& v) { c.geometry.image_rows = static_cast<int>(v.integer()); }},
        {"geometry.image_cols", [](auto& c, const Value& v) { c.geometry.image_cols = static_cast<int>(v.integer()); }},
        {"geometry.pixel_size", [](auto& c, const Value& v) { c.geometry.pixel_size_mm = v.num(); }},
        {"noise.incident_photons", [](auto& c, const Value& v) { c.noise.incident_photons = v.num(); }},
        {"noise.gaussian_variance", [](auto& c, const Value& v) { c.noise.gaussian_variance = v.num(); }},
        {"noise.epsilon", [](auto& c, const Value& v) { c.noise.epsilon = v.num(); }},
        {"noise.seed", [](auto& c, const Value& v) { c.noise.rng_seed = static_cast<std::uint64_t>(v.integer()); }},
        {"noise.mean_only", [](auto& c, const Value& v) { c.noise.mean_only = v.boolean(); }},
        {"phantoms.n_train", [](auto& c, const Value& v) { c.n_train = static_cast<int>(v.integer()); }},
        {"phantoms.n_val", [](auto& c, const Value& v) { c.n_val = static_cast<int>(v.integer()); }},
        {"phantoms.n_test", [](auto& c, const Value& v) { c.n_test = static_cast<int>(v.integer()); }},
        {"phantoms.seed", [](auto& c, const Value& v) { c.phantom_seed = static_cast<std::uint64_t>(v.integer()); }},
        {"patch.side", [](auto& c, const Value& v) { c.patch.patch_side = static_cast<int>(v.integer()); }},
        {"patch.stride", [](auto& c, const Value& v) { c.patch.stride = static_cast<int>(v.integer()); }},
        {"transforms.clusters", [](auto& c, const Value& v) { c.transforms.clusters = static_cast<int>(v.integer()); }},
        {"transforms.gamma", [](auto& c, const Value& v) { c.transforms.gamma = v.num(); }},
        {"transforms.iterations", [](auto& c, const Value& v) { c.transforms.iterations = static_cast<int>(v.integer()); }},
        {"transforms.lambda0", [](auto& c, const Value& v) { c.transforms.lambda0 = v.num(); }},
        {"transforms.seed", [](auto& c, const Value& v) { c.transforms.rng_seed = static_cast<std::uint64_t>(v.integer()); }},
        {"transforms.slices", [](auto& c, const Value& v) { c.transform_slices = static_cast<int>(v.integer()); }},
        {"ep.delta", [](auto& c, const Value& v) { c.ep.delta = v.num(); }},
        {"ep.beta", [](auto& c, const Value& v) { c.ep.beta = v.num(); }},
        {"ep.iterations", [](auto& c, const Value& v) { c.ep.iterations = static_cast<int>(v.integer()); }},
        {"ultra_layer.beta", [](auto& c, const Value& v) { c.ultra_layer.beta = v.num(); }},
        {"ultra_layer.gamma", [](auto& c, const Value& v) { c.ultra_layer.gamma = v.num(); }},
        {"ultra_layer.outer", [](auto& c, const Value& v) { c.ultra_layer.outer = static_cast<int>(v.integer()); }},
        {"ultra_layer.inner", [](auto& c, const Value& v) { c.ultra_layer.inner = static_cast<int>(v.integer()); }},
        {"ultra_standalone.beta", [](auto& c, const Value& v) { c.ultra_standalone.beta = v.num(); }},
        {"ultra_standalone.gamma", [](auto& c, const Value& v) { c.ultra_standalone.gamma = v.num(); }},
        {"ultra_standalone.outer", [](auto& c, const Value& v) { c.ultra_standalone.outer = static_cast<int>(v.integer()); }},
        {"ultra_standalone.inner", [](auto& c, const Value& v) { c.ultra_standalone.inner = static_cast<int>(v.integer()); }},
        {"serial.mu", [](auto& c, const Value& v) { c.serial.mu = v.num(); }},
        {"serial.alternations", [](auto& c, const Value& v) { c.serial.alternations = static_cast<int>(v.integer()); }},
        {"serial.inner", [](auto& c, const Value& v) { c.serial.inner = static_cast<int>(v.integer()); }},
        {"denoiser.depth", [](auto& c, const Value& v) { c.denoiser.spec.depth = static_cast<int>(v.integer()); }},
        {"denoiser.channels", [](auto& c, const Value& v) { c.denoiser.spec.channels = static_cast<int>(v.integer()); }},
        {"denoiser.kernel", [](auto& c, const Value& v) { c.denoiser.spec.kernel = static_cast<int>(v.integer()); }},
        {"denoiser.residual", [](auto& c, const Value& v) { c.denoiser.spec.residual = v.boolean(); }},
        {"denoiser.epochs", [](auto& c, const Value& v) { c.denoiser.epochs = static_cast<int>(v.integer()); }},
        {"denoiser.standalone_epochs", [](auto& c, const Value& v) { c.denoiser.standalone_epochs = static_cast<int>(v.integer()); }},
        {"denoiser.lr_start", [](auto& c, const Value& v) { c.denoiser.lr_start = v.num(); }},
        {"denoiser.lr_end", [](auto& c, const Value& v) { c.denoiser.lr_end = v.num(); }},
        {"denoiser.momentum", [](auto& c, const Value& v) { c.denoiser.momentum = v.num(); }},
        {"denoiser.batch_size", [](auto& c, const Value& v) { c.denoiser.batch_size = static_cast<int>(v.integer()); }},
        {"denoiser.init_variance", [](auto& c, const Value& v) { c.denoiser.init_variance = v.num(); }},
        {"denoiser.grad_clip", [](auto& c, const Value& v) { c.denoiser.grad_clip = v.num(); }},
        {"denoiser.seed", [](auto& c, const Value& v) { c.denoiser.seed = static_cast<std::uint64_t>(v.integer()); }},
        {"super.lambdas", [](auto& c, const Value& v) { c.lambdas = v.numbers(); }},
        {"super.lambda", [](auto& c, const Value& v) { c.lambda = v.num(); }},
        {"super.layers", [](auto& c, const Value& v) { c.layers = static_cast<int>(v.integer()); }},
        {"run.seed", [](auto& c, const Value& v) { c.seed = static_cast<std::uint64_t>(v.integer()); }},
        {"run.output_dir", [](auto& c, const Value& v) { c.output_dir = v.str(); }},
        {"run.threads", [](auto& c, const Value& v) { c.threads = static_cast<int>(v.integer()); }},
    };

    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                            ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        Value val;
        val.raw = trim(line.substr(eq + 1));
        val.where = "[" + section + "]." + key;
        const auto it = setters.find(section + "." + key);
        if (it == setters.end())
            throw std::invalid_argument("config: unknown key " + val.where);
        it->second(cfg, val);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse_experiment_config(os.str());
}

std::string serialize_experiment_config(const ExperimentConfig& cfg) {
    std::ostringstream os;
    char buf[160];
    auto num = [&](const char* key, double v) {
        std::snprintf(buf, sizeof(buf), "%s = %.17g\n", key, v);
        os << buf;
    };
    auto integer = [&](const char* key, long long v) { os << key << " = " << v << "\n"; };

    os << "[geometry]\n";
    os << "beam = \"" << (cfg.geometry.beam == Beam::parallel ? "parallel" : "fan-arc") << "\"\n";
    integer("n_views", cfg.geometry.n_views);
    integer("n_detectors", cfg.geometry.n_detectors);
    num("detector_pitch", cfg.geometry.detector_pitch_mm);
    num("source_to_detector", cfg.geometry.source_to_detector_mm);
    num("source_to_center", cfg.geometry.source_to_center_mm);
    num("angular_range", cfg.geometry.angular_range_rad);
    integer("image_rows", cfg.geometry.image_rows);
    integer("image_cols", cfg.geometry.image_cols);
    num("pixel_size", cfg.geometry.pixel_size_mm);

    os << "\n[noise]\n";
    num("incident_photons", cfg.noise.incident_photons);
    num("gaussian_variance", cfg.noise.gaussian_variance);
    num("epsilon", cfg.noise.epsilon);
    integer("seed", static_cast<long long>(cfg.noise.rng_seed));
    os << "mean_only = " << (cfg.noise.mean_only ? "true" : "false") << "\n";

    os << "\n[phantoms]\n";
    integer("n_train", cfg.n_train);
    integer("n_val", cfg.n_val);
    integer("n_test", cfg.n_test);
    integer("seed", static_cast<long long>(cfg.phantom_seed));

    os << "\n[patch]\n";
    integer("side", cfg.patch.patch_side);
    integer("stride", cfg.patch.stride);

    os << "\n[transforms]\n";
    integer("clusters", cfg.transforms.clusters);
    num("gamma", cfg.transforms.gamma);
    integer("iterations", cfg.transforms.iterations);
    num("lambda0", cfg.transforms.lambda0);
    integer("seed", static_cast<long long>(cfg.transforms.rng_seed));
    integer("slices", cfg.transform_slices);

    os << "\n[ep]\n";
    num("delta", cfg.ep.delta);
    num("beta", cfg.ep.beta);
    integer("iterations", cfg.ep.iterations);

    os << "\n[ultra_layer]\n";
    num("beta", cfg.ultra_layer.beta);
    num("gamma", cfg.ultra_layer.gamma);
    integer("outer", cfg.ultra_layer.outer);
    integer("inner", cfg.ultra_layer.inner);

    os << "\n[ultra_standalone]\n";
    num("beta", cfg.ultra_standalone.beta);
    num("gamma", cfg.ultra_standalone.gamma);
    integer("outer", cfg.ultra_standalone.outer);
    integer("inner", cfg.ultra_standalone.inner);

    os << "\n[serial]\n";
    num("mu", cfg.serial.mu);
    integer("alternations", cfg.serial.alternations);
    integer("inner", cfg.serial.inner);

    os << "\n[denoiser]\n";
    integer("depth", cfg.denoiser.spec.depth);
    integer("channels", cfg.denoiser.spec.channels);
    integer("kernel", cfg.denoiser.spec.kernel);
    os << "residual = " << (cfg.denoiser.spec.residual ? "true" : "false") << "\n";
    integer("epochs", cfg.denoiser.epochs);
    integer("standalone_epochs", cfg.denoiser.standalone_epochs);
    num("lr_start", cfg.denoiser.lr_start);
    num("lr_end", cfg.denoiser.lr_end);
    num("momentum", cfg.denoiser.momentum);
    integer("batch_size", cfg.denoiser.batch_size);
    num("init_variance", cfg.denoiser.init_variance);
    num("grad_clip", cfg.denoiser.grad_clip);
    integer("seed", static_cast<long long>(cfg.denoiser.seed));

    os << "\n[super]\n";
    os << "lambdas = [";
    for (std::size_t i = 0; i < cfg.lambdas.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%s%.17g", i ? ", " : "", cfg.lambdas[i]);
        os << buf;
    }
    os << "]\n";
    num("lambda", cfg.lambda);
    integer("layers", cfg.layers);

    os << "\n[run]\n";
    integer("seed", static_cast<long long>(cfg.seed));
    os << "output_dir = \"" << cfg.output_dir << "\"\n";
    integer("threads", cfg.threads);
    return os.str();
}

}  // namespace superct
