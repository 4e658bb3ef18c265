#include "slsim/sensor.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "slsim/errors.hpp"
#include "slsim/textfmt.hpp"

namespace slsim {

void validate(const SensorConfig& cfg) {
    auto fail = [](const std::string& msg) { throw config_error(msg); };
    if (cfg.width < 1 || cfg.height < 1) fail("image dimensions must be positive");
    if (!(cfg.focal_px > 0)) fail("focal_px must be positive");
    if (!(cfg.baseline_mm > 0)) fail("baseline_mm must be positive");
    if (!(cfg.z_min_mm > 0)) fail("z_min_mm must be positive");
    if (!(cfg.z_max_mm > cfg.z_min_mm)) fail("z_max_mm must exceed z_min_mm");
    if (cfg.block_size < 3 || cfg.block_size % 2 == 0) fail("block_size must be odd and >= 3");
    if (!(cfg.emitter_intensity >= 0)) fail("emitter_intensity must be non-negative");
    if (!(cfg.shadow_bias_mm >= 0)) fail("shadow_bias_mm must be non-negative");
    if (!(cfg.shadow_steepness > 0)) fail("shadow_steepness must be positive");
    if (!(cfg.softargmax_beta > 0)) fail("softargmax_beta must be positive");
    if (cfg.subpixel_levels < 1) fail("subpixel_levels must be >= 1");
    if (!(cfg.noise_std >= 0)) fail("noise_std must be non-negative");
    if (!std::isfinite(cfg.noise_mean)) fail("noise_mean must be finite");
    if (cfg.supersample < 1) fail("supersample must be >= 1");
    auto [d_min, d_max] = disparity_range(cfg, cfg.z_min_mm, cfg.z_max_mm);
    if (d_min < 0) fail("disparity range has negative lower bound");
    if (d_max >= cfg.width)
        fail("disparity range [" + std::to_string(d_min) + ", " + std::to_string(d_max) +
             "] exceeds image width " + std::to_string(cfg.width));
}

SensorConfig preset(const std::string& name) {
    if (name == "kinect_v1") {
        SensorConfig cfg;
        cfg.width = 640;
        cfg.height = 480;
        cfg.focal_px = 572.41;
        cfg.baseline_mm = 75.0;
        cfg.z_min_mm = 400.0;
        cfg.z_max_mm = 4000.0;
        cfg.block_size = 9;
        cfg.emitter_intensity = 1.5e6;
        cfg.shadow_bias_mm = 5.0;
        cfg.softargmax_beta = 15.0;
        cfg.subpixel_levels = 2;
        return cfg;
    }
    if (name == "matterport_pro2") {
        SensorConfig cfg;
        cfg.width = 1280;
        cfg.height = 1024;
        cfg.focal_px = 1075.43;
        cfg.baseline_mm = 75.0;
        cfg.z_min_mm = 400.0;
        cfg.z_max_mm = 8000.0;
        cfg.block_size = 11;
        cfg.emitter_intensity = 1.5e12;
        cfg.shadow_bias_mm = 1.0;
        cfg.softargmax_beta = 25.0;
        cfg.subpixel_levels = 4;
        return cfg;
    }
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw config_error("unknown preset '" + name + "' (known: " + known + ")");
}

std::vector<std::string> preset_names() { return {"kinect_v1", "matterport_pro2"}; }

std::pair<int, int> disparity_range(const SensorConfig& cfg, double z_lower, double z_upper) {
    if (!(z_lower > 0) || !(z_upper > 0) || z_lower > z_upper)
        throw config_error("disparity_range: empty or non-positive depth interval");
    if (z_lower < cfg.z_min_mm || z_upper > cfg.z_max_mm)
        throw config_error("disparity_range: bounds outside the configured working range");
    double fb = cfg.focal_px * cfg.baseline_mm;
    int d_min = static_cast<int>(std::lround(fb / z_upper));
    int d_max = static_cast<int>(std::lround(fb / z_lower));
    if (d_min > d_max) throw config_error("disparity_range: empty range");
    return {d_min, d_max};
}

std::pair<int, int> disparity_range(const SensorConfig& cfg) {
    return disparity_range(cfg, cfg.z_min_mm, cfg.z_max_mm);
}

namespace {

struct Field {
    std::function<std::string(const SensorConfig&)> get;
    std::function<void(SensorConfig&, std::string_view)> set;
};

// std::map keeps serialization order alphabetical and stable.
const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = [] {
        std::map<std::string, Field> f;
        auto add_int = [&](const std::string& key, int SensorConfig::* mem) {
            f[key] = {[mem](const SensorConfig& c) { return std::to_string(c.*mem); },
                      [mem, key](SensorConfig& c, std::string_view v) {
                          c.*mem = static_cast<int>(parse_int(v, key));
                      }};
        };
        auto add_double = [&](const std::string& key, double SensorConfig::* mem) {
            f[key] = {[mem](const SensorConfig& c) { return format_double(c.*mem); },
                      [mem, key](SensorConfig& c, std::string_view v) {
                          c.*mem = parse_double(v, key);
                      }};
        };
        add_int("width", &SensorConfig::width);
        add_int("height", &SensorConfig::height);
        add_double("focal_px", &SensorConfig::focal_px);
        add_double("baseline_mm", &SensorConfig::baseline_mm);
        add_double("z_min_mm", &SensorConfig::z_min_mm);
        add_double("z_max_mm", &SensorConfig::z_max_mm);
        add_int("block_size", &SensorConfig::block_size);
        add_double("emitter_intensity", &SensorConfig::emitter_intensity);
        add_double("shadow_bias_mm", &SensorConfig::shadow_bias_mm);
        add_double("shadow_steepness", &SensorConfig::shadow_steepness);
        add_double("softargmax_beta", &SensorConfig::softargmax_beta);
        add_int("subpixel_levels", &SensorConfig::subpixel_levels);
        add_double("noise_mean", &SensorConfig::noise_mean);
        add_double("noise_std", &SensorConfig::noise_std);
        add_int("supersample", &SensorConfig::supersample);
        return f;
    }();
    return table;
}

} // namespace

SensorConfig read_config(const std::string& path, const SensorConfig& base) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file '" + path + "'");
    SensorConfig cfg = base;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        size_t eq = sv.find('=');
        if (eq == std::string_view::npos)
            throw config_error(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        std::string key(trim(sv.substr(0, eq)));
        std::string_view value = trim(sv.substr(eq + 1));
        auto it = fields().find(key);
        if (it == fields().end())
            throw config_error(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        it->second.set(cfg, value);
    }
    return cfg;
}

void write_config(const SensorConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write config file '" + path + "'");
    for (const auto& [key, field] : fields()) out << key << " = " << field.get(cfg) << "\n";
    if (!out) throw io_error("error while writing '" + path + "'");
}

} // namespace slsim
