#include "pdg/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "pdg/errors.hpp"
#include "pdg/quaternion.hpp"

namespace pdg {

namespace {

using nlohmann::json;

constexpr double kDeg = M_PI / 180.0;

// Accessor that records which keys were read and rejects the rest.
class Section {
  public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError("config: section '" + name_ + "' must be an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("config: bad value for " + name_ + "." + key + ": " + e.what());
        }
    }

    Vec3 get_vec3(const std::string& key, const Vec3& fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        const auto v = j_.at(key);
        if (!v.is_array() || v.size() != 3) {
            throw ConfigError("config: " + name_ + "." + key + " must be a 3-array");
        }
        return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
    }

    Vec4 get_vec4(const std::string& key, const Vec4& fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        const auto v = j_.at(key);
        if (!v.is_array() || v.size() != 4) {
            throw ConfigError("config: " + name_ + "." + key + " must be a 4-array");
        }
        return Vec4(v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>());
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (seen_.find(key) == seen_.end()) {
                throw ConfigError("config: unknown key '" + name_ + "." + key + "'");
            }
        }
    }

  private:
    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path.string());
    json root;
    try {
        is >> root;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: document root must be an object");

    RunConfig cfg;
    const std::set<std::string> known_sections{"vehicle",        "bounds", "mission",
                                               "discretization", "scp",    "dataset",
                                               "train",          "mc",     "paths"};
    for (const auto& [key, value] : root.items()) {
        if (known_sections.find(key) == known_sections.end()) {
            throw ConfigError("config: unknown section '" + key + "'");
        }
    }
    const json empty = json::object();
    const auto section = [&](const char* name) -> const json& {
        return root.contains(name) ? root.at(name) : empty;
    };

    {
        Section s(section("vehicle"), "vehicle");
        cfg.vehicle.g0 = s.get("g0_m_s2", 9.81);
        cfg.vehicle.isp = s.get("isp_s", 282.0);
        cfg.vehicle.p_atm = s.get("p_atm_pa", 0.0);
        cfg.vehicle.s_ne = s.get("s_ne_m2", 0.0);
        cfg.vehicle.rho = s.get("rho_kg_m3", 1.225);
        cfg.vehicle.s_a = s.get("s_a_m2", 10.0);
        cfg.vehicle.c_a = s.get_vec3("c_a_diag", Vec3(3.0, 3.0, 1.0)).asDiagonal();
        cfg.vehicle.j_b = s.get_vec3("j_b_diag_kg_m2", Vec3(4e6, 4e6, 1e5)).asDiagonal();
        cfg.vehicle.d_t = s.get_vec3("d_t_m", Vec3(0.0, 0.0, -14.0));
        cfg.vehicle.d_a = s.get_vec3("d_a_m", Vec3(0.0, 0.0, 2.0));
        cfg.vehicle.g_vec = s.get_vec3("g_vec_m_s2", Vec3(0.0, 0.0, -9.81));
        const std::string frame = s.get<std::string>("aero_frame", "inertial");
        if (frame == "inertial") {
            cfg.vehicle.aero_frame = AeroFrame::inertial;
        } else if (frame == "body") {
            cfg.vehicle.aero_frame = AeroFrame::body;
        } else {
            throw ConfigError("config: vehicle.aero_frame must be 'inertial' or 'body'");
        }
        s.finish();
        try {
            cfg.vehicle.update_derived();
            cfg.vehicle.validate();
        } catch (const Error& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    {
        Section s(section("bounds"), "bounds");
        cfg.bounds.m_min = s.get("m_min_kg", 22000.0);
        cfg.bounds.t_min = s.get("t_min_newton", 320000.0);
        cfg.bounds.t_max = s.get("t_max_newton", 800000.0);
        cfg.bounds.gamma_c = s.get("gamma_c_deg", 20.0) * kDeg;
        cfg.bounds.theta_max = s.get("theta_max_deg", 80.0) * kDeg;
        cfg.bounds.omega_max = s.get("omega_max_deg_s", 30.0) * kDeg;
        cfg.bounds.vartheta_max = s.get("vartheta_max_deg", 20.0) * kDeg;
        cfg.bounds.t_b0 = s.get_vec3("t_b0_newton", Vec3(0.0, 0.0, cfg.bounds.t_min));
        s.finish();
        try {
            cfg.bounds.validate();
        } catch (const Error& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    {
        Section s(section("mission"), "mission");
        cfg.mission.x0.m = s.get("m0_kg", 30000.0);
        cfg.mission.x0.r = s.get_vec3("r0_m", Vec3(0.0, 0.0, 1500.0));
        cfg.mission.x0.v = s.get_vec3("v0_m_s", Vec3(0.0, 0.0, -80.0));
        cfg.mission.x0.w = s.get_vec3("w0_deg_s", Vec3::Zero()) * kDeg;
        const std::string convention = s.get<std::string>("quat_convention", "scalar_first");
        const bool has_q0 = s.has("q0");
        const bool has_euler = s.has("q0_euler_deg");
        if (has_q0 && has_euler) {
            throw ConfigError("config: give mission.q0 or mission.q0_euler_deg, not both");
        }
        if (has_euler) {
            cfg.mission.x0.q = quat_from_euler(s.get_vec3("q0_euler_deg", Vec3::Zero()) * kDeg);
        } else {
            Vec4 q = s.get_vec4("q0", quat_identity());
            if (convention == "scalar_last") {
                q = Vec4(q(3), q(0), q(1), q(2));
            } else if (convention != "scalar_first") {
                throw ConfigError(
                    "config: mission.quat_convention must be 'scalar_first' or 'scalar_last'");
            }
            const double norm = q.norm();
            if (std::abs(norm - 1.0) > 1e-6) {
                throw ConfigError("config: mission.q0 must be a unit quaternion");
            }
            cfg.mission.x0.q = q / norm;
        }
        s.finish();
        if (cfg.mission.x0.m < cfg.bounds.m_min) {
            throw ConfigError("config: mission.m0_kg is below bounds.m_min_kg");
        }
    }
    {
        Section s(section("discretization"), "discretization");
        cfg.disc.n_nodes = s.get("n_nodes", 30);
        cfg.disc.n_substeps = s.get("n_substeps", 10);
        s.finish();
        if (cfg.disc.n_nodes < 2) throw ConfigError("config: discretization.n_nodes must be >= 2");
        if (cfg.disc.n_substeps < 1) {
            throw ConfigError("config: discretization.n_substeps must be >= 1");
        }
    }
    {
        Section s(section("scp"), "scp");
        cfg.scp.weights.w_tr = s.get("w_tr", 0.5);
        cfg.scp.weights.w_vc = s.get("w_vc", 1e5);
        cfg.scp.weights.tf_step_max = s.get("tf_step_max_s", 2.0);
        cfg.scp.eps_tr = s.get("eps_tr", 5e-4);
        cfg.scp.eps_vc = s.get("eps_vc", 5e-4);
        cfg.scp.eps_x = s.get("eps_x", 1e-2);
        cfg.scp.max_iters = s.get("max_iters", 20);
        cfg.scp.tf_guess = s.get("tf_guess_s", 18.0);
        const std::string mode = s.get<std::string>("criteria_mode", "online");
        if (mode == "online") {
            cfg.scp.criteria_mode = CriteriaMode::online;
        } else if (mode == "dataset") {
            cfg.scp.criteria_mode = CriteriaMode::dataset;
        } else {
            throw ConfigError("config: scp.criteria_mode must be 'online' or 'dataset'");
        }
        s.finish();
        if (cfg.scp.eps_tr <= 0 || cfg.scp.eps_vc <= 0 || cfg.scp.eps_x <= 0) {
            throw ConfigError("config: scp tolerances must be positive");
        }
        if (cfg.scp.max_iters < 1) throw ConfigError("config: scp.max_iters must be >= 1");
        if (cfg.scp.tf_guess <= 0) throw ConfigError("config: scp.tf_guess_s must be positive");
        if (cfg.scp.weights.w_tr <= 0 || cfg.scp.weights.w_vc <= 0) {
            throw ConfigError("config: scp weights must be positive");
        }
    }
    {
        Section s(section("dataset"), "dataset");
        cfg.dataset_count = s.get("count", 2000);
        cfg.split_fraction = s.get("split_fraction", 0.93);
        cfg.dataset_seed = s.get<std::uint64_t>("seed", 1);
        cfg.ranges.dr = s.get_vec3("dr_m", Vec3(500.0, 500.0, 0.0));
        cfg.ranges.dv = s.get_vec3("dv_m_s", Vec3(40.0, 40.0, 20.0));
        cfg.ranges.d_euler_deg = s.get_vec3("d_euler_deg", Vec3(30.0, 30.0, 0.0));
        cfg.ranges.dw_deg = s.get_vec3("dw_deg_s", Vec3(20.0, 20.0, 0.0));
        cfg.ranges.dm = s.get("dm_kg", 0.0);
        s.finish();
        if (cfg.dataset_count < 1) throw ConfigError("config: dataset.count must be positive");
        if (cfg.split_fraction <= 0.0 || cfg.split_fraction >= 1.0) {
            throw ConfigError("config: dataset.split_fraction must lie in (0, 1)");
        }
    }
    {
        Section s(section("train"), "train");
        cfg.train.learning_rate = s.get("learning_rate", 1e-4);
        cfg.train.batch_size = s.get("batch_size", 128);
        cfg.train.epochs = s.get("epochs", 800);
        cfg.train.weight_decay = s.get("weight_decay", 1e-5);
        cfg.train.plateau_patience = s.get("plateau_patience_epochs", 25);
        cfg.train.lr_decay_factor = s.get("lr_decay_factor", 10.0);
        cfg.train.lr_min = s.get("lr_min", 1e-6);
        cfg.train.seed = s.get<std::uint64_t>("seed", 42);
        cfg.train.hidden_layers = s.get("hidden_layers", 5);
        cfg.train.hidden_units = s.get("hidden_units", 256);
        s.finish();
        if (cfg.train.learning_rate <= 0 || cfg.train.batch_size < 1 || cfg.train.epochs < 1 ||
            cfg.train.weight_decay < 0 || cfg.train.lr_min <= 0 ||
            cfg.train.lr_min > cfg.train.learning_rate) {
            throw ConfigError("config: invalid train section");
        }
    }
    {
        Section s(section("mc"), "mc");
        cfg.mc.n_cases = s.get("n_cases", 1000);
        cfg.mc.seed = s.get<std::uint64_t>("seed", 7);
        cfg.mc.propagate_substeps = s.get("propagate_substeps", 30);
        s.finish();
        if (cfg.mc.n_cases < 1) throw ConfigError("config: mc.n_cases must be positive");
    }
    {
        Section s(section("paths"), "paths");
        cfg.output_dir = s.get<std::string>("output_dir", "out");
        cfg.model_file = s.get<std::string>("model_file", cfg.output_dir + "/model.bin");
        cfg.dataset_prefix = s.get<std::string>("dataset_prefix", cfg.output_dir + "/dataset");
        s.finish();
    }

    char hash[20];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a(root.dump())));
    cfg.config_hash = hash;
    return cfg;
}

}  // namespace pdg
