#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "risim/harness.hpp"

#ifndef RISIM_VERSION
#define RISIM_VERSION "0.1.0"
#endif

namespace risim {

const char* version_string() { return RISIM_VERSION; }

Config default_config() { return Config{}; }

namespace {

Matrix3 yaw_rotation(double radians) {
  Matrix3 r = Matrix3::Identity();
  double c = std::cos(radians), s = std::sin(radians);
  r(0, 0) = c;
  r(0, 1) = -s;
  r(1, 0) = s;
  r(1, 1) = c;
  return r;
}

double yaw_of(const Matrix3& r) { return std::atan2(r(1, 0), r(0, 0)); }

double parse_number(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    while (used < value.size() && std::isspace(static_cast<unsigned char>(value[used]))) ++used;
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad numeric value for '" + key + "': " + value);
  }
}

int parse_int(const std::string& key, const std::string& value) {
  double v = parse_number(key, value);
  double r = std::round(v);
  if (std::abs(v - r) > 1e-9)
    throw std::invalid_argument("config: expected integer for '" + key + "'");
  return static_cast<int>(r);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    return std::stoull(value);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad seed value for '" + key + "'");
  }
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

using Setter = std::function<void(Config&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& key_table() {
  auto num = [](auto field) {
    return [field](Config& c, const std::string& k, const std::string& v) {
      field(c) = parse_number(k, v);
    };
  };
  auto integer = [](auto field) {
    return [field](Config& c, const std::string& k, const std::string& v) {
      field(c) = parse_int(k, v);
    };
  };
  static const std::map<std::string, Setter> table = {
      {"l_b_x", num([](Config& c) -> double& { return c.scene.bs_position.x(); })},
      {"l_b_y", num([](Config& c) -> double& { return c.scene.bs_position.y(); })},
      {"l_b_z", num([](Config& c) -> double& { return c.scene.bs_position.z(); })},
      {"l_r_x", num([](Config& c) -> double& { return c.scene.ris_position.x(); })},
      {"l_r_y", num([](Config& c) -> double& { return c.scene.ris_position.y(); })},
      {"l_r_z", num([](Config& c) -> double& { return c.scene.ris_position.z(); })},
      {"m_b_x", integer([](Config& c) -> int& { return c.scene.bs_m_x; })},
      {"m_b_z", integer([](Config& c) -> int& { return c.scene.bs_m_z; })},
      {"m_r_x", integer([](Config& c) -> int& { return c.scene.ris_m_x; })},
      {"m_r_z", integer([](Config& c) -> int& { return c.scene.ris_m_z; })},
      {"d_over_lambda", num([](Config& c) -> double& { return c.scene.spacing_wavelengths; })},
      {"f_c_ghz",
       [](Config& c, const std::string& k, const std::string& v) {
         c.scene.carrier_hz = parse_number(k, v) * 1e9;
       }},
      {"p_b_mw",
       [](Config& c, const std::string& k, const std::string& v) {
         c.scene.bs_power_w = parse_number(k, v) * 1e-3;
       }},
      {"p_u_mw",
       [](Config& c, const std::string& k, const std::string& v) {
         c.scene.ue_power_w = parse_number(k, v) * 1e-3;
       }},
      {"n0_dbm_hz",
       [](Config& c, const std::string& k, const std::string& v) {
         c.scene.noise_density_w_hz = dbm_to_watt(parse_number(k, v));
       }},
      {"noise_figure_db",
       [](Config& c, const std::string& k, const std::string& v) {
         c.scene.noise_figure = db_to_linear(parse_number(k, v));
       }},
      {"bandwidth_hz", num([](Config& c) -> double& { return c.scene.bandwidth_hz; })},
      {"path_loss_exp", num([](Config& c) -> double& { return c.scene.path_loss_exponent; })},
      {"rician_eps_0", num([](Config& c) -> double& { return c.scene.rician_bs_ris; })},
      {"rician_eps_k", num([](Config& c) -> double& { return c.scene.rician_ris_ue; })},
      {"pure_los",
       [](Config& c, const std::string& k, const std::string& v) {
         c.scene.pure_los = parse_int(k, v) != 0;
       }},
      {"tau_p_ms",
       [](Config& c, const std::string& k, const std::string& v) {
         c.scene.sensing_duration_s = parse_number(k, v) * 1e-3;
       }},
      {"tau_c_ms",
       [](Config& c, const std::string& k, const std::string& v) {
         c.scene.block_duration_s = parse_number(k, v) * 1e-3;
       }},
      {"tau_l_s", num([](Config& c) -> double& { return c.scene.interval_duration_s; })},
      {"v_b_yaw_deg",
       [](Config& c, const std::string& k, const std::string& v) {
         c.scene.bs_rotation = yaw_rotation(parse_number(k, v) * kPi / 180.0);
       }},
      {"v_r_yaw_deg",
       [](Config& c, const std::string& k, const std::string& v) {
         c.scene.ris_rotation = yaw_rotation(parse_number(k, v) * kPi / 180.0);
       }},
      {"ue_height", num([](Config& c) -> double& { return c.scene.ue_height; })},
      {"sensing_phase_seed",
       [](Config& c, const std::string& k, const std::string& v) {
         c.scene.sensing_phase_seed = parse_u64(k, v);
       }},
      {"k_ues", integer([](Config& c) -> int& { return c.k_ues; })},
      {"ue_area_x_min", num([](Config& c) -> double& { return c.ue_x_min; })},
      {"ue_area_x_max", num([](Config& c) -> double& { return c.ue_x_max; })},
      {"ue_area_y_min", num([](Config& c) -> double& { return c.ue_y_min; })},
      {"ue_area_y_max", num([](Config& c) -> double& { return c.ue_y_max; })},
      {"eta", num([](Config& c) -> double& { return c.data_fraction; })},
      {"kappa", num([](Config& c) -> double& { return c.kappa; })},
      {"ifft_size", integer([](Config& c) -> int& { return c.ifft_size; })},
      {"mle_grid", integer([](Config& c) -> int& { return c.mle_grid; })},
      {"walk_std_m", num([](Config& c) -> double& { return c.walk_std_m; })},
      {"intervals", integer([](Config& c) -> int& { return c.intervals; })},
      {"ga_population", integer([](Config& c) -> int& { return c.ga.population; })},
      {"ga_elites", integer([](Config& c) -> int& { return c.ga.elites; })},
      {"ga_crossover", integer([](Config& c) -> int& { return c.ga.crossover; })},
      {"ga_mutation", integer([](Config& c) -> int& { return c.ga.mutation; })},
      {"ga_mutation_prob", num([](Config& c) -> double& { return c.ga.mutation_prob; })},
      {"ga_mutation_sigma", num([](Config& c) -> double& { return c.ga.mutation_sigma; })},
      {"ga_tournament", integer([](Config& c) -> int& { return c.ga.tournament; })},
      {"ga_generations", integer([](Config& c) -> int& { return c.ga.generations; })},
      {"ga_stagnation", integer([](Config& c) -> int& { return c.ga.stagnation; })},
      {"sa_temperature", num([](Config& c) -> double& { return c.sa.initial_temperature; })},
      {"sa_cooling", num([](Config& c) -> double& { return c.sa.cooling; })},
      {"sa_step", num([](Config& c) -> double& { return c.sa.step; })},
      {"sa_iterations", integer([](Config& c) -> int& { return c.sa.iterations; })},
  };
  return table;
}

// ue<i>_x / ue<i>_y explicit placement keys.
bool apply_ue_key(Config& config, const std::string& key, const std::string& value) {
  if (key.size() < 5 || key.compare(0, 2, "ue") != 0) return false;
  size_t underscore = key.rfind('_');
  if (underscore == std::string::npos || underscore + 2 != key.size()) return false;
  char axis = key[underscore + 1];
  if (axis != 'x' && axis != 'y') return false;
  std::string idx_text = key.substr(2, underscore - 2);
  if (idx_text.empty()) return false;
  for (char ch : idx_text)
    if (!std::isdigit(static_cast<unsigned char>(ch))) return false;
  int idx = std::stoi(idx_text);
  auto& slot = config.explicit_ues[idx];
  if (axis == 'x')
    slot.first = parse_number(key, value);
  else
    slot.second = parse_number(key, value);
  return true;
}

}  // namespace

Config parse_config_text(const std::string& text) {
  Config config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: missing '=' on line " + std::to_string(line_no));
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto it = key_table().find(key);
    if (it != key_table().end()) {
      it->second(config, key, value);
    } else if (!apply_ue_key(config, key, value)) {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  return config;
}

Config parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::vector<std::pair<std::string, std::string>> config_key_values(const Config& config) {
  const SceneConfig& s = config.scene;
  std::vector<std::pair<std::string, std::string>> kv = {
      {"l_b_x", format_double(s.bs_position.x())},
      {"l_b_y", format_double(s.bs_position.y())},
      {"l_b_z", format_double(s.bs_position.z())},
      {"l_r_x", format_double(s.ris_position.x())},
      {"l_r_y", format_double(s.ris_position.y())},
      {"l_r_z", format_double(s.ris_position.z())},
      {"m_b_x", std::to_string(s.bs_m_x)},
      {"m_b_z", std::to_string(s.bs_m_z)},
      {"m_r_x", std::to_string(s.ris_m_x)},
      {"m_r_z", std::to_string(s.ris_m_z)},
      {"d_over_lambda", format_double(s.spacing_wavelengths)},
      {"f_c_ghz", format_double(s.carrier_hz / 1e9)},
      {"p_b_mw", format_double(s.bs_power_w * 1e3)},
      {"p_u_mw", format_double(s.ue_power_w * 1e3)},
      {"n0_dbm_hz", format_double(10.0 * std::log10(s.noise_density_w_hz) + 30.0)},
      {"noise_figure_db", format_double(10.0 * std::log10(s.noise_figure))},
      {"bandwidth_hz", format_double(s.bandwidth_hz)},
      {"path_loss_exp", format_double(s.path_loss_exponent)},
      {"rician_eps_0", format_double(s.rician_bs_ris)},
      {"rician_eps_k", format_double(s.rician_ris_ue)},
      {"pure_los", s.pure_los ? "1" : "0"},
      {"tau_p_ms", format_double(s.sensing_duration_s * 1e3)},
      {"tau_c_ms", format_double(s.block_duration_s * 1e3)},
      {"tau_l_s", format_double(s.interval_duration_s)},
      {"v_b_yaw_deg", format_double(yaw_of(s.bs_rotation) * 180.0 / kPi)},
      {"v_r_yaw_deg", format_double(yaw_of(s.ris_rotation) * 180.0 / kPi)},
      {"ue_height", format_double(s.ue_height)},
      {"sensing_phase_seed", std::to_string(s.sensing_phase_seed)},
      {"k_ues", std::to_string(config.k_ues)},
      {"ue_area_x_min", format_double(config.ue_x_min)},
      {"ue_area_x_max", format_double(config.ue_x_max)},
      {"ue_area_y_min", format_double(config.ue_y_min)},
      {"ue_area_y_max", format_double(config.ue_y_max)},
      {"eta", format_double(config.data_fraction)},
      {"kappa", format_double(config.kappa)},
      {"ifft_size", std::to_string(config.ifft_size)},
      {"mle_grid", std::to_string(config.mle_grid)},
      {"walk_std_m", format_double(config.walk_std_m)},
      {"intervals", std::to_string(config.intervals)},
      {"ga_population", std::to_string(config.ga.population)},
      {"ga_elites", std::to_string(config.ga.elites)},
      {"ga_crossover", std::to_string(config.ga.crossover)},
      {"ga_mutation", std::to_string(config.ga.mutation)},
      {"ga_mutation_prob", format_double(config.ga.mutation_prob)},
      {"ga_mutation_sigma", format_double(config.ga.mutation_sigma)},
      {"ga_tournament", std::to_string(config.ga.tournament)},
      {"ga_generations", std::to_string(config.ga.generations)},
      {"ga_stagnation", std::to_string(config.ga.stagnation)},
      {"sa_temperature", format_double(config.sa.initial_temperature)},
      {"sa_cooling", format_double(config.sa.cooling)},
      {"sa_step", format_double(config.sa.step)},
      {"sa_iterations", std::to_string(config.sa.iterations)},
  };
  for (const auto& [idx, xy] : config.explicit_ues) {
    kv.emplace_back("ue" + std::to_string(idx) + "_x", format_double(xy.first));
    kv.emplace_back("ue" + std::to_string(idx) + "_y", format_double(xy.second));
  }
  return kv;
}

SceneConfig materialize_scene(const Config& config, std::uint64_t seed) {
  SceneConfig scene = config.scene;
  scene.ue_positions.clear();
  Rng rng(derive_seed(seed, 0x7e5u));
  for (int k = 0; k < config.k_ues; ++k) {
    auto it = config.explicit_ues.find(k);
    if (it != config.explicit_ues.end()) {
      scene.ue_positions.emplace_back(it->second.first, it->second.second, scene.ue_height);
    } else {
      double x = rng.uniform(config.ue_x_min, config.ue_x_max);
      double y = rng.uniform(config.ue_y_min, config.ue_y_max);
      scene.ue_positions.emplace_back(x, y, scene.ue_height);
    }
  }
  scene.validate();
  return scene;
}

}  // namespace risim
