#include "config.hpp"

#include "mapest/errors.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mapest::cli {

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) field_error(path + key, "missing");
  return j.at(key);
}

double get_number(const json& j, const std::string& key, const std::string& path, std::optional<double> dflt = {}) {
  if (!j.contains(key)) {
    if (dflt) return *dflt;
    field_error(path + key, "missing");
  }
  const json& v = j.at(key);
  if (!v.is_number()) field_error(path + key, "expected a number");
  return v.get<double>();
}

int get_int(const json& j, const std::string& key, const std::string& path, std::optional<int> dflt = {}) {
  if (!j.contains(key)) {
    if (dflt) return *dflt;
    field_error(path + key, "missing");
  }
  const json& v = j.at(key);
  if (!v.is_number_integer()) field_error(path + key, "expected an integer");
  return v.get<int>();
}

std::string get_string(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_string()) field_error(path + key, "expected a string");
  return v.get<std::string>();
}

Manifold manifold_at(const json& j, const std::string& path) {
  if (!j.is_object()) field_error(path.empty() ? "manifold" : path, "expected an object");
  std::string kind = get_string(j, "kind", path);
  try {
    if (kind == "circle") return Manifold::circle(get_number(j, "radius", path, 1.0));
    if (kind == "sphere") return Manifold::sphere(get_number(j, "radius", path, 1.0));
    if (kind == "flat_torus") {
      double r1 = 1, r2 = 1;
      if (j.contains("radii")) {
        const json& r = j.at("radii");
        if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
          field_error(path + "radii", "expected two numbers");
        r1 = r[0].get<double>();
        r2 = r[1].get<double>();
      }
      return Manifold::flat_torus(r1, r2);
    }
    if (kind == "torus_of_revolution")
      return Manifold::torus_of_revolution(get_number(j, "major", path), get_number(j, "minor", path));
    if (kind == "product") {
      const json& f = require(j, "factors", path);
      if (!f.is_array()) field_error(path + "factors", "expected an array");
      std::vector<Manifold> fs;
      for (std::size_t i = 0; i < f.size(); ++i)
        fs.push_back(manifold_at(f[i], path + "factors[" + std::to_string(i) + "]."));
      return Manifold::product(fs);
    }
  } catch (const DomainError& e) {
    field_error(path + "kind", e.what());
  }
  field_error(path + "kind", "unknown manifold kind '" + kind + "'");
}

std::vector<double> number_list(const json& j, const std::string& key) {
  const json& v = j.at(key);
  if (!v.is_array() || v.empty()) field_error(key, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) field_error(key, "expected a non-empty array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

}  // namespace

Manifold manifold_from_json(const json& j) { return manifold_at(j, "manifold."); }

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1 + std::count(text.begin(), text.begin() + std::min(e.byte, text.size()), '\n');
    throw ConfigError("config parse error at line " + std::to_string(line) + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> known{"manifold", "map",       "prior",     "weight",
                                              "epsilons", "samples",   "resolution", "quadrature_resolution",
                                              "estimators", "seed",    "output",    "points"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) field_error(it.key(), "unknown field");

  ExperimentConfig c;
  c.raw = j;
  c.manifold = manifold_at(require(j, "manifold", ""), "manifold.");
  c.map_spec = j.contains("map") ? j.at("map") : json{{"kind", "identity"}};
  if (!c.map_spec.is_object()) field_error("map", "expected an object");
  get_string(c.map_spec, "kind", "map.");

  if (!j.contains("seed")) field_error("seed", "missing (a master seed is mandatory)");
  if (!j.at("seed").is_number_integer()) field_error("seed", "expected an integer");
  if (!j.at("seed").is_number_unsigned()) field_error("seed", "must be nonnegative");
  c.seed = j.at("seed").get<std::uint64_t>();

  if (j.contains("prior")) {
    const json& p = j.at("prior");
    if (!p.is_object()) field_error("prior", "expected an object");
    std::string kind = get_string(p, "kind", "prior.");
    if (kind == "uniform") {
      c.prior = PriorSource::uniform;
    } else if (kind == "grid_file") {
      c.prior = PriorSource::grid_file;
      std::filesystem::path fp = get_string(p, "path", "prior.");
      if (fp.is_relative()) fp = std::filesystem::path(base_dir) / fp;
      if (!std::filesystem::exists(fp)) field_error("prior.path", "file not found: " + fp.string());
      c.prior_path = fp.string();
    } else if (kind == "solve_optimal") {
      c.prior = PriorSource::solve_optimal;
    } else if (kind == "cosine") {
      c.prior = PriorSource::cosine;
      c.prior_amplitude = get_number(p, "amplitude", "prior.");
      c.prior_axis = get_int(p, "axis", "prior.", 0);
      if (std::abs(c.prior_amplitude) >= 1) field_error("prior.amplitude", "must lie in (-1, 1)");
    } else {
      field_error("prior.kind", "unknown prior kind '" + kind + "'");
    }
  }
  if (j.contains("weight")) {
    const json& w = j.at("weight");
    if (!w.is_object()) field_error("weight", "expected an object");
    std::string kind = get_string(w, "kind", "weight.");
    if (kind == "constant") {
      c.weight_amplitude = 0.0;
    } else if (kind == "cosine") {
      c.weight_amplitude = get_number(w, "amplitude", "weight.");
      c.weight_axis = get_int(w, "axis", "weight.", 0);
      if (std::abs(*c.weight_amplitude) >= 1) field_error("weight.amplitude", "must lie in (-1, 1)");
    } else {
      field_error("weight.kind", "unknown weight kind '" + kind + "'");
    }
  }
  if (j.contains("epsilons")) {
    c.epsilons = number_list(j, "epsilons");
    for (double e : c.epsilons)
      if (!(e > 0)) field_error("epsilons", "values must be positive");
  }
  if (j.contains("samples")) {
    if (!j.at("samples").is_number_integer() || j.at("samples").get<long long>() < 1000)
      field_error("samples", "expected an integer >= 1000");
    c.samples = j.at("samples").get<std::size_t>();
  }
  if (j.contains("resolution")) {
    const json& r = j.at("resolution");
    if (r.is_number_integer()) {
      int n = r.get<int>();
      c.resolution.clear();
      if (n < 8) field_error("resolution", "must be >= 8");
      c.resolution.push_back(n);
    } else if (r.is_array()) {
      for (const auto& e : r) {
        if (!e.is_number_integer() || e.get<int>() < 8) field_error("resolution", "entries must be integers >= 8");
        c.resolution.push_back(e.get<int>());
      }
      if (int(c.resolution.size()) != c.manifold.dim()) field_error("resolution", "one entry per manifold axis");
    } else {
      field_error("resolution", "expected an integer or an array");
    }
  }
  if (c.resolution.empty()) c.resolution.push_back(c.manifold.dim() == 1 ? 256 : 48);
  c.quadrature_resolution = get_int(j, "quadrature_resolution", "", 512);
  if (c.quadrature_resolution < 8) field_error("quadrature_resolution", "must be >= 8");
  if (j.contains("estimators")) {
    const json& e = j.at("estimators");
    if (!e.is_array()) field_error("estimators", "expected an array");
    c.estimators.clear();
    for (const auto& s : e) {
      if (!s.is_string()) field_error("estimators", "expected strings");
      std::string k = s.get<std::string>();
      if (k != "plugin" && k != "second_order" && k != "exact_euclidean")
        field_error("estimators", "unknown estimator '" + k + "'");
      c.estimators.push_back(k);
    }
  }
  if (j.contains("output")) c.output_dir = get_string(j, "output", "");
  if (j.contains("points")) {
    std::filesystem::path fp = get_string(j, "points", "");
    if (fp.is_relative()) fp = std::filesystem::path(base_dir) / fp;
    if (!std::filesystem::exists(fp)) field_error("points", "file not found: " + fp.string());
    c.points_path = fp.string();
  }
  // validates the map against the manifold
  map_from_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::path(path).parent_path().string());
}

std::string config_hash(const json& config) {
  std::string body = config.dump();
  std::string blob = "blob " + std::to_string(body.size()) + std::string(1, '\0') + body;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

MapDescriptor map_from_config(const ExperimentConfig& c) {
  const json& m = c.map_spec;
  std::string kind = m.at("kind").get<std::string>();
  try {
    if (kind == "identity") return MapDescriptor::identity(c.manifold);
    if (kind == "inclusion") return MapDescriptor::inclusion(c.manifold);
    if (kind == "circle_power") return MapDescriptor::circle_power(c.manifold, get_int(m, "power", "map."));
    if (kind == "torus_to_circle") return MapDescriptor::torus_to_circle(c.manifold, get_int(m, "factor", "map.", 0));
    if (kind == "great_circle_into_sphere") return MapDescriptor::great_circle_into_sphere(c.manifold);
    if (kind == "constant") {
      if (!m.contains("value") || !m.at("value").is_array()) field_error("map.value", "expected an array");
      std::vector<double> v;
      for (const auto& e : m.at("value")) {
        if (!e.is_number()) field_error("map.value", "expected numbers");
        v.push_back(e.get<double>());
      }
      Vec vv = Eigen::Map<Vec>(v.data(), Eigen::Index(v.size()));
      Manifold target = m.contains("codomain") ? manifold_at(m.at("codomain"), "map.codomain.") : c.manifold;
      return MapDescriptor::constant(c.manifold, make_point(target, vv));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    field_error("map.kind", e.what());
  }
  field_error("map.kind", "unknown map kind '" + kind + "'");
}

QuadratureGrid grid_from_config(const ExperimentConfig& c) {
  if (c.resolution.size() == 1) return build_grid(c.manifold, c.resolution.front());
  return build_grid(c.manifold, c.resolution);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace mapest::cli
