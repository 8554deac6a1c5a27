#include "mfg/config.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace mfg {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct KeyMap {
  std::map<std::string, std::string> kv;

  bool has(const std::string& k) const { return kv.count(k) > 0; }
  std::string get(const std::string& k) const {
    auto it = kv.find(k);
    if (it == kv.end()) throw ConfigError("missing config key: " + k);
    return it->second;
  }
  double num(const std::string& k) const {
    std::string v = get(k);
    try {
      size_t pos;
      double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("config key " + k + ": not a number: " + v);
    }
  }
  double num_or(const std::string& k, double dflt) { return has(k) ? num(k) : dflt; }
  int integer(const std::string& k) const {
    double d = num(k);
    int i = static_cast<int>(d);
    if (i != d) throw ConfigError("config key " + k + ": not an integer");
    return i;
  }
  int integer_or(const std::string& k, int dflt) { return has(k) ? integer(k) : dflt; }
};

Potential::Kind potential_kind(const std::string& key, const std::string& v) {
  if (v == "zero") return Potential::Kind::Zero;
  if (v == "half_square") return Potential::Kind::HalfSquare;
  if (v == "cosine") return Potential::Kind::Cosine;
  if (v == "bump") return Potential::Kind::Bump;
  throw ConfigError("config key " + key + ": unknown potential kind: " + v);
}

std::string potential_name(Potential::Kind k) {
  switch (k) {
    case Potential::Kind::Zero: return "zero";
    case Potential::Kind::HalfSquare: return "half_square";
    case Potential::Kind::Cosine: return "cosine";
    case Potential::Kind::Bump: return "bump";
  }
  return "zero";
}

Coupling parse_coupling(KeyMap& m, const std::string& prefix) {
  Coupling c;
  if (m.has(prefix + ".potential"))
    c.potential.kind = potential_kind(prefix + ".potential", m.get(prefix + ".potential"));
  c.potential.amp = m.num_or(prefix + ".potential_amp", 1.0);
  c.potential.freq = m.num_or(prefix + ".potential_freq", 1.0);
  c.strength = m.num_or(prefix + ".strength", 0.0);
  c.mollifier.eps = m.num_or(prefix + ".mollifier_radius", 1.0);
  if (c.strength < 0) throw ConfigError("config key " + prefix + ".strength: must be >= 0");
  if (c.mollifier.eps <= 0)
    throw ConfigError("config key " + prefix + ".mollifier_radius: must be > 0");
  return c;
}

Vec2 parse_point(const std::string& key, const std::string& v) {
  std::string s = v;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  double a, b;
  if (!(in >> a >> b)) throw ConfigError("config key " + key + ": expected two numbers");
  return {a, b};
}

}  // namespace

ParsedConfig parse_config_text(const std::string& text) {
  KeyMap m;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string k = trim(s.substr(0, eq)), v = trim(s.substr(eq + 1));
    if (k.empty() || v.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
    if (m.kv.count(k)) throw ConfigError("duplicate config key: " + k);
    m.kv[k] = v;
  }

  ParsedConfig cfg;
  ProblemSpec& spec = cfg.spec;
  std::string hk = m.get("h.kind");
  if (hk == "sine")
    spec.h = DegeneracyProfile::sine();
  else if (hk == "sigmoid")
    spec.h = DegeneracyProfile::sigmoid();
  else if (hk == "constant")
    spec.h = DegeneracyProfile::constant(m.num_or("h.param", 1.0));
  else
    throw ConfigError("config key h.kind: unknown kind: " + hk);

  spec.F = parse_coupling(m, "F");
  spec.G = parse_coupling(m, "G");
  spec.m0.center = parse_point("m0.center", m.get("m0.center"));
  spec.m0.radius = m.num("m0.radius");
  spec.T = m.num("T");
  spec.box = Box{m.num("box.x1_min"), m.num("box.x1_max"), m.num("box.x2_min"),
                 m.num("box.x2_max")};
  spec.A_max = m.num("A_max");

  SolverSettings& st = cfg.settings;
  st.n1 = m.integer("grid.n1");
  st.n2 = m.integer("grid.n2");
  st.n_steps = m.integer("time.n_steps");
  st.n_radial = m.integer_or("controls.n_radial", 8);
  st.n_angular = m.integer_or("controls.n_angular", 32);
  st.n_particles = m.integer_or("particles.n", 200);
  st.seed = m.integer_or("seed", 0);

  try {
    spec.validate();
    Grid g = st.make_grid(spec.box);
    TimeGrid tg = st.make_time_grid(spec.T);
    if (tg.dt > g.h1 / spec.A_max * (1.0 + 1e-12))
      throw std::invalid_argument(
          "time step exceeds h1/A_max: raise time.n_steps or grid spacing");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config invariant violated: ") + e.what());
  }

  // canonical key set: every recognized key with its effective value
  auto put = [&](const std::string& k, const std::string& v) { cfg.keys[k] = v; };
  put("h.kind", hk);
  put("h.param", fmt_g17(spec.h.param));
  for (const auto* pc : {&spec.F, &spec.G}) {
    std::string p = (pc == &spec.F) ? "F" : "G";
    put(p + ".potential", potential_name(pc->potential.kind));
    put(p + ".potential_amp", fmt_g17(pc->potential.amp));
    put(p + ".potential_freq", fmt_g17(pc->potential.freq));
    put(p + ".strength", fmt_g17(pc->strength));
    put(p + ".mollifier_radius", fmt_g17(pc->mollifier.eps));
  }
  put("m0.center", fmt_g17(spec.m0.center.x()) + " " + fmt_g17(spec.m0.center.y()));
  put("m0.radius", fmt_g17(spec.m0.radius));
  put("T", fmt_g17(spec.T));
  put("box.x1_min", fmt_g17(spec.box.x1_min));
  put("box.x1_max", fmt_g17(spec.box.x1_max));
  put("box.x2_min", fmt_g17(spec.box.x2_min));
  put("box.x2_max", fmt_g17(spec.box.x2_max));
  put("A_max", fmt_g17(spec.A_max));
  put("grid.n1", std::to_string(st.n1));
  put("grid.n2", std::to_string(st.n2));
  put("time.n_steps", std::to_string(st.n_steps));
  put("controls.n_radial", std::to_string(st.n_radial));
  put("controls.n_angular", std::to_string(st.n_angular));
  put("particles.n", std::to_string(st.n_particles));
  put("seed", std::to_string(st.seed));
  return cfg;
}

ParsedConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string canonical_config(const ParsedConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : cfg.keys) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t config_hash(const ParsedConfig& cfg) {
  std::string c = canonical_config(cfg);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : c) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

void write_manifest(const std::string& path, const RunManifest& m) {
  nlohmann::json j;
  j["subcommand"] = m.subcommand;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["wall_seconds"] = m.wall_seconds;
  j["outputs"] = m.outputs;
  j["invariants"] = m.invariants;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << "\n";
}

namespace {

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Csv read_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  Csv out;
  std::string line;
  if (!std::getline(in, line)) return out;
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) out.header.push_back(cell);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream rs(line);
    while (std::getline(rs, cell, ',')) row.push_back(std::stod(cell));
    out.rows.push_back(std::move(row));
  }
  return out;
}

int column(const Csv& c, const std::string& name) {
  for (size_t i = 0; i < c.header.size(); ++i)
    if (c.header[i] == name) return static_cast<int>(i);
  return -1;
}

}  // namespace

InvariantReport check_invariants(const std::string& run_dir) {
  namespace fs = std::filesystem;
  InvariantReport rep;
  std::vector<fs::path> csvs;
  for (const auto& e : fs::directory_iterator(run_dir))
    if (e.path().extension() == ".csv") csvs.push_back(e.path());
  if (csvs.empty()) throw std::runtime_error("check_invariants: no outputs in " + run_dir);
  std::sort(csvs.begin(), csvs.end());

  for (const auto& p : csvs) {
    Csv c = read_csv(p);
    double worst = 0;
    bool finite = true;
    for (const auto& row : c.rows)
      for (double v : row)
        if (!std::isfinite(v)) finite = false;
    rep.rows.push_back({"finite:" + p.filename().string(), finite, worst, 0.0});

    std::string name = p.filename().string();
    int wc = column(c, "weight");
    if (name.rfind("m_t", 0) == 0 && wc >= 0) {
      double mass = 0;
      for (const auto& row : c.rows) mass += row[wc];
      double err = std::abs(mass - 1.0);
      rep.rows.push_back({"mass:" + name, err <= 1e-12, err, 1e-12});
    }
    int mc = column(c, "mass");
    if (mc >= 0)
      for (const auto& row : c.rows) {
        double err = std::abs(row[mc] - 1.0);
        if (err > worst) worst = err;
      }
    if (mc >= 0) rep.rows.push_back({"mass_column:" + name, worst <= 1e-8, worst, 1e-8});
    int rc = column(c, "residual");
    if (name == "fixpoint_log.csv" && rc >= 0 && c.rows.size() > 1) {
      bool mono = true;
      double worst_ratio = 0;
      for (size_t i = 1; i < c.rows.size(); ++i) {
        double prev = c.rows[i - 1][rc], cur = c.rows[i][rc];
        if (prev > 0) worst_ratio = std::max(worst_ratio, cur / prev);
        if (cur > prev * 1.05) mono = false;
      }
      rep.rows.push_back({"residual_non_increasing:" + name, mono, worst_ratio, 1.05});
    }
  }
  return rep;
}

void write_invariant_report(const std::string& path, const InvariantReport& rep) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "invariant,pass,measured,tolerance\n";
  for (const auto& r : rep.rows)
    out << r.name << ',' << (r.pass ? 1 : 0) << ',' << fmt_g17(r.measured) << ','
        << fmt_g17(r.tolerance) << '\n';
}

}  // namespace mfg
