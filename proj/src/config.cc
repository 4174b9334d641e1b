#include "delaystab/config.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

#include "delaystab/error.h"

namespace delaystab {
namespace {

std::string Trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> Split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(Trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

// Local parse failure; the caller attaches the line number.
struct BadValue {
  std::string message;
};

double ParseNumber(const std::string& text) {
  const std::string s = Trim(text);
  if (s.empty()) throw BadValue{"expected a number"};
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw BadValue{"not a number: '" + s + "'"};
  if (!std::isfinite(v)) throw BadValue{"non-finite number: '" + s + "'"};
  return v;
}

int ParseInt(const std::string& text) {
  const double v = ParseNumber(text);
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw BadValue{"expected an integer: '" + Trim(text) + "'"};
  }
  return static_cast<int>(v);
}

bool ParseBool(const std::string& text) {
  std::string s = Trim(text);
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  if (s == "true" || s == "on" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "off" || s == "no" || s == "0") return false;
  throw BadValue{"expected a boolean: '" + s + "'"};
}

std::vector<double> ParseList(const std::string& text) {
  std::vector<double> out;
  for (const std::string& item : Split(text, ',')) out.push_back(ParseNumber(item));
  return out;
}

MatrixXd ParseMatrixValue(const std::string& text) {
  std::vector<std::vector<double>> rows;
  for (const std::string& row : Split(text, ';')) {
    if (row.empty()) throw BadValue{"empty matrix row"};
    rows.push_back(ParseList(row));
  }
  if (rows.empty()) throw BadValue{"empty matrix"};
  MatrixXd m(rows.size(), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw BadValue{"ragged matrix rows"};
    for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

using Setter = std::function<void(ScenarioConfig&, const std::string&)>;

const std::map<std::string, Setter>& Registry() {
  static const std::map<std::string, Setter> registry = {
      {"model.kind", [](ScenarioConfig& c, const std::string& v) {
         c.model.kind = Trim(v);
       }},
      {"model.generator", [](ScenarioConfig& c, const std::string& v) {
         c.model.generator = ParseMatrixValue(v);
       }},
      {"model.input", [](ScenarioConfig& c, const std::string& v) {
         c.model.input_map = ParseMatrixValue(v);
       }},
      {"model.length", [](ScenarioConfig& c, const std::string& v) {
         c.model.length = ParseNumber(v);
       }},
      {"model.intervals", [](ScenarioConfig& c, const std::string& v) {
         c.model.intervals = ParseInt(v);
       }},
      {"model.diffusion", [](ScenarioConfig& c, const std::string& v) {
         c.model.diffusion = ParseNumber(v);
       }},
      {"model.drift", [](ScenarioConfig& c, const std::string& v) {
         c.model.drift = ParseNumber(v);
       }},
      {"model.reaction", [](ScenarioConfig& c, const std::string& v) {
         c.model.reaction = ParseNumber(v);
       }},
      {"model.control_window", [](ScenarioConfig& c, const std::string& v) {
         const auto w = ParseList(v);
         if (w.size() != 2) throw BadValue{"control_window needs two values"};
         c.model.control_a = w[0];
         c.model.control_b = w[1];
       }},
      {"model.control_shapes", [](ScenarioConfig& c, const std::string& v) {
         c.model.control_shapes = ParseInt(v);
       }},
      {"model.shift", [](ScenarioConfig& c, const std::string& v) {
         c.model.shift = ParseNumber(v);
       }},
      {"model.nonlinearity", [](ScenarioConfig& c, const std::string& v) {
         c.model.nonlinearity = Trim(v);
       }},
      {"design.sigma", [](ScenarioConfig& c, const std::string& v) {
         c.design.sigma = ParseNumber(v);
       }},
      {"design.tau", [](ScenarioConfig& c, const std::string& v) {
         c.design.tau = ParseNumber(v);
       }},
      {"design.sigma_star", [](ScenarioConfig& c, const std::string& v) {
         c.design.sigma_star = ParseNumber(v);
       }},
      {"design.svd_tol", [](ScenarioConfig& c, const std::string& v) {
         c.design.svd_tol = ParseNumber(v);
       }},
      {"design.cluster_tol", [](ScenarioConfig& c, const std::string& v) {
         c.design.cluster_tol = ParseNumber(v);
       }},
      {"design.kernel_rel_tol", [](ScenarioConfig& c, const std::string& v) {
         c.design.kernel_rel_tol = ParseNumber(v);
       }},
      {"design.diagnostic_static_feedback",
       [](ScenarioConfig& c, const std::string& v) {
         c.design.diagnostic_static_feedback = ParseBool(v);
       }},
      {"design.placement", [](ScenarioConfig& c, const std::string& v) {
         c.design.placement = ParseNumber(v);
       }},
      {"design.gain", [](ScenarioConfig& c, const std::string& v) {
         c.design.gain = ParseMatrixValue(v);
       }},
      {"simulation.horizon", [](ScenarioConfig& c, const std::string& v) {
         c.simulation.horizon = ParseNumber(v);
       }},
      {"simulation.dt", [](ScenarioConfig& c, const std::string& v) {
         c.simulation.dt = ParseNumber(v);
       }},
      {"simulation.initial", [](ScenarioConfig& c, const std::string& v) {
         c.simulation.initial = Trim(v);
       }},
      {"simulation.amplitude", [](ScenarioConfig& c, const std::string& v) {
         c.simulation.amplitude = ParseNumber(v);
       }},
      {"simulation.forcing", [](ScenarioConfig& c, const std::string& v) {
         c.simulation.forcing = Trim(v);
       }},
      {"simulation.window", [](ScenarioConfig& c, const std::string& v) {
         const auto w = ParseList(v);
         if (w.size() != 2) throw BadValue{"window needs two values"};
         c.simulation.window_lo = w[0];
         c.simulation.window_hi = w[1];
       }},
      {"simulation.feedback", [](ScenarioConfig& c, const std::string& v) {
         c.simulation.feedback = ParseBool(v);
       }},
      {"simulation.picard", [](ScenarioConfig& c, const std::string& v) {
         c.simulation.picard = ParseBool(v);
       }},
      {"output.directory", [](ScenarioConfig& c, const std::string& v) {
         c.output.directory = Trim(v);
       }},
      {"output.plots", [](ScenarioConfig& c, const std::string& v) {
         c.output.plots = ParseBool(v);
       }},
      {"output.kernel_stride", [](ScenarioConfig& c, const std::string& v) {
         c.output.kernel_stride = ParseInt(v);
       }},
  };
  return registry;
}

const std::set<std::string> kSections = {"model", "design", "simulation",
                                         "output", "sweep"};

bool Divides(double step, double length) {
  const double r = length / step;
  return std::round(r) >= 1.0 &&
         std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r);
}

std::string SpecHead(const std::string& spec) {
  return spec.substr(0, spec.find(':'));
}

void Validate(const ScenarioConfig& c, std::vector<std::string>& errors) {
  const auto& m = c.model;
  const std::set<std::string> kinds = {"abstract", "distributed_1d",
                                       "boundary_1d", "semilinear_1d"};
  if (!kinds.count(m.kind)) errors.push_back("unknown model kind '" + m.kind + "'");
  if (m.kind == "abstract") {
    if (m.generator.size() == 0) errors.push_back("abstract model needs a generator");
    if (m.input_map.size() == 0) errors.push_back("abstract model needs an input");
  } else {
    if (m.intervals < 16) errors.push_back("intervals must be at least 16");
    if (!(m.length > 0)) errors.push_back("length must be positive");
    if (!(m.diffusion > 0)) errors.push_back("diffusion must be positive");
    if (m.kind != "boundary_1d") {
      if (!(0 <= m.control_a && m.control_a < m.control_b &&
            m.control_b <= m.length)) {
        errors.push_back("control window must satisfy 0 <= a < b <= length");
      }
      if (m.control_shapes < 1) errors.push_back("control_shapes must be >= 1");
    }
  }
  if (m.kind == "semilinear_1d" && m.nonlinearity != "cubic" &&
      m.nonlinearity != "burgers") {
    errors.push_back("nonlinearity must be cubic or burgers");
  }

  const auto& d = c.design;
  if (d.tau < 0 || (d.tau == 0 && !d.diagnostic_static_feedback)) {
    errors.push_back("delay must be positive");
  }
  if (d.sigma < 0) errors.push_back("sigma must be non-negative");
  if (d.sigma_star && !(*d.sigma_star > d.sigma)) {
    errors.push_back("sigma_star must exceed sigma");
  }
  if (!(d.svd_tol > 0)) errors.push_back("svd_tol must be positive");
  if (!(d.kernel_rel_tol > 0)) errors.push_back("kernel_rel_tol must be positive");
  if (d.placement && d.gain) errors.push_back("placement and gain are exclusive");

  const auto& s = c.simulation;
  if (!(s.dt > 0)) {
    errors.push_back("dt must be positive");
  } else {
    if (d.tau > 0 && !Divides(s.dt, d.tau)) errors.push_back("dt must divide tau");
    if (s.horizon > 0 && !Divides(s.dt, s.horizon)) {
      errors.push_back("dt must divide the horizon");
    }
  }
  if (!(s.horizon > 0)) errors.push_back("horizon must be positive");
  if (s.horizon < 2 * d.tau) errors.push_back("horizon must be at least 2 tau");
  if (s.window_lo) {
    if (!(*s.window_lo >= 2 * d.tau && *s.window_lo < *s.window_hi &&
          *s.window_hi <= s.horizon)) {
      errors.push_back("window must lie inside (2 tau, horizon]");
    }
  }
  const std::set<std::string> heads = {"eigenmode", "bump", "file", "vector"};
  if (!heads.count(SpecHead(s.initial))) {
    errors.push_back("initial must be eigenmode:k, bump:x0,width, file:path or vector:...");
  }
  if (s.forcing != "none" && SpecHead(s.forcing) != "exp") {
    errors.push_back("forcing must be none or exp:rate,amplitude");
  }
  if (m.kind == "semilinear_1d" && s.forcing != "none") {
    errors.push_back("forcing is not supported for semilinear_1d");
  }
  if (s.picard && m.kind != "semilinear_1d") {
    errors.push_back("picard needs a semilinear_1d model");
  }
  if (c.output.kernel_stride < 0) errors.push_back("kernel_stride must be >= 0");
  for (const auto& axis : c.sweep) {
    if (!Registry().count(axis.key)) {
      errors.push_back("sweep axis '" + axis.key + "' is not a known key");
    }
  }
}

}  // namespace

double ScenarioConfig::window_lo() const {
  if (simulation.window_lo) return *simulation.window_lo;
  return std::max(2.0 * design.tau, 0.5 * simulation.horizon);
}

double ScenarioConfig::window_hi() const {
  return simulation.window_hi.value_or(simulation.horizon);
}

MatrixXd ParseMatrix(const std::string& text) {
  try {
    return ParseMatrixValue(text);
  } catch (const BadValue& e) {
    throw Error(ErrorClass::kConfig, e.message);
  }
}

ScenarioConfig ParseConfig(
    const std::string& text,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  ScenarioConfig c;
  c.source_text = text;
  std::vector<std::string> errors;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  std::set<std::string> seen;
  auto assign = [&](const std::string& key, const std::string& value,
                    const std::string& where) {
    if (section == "sweep") {
      SweepAxis axis{key, {}};
      for (const auto& v : Split(value, ',')) {
        if (v.empty()) {
          errors.push_back(where + "empty sweep value");
          return;
        }
        axis.values.push_back(v);
      }
      c.sweep.push_back(axis);
      return;
    }
    const std::string full = section + "." + key;
    const auto it = Registry().find(full);
    if (it == Registry().end()) {
      errors.push_back(where + "unknown key '" + full + "'");
      return;
    }
    try {
      it->second(c, value);
    } catch (const BadValue& e) {
      errors.push_back(where + full + ": " + e.message);
    }
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const std::string line = Trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back(where + "unterminated section header");
        continue;
      }
      section = Trim(line.substr(1, line.size() - 2));
      if (!kSections.count(section)) {
        errors.push_back(where + "unknown section '" + section + "'");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + "expected key = value");
      continue;
    }
    if (section.empty()) {
      errors.push_back(where + "key outside of a section");
      continue;
    }
    if (!kSections.count(section)) continue;
    const std::string key = Trim(line.substr(0, eq));
    if (!seen.insert(section + "." + key).second) {
      errors.push_back(where + "duplicate key '" + section + "." + key + "'");
      continue;
    }
    assign(key, line.substr(eq + 1), where);
  }
  for (const auto& [full, value] : overrides) {
    const auto dot = full.find('.');
    section = full.substr(0, dot);
    assign(dot == std::string::npos ? "" : full.substr(dot + 1), value,
           "override " + full + ": ");
  }
  Validate(c, errors);
  if (!errors.empty()) {
    std::string message = "invalid configuration";
    for (const auto& e : errors) message += "\n  " + e;
    throw Error(ErrorClass::kConfig, message);
  }
  return c;
}

ScenarioConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorClass::kConfig, "cannot read config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  ScenarioConfig c = ParseConfig(buf.str());
  c.base_dir = std::filesystem::path(path).parent_path().string();
  return c;
}

ParabolicModel BuildModel(const ScenarioConfig& config) {
  const auto& m = config.model;
  try {
    if (m.kind == "abstract") {
      const double shift =
          m.shift.value_or(std::max(0.0, SpectralAbscissa(m.generator)) + 1.0);
      return BuildCustomLti(m.generator, m.input_map, shift);
    }
    ConvectionDiffusion1dParams p;
    p.length = m.length;
    p.intervals = m.intervals;
    p.diffusion = m.diffusion;
    const double drift = m.drift;
    const double reaction = m.reaction;
    p.drift = [drift](double) { return drift; };
    p.reaction = [reaction](double) { return reaction; };
    p.shift = m.shift;
    if (m.kind == "boundary_1d") {
      p.control = BoundaryControl{};
    } else {
      p.control = DistributedControl{m.control_a, m.control_b, m.control_shapes};
    }
    ParabolicModel base = BuildConvectionDiffusion1d(p);
    if (m.kind != "semilinear_1d") return base;
    Nonlinearity n = m.nonlinearity == "burgers"
                         ? BurgersNonlinearity(base.spacing)
                         : CubicNonlinearity();
    return BuildSemilinear1d(base, std::move(n));
  } catch (const Error& e) {
    if (e.error_class() == ErrorClass::kModel) {
      throw Error(ErrorClass::kConfig, std::string("model: ") + e.what());
    }
    throw;
  }
}

VectorXd InitialState(const ScenarioConfig& config, const ParabolicModel& model) {
  const std::string& spec = config.simulation.initial;
  const std::string head = SpecHead(spec);
  const std::string body =
      spec.find(':') == std::string::npos ? "" : spec.substr(spec.find(':') + 1);
  const int n = model.state_dim();
  VectorXd z(n);
  try {
    if (head == "eigenmode") {
      const int k = ParseInt(body);
      if (k < 1) throw BadValue{"eigenmode index starts at 1"};
      if (model.is_pde()) {
        for (int i = 0; i < n; ++i) {
          z(i) = std::sin(k * std::numbers::pi * model.grid(i) / model.length);
        }
      } else {
        if (k > n) throw BadValue{"eigenmode index exceeds the state dimension"};
        z = VectorXd::Unit(n, k - 1);
      }
    } else if (head == "bump") {
      if (!model.is_pde()) throw BadValue{"bump needs a 1-D model"};
      const auto p = ParseList(body);
      if (p.size() != 2 || !(p[1] > 0)) throw BadValue{"bump:x0,width"};
      for (int i = 0; i < n; ++i) {
        const double r = (model.grid(i) - p[0]) / p[1];
        z(i) = std::exp(-r * r);
      }
    } else if (head == "file") {
      std::filesystem::path path(body);
      if (path.is_relative() && !config.base_dir.empty()) {
        path = std::filesystem::path(config.base_dir) / path;
      }
      std::ifstream in(path);
      if (!in) throw BadValue{"cannot read '" + path.string() + "'"};
      std::vector<double> values;
      std::string token;
      while (in >> token) {
        for (const auto& item : Split(token, ',')) {
          if (!item.empty()) values.push_back(ParseNumber(item));
        }
      }
      if (static_cast<int>(values.size()) != n) {
        throw BadValue{"file holds " + std::to_string(values.size()) +
                       " values, state dimension is " + std::to_string(n)};
      }
      z = Eigen::Map<VectorXd>(values.data(), n);
    } else {
      const auto values = ParseList(body);
      if (static_cast<int>(values.size()) != n) {
        throw BadValue{"vector length differs from the state dimension"};
      }
      for (int i = 0; i < n; ++i) z(i) = values[i];
    }
  } catch (const BadValue& e) {
    throw Error(ErrorClass::kConfig, "simulation.initial: " + e.message);
  }
  return config.simulation.amplitude * z;
}

Forcing BuildForcing(const ScenarioConfig& config, const ParabolicModel& model) {
  const std::string& spec = config.simulation.forcing;
  if (spec == "none") return Forcing::Zero(model.state_dim());
  std::vector<double> p;
  try {
    p = ParseList(spec.substr(spec.find(':') + 1));
  } catch (const BadValue& e) {
    throw Error(ErrorClass::kConfig, "simulation.forcing: " + e.message);
  }
  if (p.size() != 2) {
    throw Error(ErrorClass::kConfig, "simulation.forcing: exp:rate,amplitude");
  }
  VectorXd profile = InitialState(config, model);
  const double norm = model.Norm(profile);
  if (!(norm > 0)) {
    throw Error(ErrorClass::kConfig, "forcing profile (initial state shape) is zero");
  }
  return Forcing::Decaying(profile / norm, p[0], p[1]);
}

}  // namespace delaystab
