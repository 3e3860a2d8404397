#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "stefanhomog/catalog.hpp"
#include "stefanhomog/cell_problem.hpp"
#include "stefanhomog/common.hpp"
#include "stefanhomog/convex.hpp"
#include "stefanhomog/diagnostics.hpp"
#include "stefanhomog/oscillatory.hpp"
#include "stefanhomog/stefan_solver.hpp"

namespace homog {

using nlohmann::json;

struct Tolerances {
  double tol_nl = 1e-8;
  double cg = 1e-12;
  double cell = 1e-10;
  double psi0 = 1e-8;
  double hminus1 = 1e-10;
  double contraction_slack = 1e-8;
  double apriori_slack = 1e-6;
};

// Everything a run needs, parsed from a single JSON config.
struct ProblemSpec {
  // domain / time
  int dim = 1;
  int N = 128;
  double T = 0.1;
  double dt = 1e-3;
  int grid_factor = 16;  // N(eps) = grid_factor / eps in studies
  std::vector<double> eps_list{0.125, 0.0625, 0.03125, 0.015625};
  // cell problem
  int cell_M = 1024;
  long rational_Q = 64;
  // potential
  ConvexPotential potential = ConvexPotential::quadratic(1.0);
  // flux: linear tensor form K(z) [h(u)], or a dissipation potential
  bool flux_linear = true;
  MatrixField flux_tensor = MatrixField::constant(1, Mat::identity(1), 1.0, 1.0);
  bool flux_modulated = false;
  ScalarFunction flux_modulation{ScalarKind::Constant, 1.0};
  bool has_dissipation = false;
  DissipationPotential dissipation =
      DissipationPotential::quadratic(MatrixField::constant(1, Mat::identity(1), 1.0, 1.0));
  // source f = factor(z) * nonlinearity(u) + offset(x)
  bool has_source = false;
  OscillatoryField source_factor = OscillatoryField::constant(1, 0.0);
  ScalarFunction source_nonlinearity{ScalarKind::Constant, 1.0};
  SlowProfile source_offset{ProfileKind::Constant, 0.0, 0.0};
  // initial enthalpy w0(z, x) = factor(z) * profile(x)
  OscillatoryField initial_factor = OscillatoryField::constant(1, 1.0);
  SlowProfile initial_profile{ProfileKind::SinePi, 1.0, 0.0};

  Tolerances tol;
  std::uint64_t seed = 12345;

  std::string canonical;    // canonical serialized form
  std::string config_hash;  // FNV-1a of the canonical form, hex
};

// ---------------------------------------------------------------------------
// JSON <-> domain objects

namespace cfg {

inline ScalarFunction parse_scalar(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("name"))
    throw std::invalid_argument(where + ": expected {name, param}");
  return make_scalar(j.at("name").get<std::string>(), j.value("param", 1.0));
}

inline json dump_scalar(const ScalarFunction& f) {
  return json{{"name", scalar_name(f)}, {"param", f.param}};
}

inline SlowProfile parse_profile(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("profile"))
    throw std::invalid_argument(where + ": expected {profile, amplitude, offset}");
  return make_profile(j.at("profile").get<std::string>(), j.value("amplitude", 1.0),
                      j.value("offset", 0.0));
}

inline json dump_profile(const SlowProfile& p) {
  return json{{"profile", profile_name(p)},
              {"amplitude", p.amplitude},
              {"offset", p.offset}};
}

inline OscillatoryField parse_field(const json& j, int dim, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected field object");
  double c = j.value("constant", 0.0);
  std::vector<Mode> modes;
  if (j.contains("modes")) {
    int k = 0;
    for (const json& m : j.at("modes")) {
      Mode mode;
      mode.amplitude = m.value("amplitude", 1.0);
      mode.phase = m.value("phase", 0.0);
      std::string wf = m.value("waveform", std::string("sine"));
      if (wf != "sine" && wf != "cosine")
        throw std::invalid_argument(where + ": waveform must be sine or cosine");
      mode.cosine = (wf == "cosine");
      const json& fr = m.at("frequency");
      if (!fr.is_array() || int(fr.size()) != dim)
        throw std::invalid_argument(where + ": frequency of mode " +
                                    std::to_string(k) + " must have " +
                                    std::to_string(dim) + " entries");
      mode.frequency[0] = fr[0].get<double>();
      if (dim > 1) mode.frequency[1] = fr[1].get<double>();
      if (norm(mode.frequency, dim) == 0.0)
        throw std::invalid_argument(where + ": mode " + std::to_string(k) +
                                    " has zero frequency");
      modes.push_back(mode);
      ++k;
    }
  }
  return OscillatoryField(dim, c, std::move(modes));
}

inline json dump_field(const OscillatoryField& f) {
  json modes = json::array();
  for (const Mode& m : f.modes()) {
    json fr = json::array({m.frequency[0]});
    if (f.dimension() > 1) fr.push_back(m.frequency[1]);
    modes.push_back(json{{"amplitude", m.amplitude},
                         {"frequency", fr},
                         {"phase", m.phase},
                         {"waveform", m.cosine ? "cosine" : "sine"}});
  }
  return json{{"constant", f.constant_term()}, {"modes", modes}};
}

inline MatrixField parse_tensor(const json& j, int dim, const std::string& where) {
  double k0 = j.value("k0", 1.0), k1 = j.value("k1", 1.0);
  if (j.contains("isotropic"))
    return MatrixField::isotropic(parse_field(j.at("isotropic"), dim, where + ".isotropic"),
                                  k0, k1);
  if (j.contains("entries")) {
    const json& e = j.at("entries");
    if (!e.is_array() || int(e.size()) != dim * dim)
      throw std::invalid_argument(where + ": entries must list dim*dim fields row-major");
    std::vector<OscillatoryField> fields;
    for (int k = 0; k < dim * dim; ++k)
      fields.push_back(parse_field(e[k], dim, where + ".entries[" + std::to_string(k) + "]"));
    return MatrixField(dim, std::move(fields), k0, k1);
  }
  throw std::invalid_argument(where + ": tensor needs isotropic or entries");
}

inline json dump_tensor(const MatrixField& K) {
  json e = json::array();
  for (int i = 0; i < K.dimension(); ++i)
    for (int j2 = 0; j2 < K.dimension(); ++j2) e.push_back(dump_field(K.entry(i, j2)));
  return json{{"entries", e}, {"k0", K.lower_bound()}, {"k1", K.upper_bound()}};
}

inline ConvexPotential parse_potential(const json& j, int dim) {
  if (!j.is_object() || !j.contains("kind"))
    throw std::invalid_argument("potential: expected object with kind");
  std::string kind = j.at("kind").get<std::string>();
  ConvexPotential p = ConvexPotential::quadratic(1.0);
  if (kind == "quadratic") {
    p = ConvexPotential::quadratic(j.value("a", 1.0));
  } else if (kind == "stefan") {
    p = ConvexPotential::stefan(j.value("latent", 1.0));
  } else if (kind == "kirchhoff") {
    ConvexPotential base = parse_potential(j.at("base"), dim);
    if (base.has_oscillation())
      throw std::invalid_argument("potential: Kirchhoff base must be oscillation-free");
    KirchhoffMap map(parse_scalar(j.at("density"), "potential.density"));
    p = ConvexPotential::kirchhoff_of(base, map);
  } else if (kind == "tabulated") {
    std::vector<double> bp = j.at("breakpoints").get<std::vector<double>>();
    std::vector<double> sl = j.at("slopes").get<std::vector<double>>();
    p = ConvexPotential::tabulated(std::move(bp), std::move(sl));
  } else {
    throw std::invalid_argument("potential: unknown kind " + kind);
  }
  if (j.contains("oscillation"))
    p = p.with_oscillation(parse_field(j.at("oscillation"), dim, "potential.oscillation"));
  return p;
}

inline json dump_potential(const ConvexPotential& p) {
  json j;
  switch (p.kind()) {
    case ConvexPotential::Kind::Quadratic:
      j["kind"] = "quadratic";
      j["a"] = p.quadratic_coeff();
      break;
    case ConvexPotential::Kind::Stefan:
      j["kind"] = "stefan";
      j["latent"] = p.latent_heat();
      break;
    case ConvexPotential::Kind::Kirchhoff:
      j["kind"] = "kirchhoff";
      j["base"] = dump_potential(p.base_potential());
      j["density"] = dump_scalar(p.kirchhoff_map().h());
      break;
    case ConvexPotential::Kind::Tabulated:
      j["kind"] = "tabulated";
      // knots/slopes are not exposed; round-trip through subdiff sampling is
      // avoided by keeping the raw arrays in the spec (see parse_config)
      break;
  }
  if (p.has_oscillation()) j["oscillation"] = dump_field(p.oscillation());
  return j;
}

}  // namespace cfg

// The tabulated kind keeps its raw arrays out of ConvexPotential's public
// surface, so the spec also stores the parsed JSON of the potential for
// serialization round trips.
struct ParsedConfig {
  ProblemSpec spec;
  json raw_potential;
};

inline ProblemSpec parse_config_json(const json& root) {
  if (!root.is_object()) throw std::invalid_argument("config root must be an object");
  ProblemSpec s;
  const json& dom = root.contains("domain") ? root.at("domain") : json::object();
  s.dim = dom.value("dim", 1);
  if (s.dim < 1 || s.dim > 2) throw std::invalid_argument("domain.dim must be 1 or 2");
  s.N = dom.value("N", 128);
  s.T = dom.value("T", 0.1);
  s.dt = dom.value("dt", 1e-3);
  s.grid_factor = dom.value("grid_factor", 16);
  if (!(s.T > 0.0) || !(s.dt > 0.0))
    throw std::invalid_argument("domain.T and domain.dt must be positive");

  if (root.contains("eps")) {
    s.eps_list = root.at("eps").get<std::vector<double>>();
    for (double e : s.eps_list)
      if (!(e > 0.0)) throw std::invalid_argument("eps values must be positive");
  }
  const json& cell = root.contains("cell") ? root.at("cell") : json::object();
  s.cell_M = cell.value("M", 1024);
  s.rational_Q = cell.value("Q", 64L);

  if (root.contains("potential")) s.potential = cfg::parse_potential(root.at("potential"), s.dim);

  const json& flux = root.contains("flux") ? root.at("flux") : json::object();
  std::string form = flux.value("form", std::string("linear"));
  if (form == "linear") {
    s.flux_linear = true;
    if (flux.contains("tensor"))
      s.flux_tensor = cfg::parse_tensor(flux.at("tensor"), s.dim, "flux.tensor");
    else
      s.flux_tensor = MatrixField::constant(s.dim, Mat::identity(s.dim), 1.0, 1.0);
    if (flux.contains("modulation")) {
      s.flux_modulated = true;
      s.flux_modulation = cfg::parse_scalar(flux.at("modulation"), "flux.modulation");
    }
  } else if (form == "dissipation") {
    s.flux_linear = false;
    s.has_dissipation = true;
    const json& d = flux.at("dissipation");
    std::string dk = d.value("kind", std::string("quadratic"));
    if (dk == "quadratic") {
      s.dissipation = DissipationPotential::quadratic(
          cfg::parse_tensor(d.at("tensor"), s.dim, "flux.dissipation.tensor"));
    } else if (dk == "power") {
      s.dissipation = DissipationPotential::power(
          cfg::parse_field(d.at("coefficient"), s.dim, "flux.dissipation.coefficient"),
          d.value("exponent", 2.0));
    } else {
      throw std::invalid_argument("flux.dissipation.kind must be quadratic or power");
    }
  } else {
    throw std::invalid_argument("flux.form must be linear or dissipation");
  }

  if (root.contains("source")) {
    const json& f = root.at("source");
    s.has_source = true;
    if (f.contains("factor"))
      s.source_factor = cfg::parse_field(f.at("factor"), s.dim, "source.factor");
    else
      s.source_factor = OscillatoryField::constant(s.dim, 1.0);
    if (f.contains("nonlinearity"))
      s.source_nonlinearity = cfg::parse_scalar(f.at("nonlinearity"), "source.nonlinearity");
    if (f.contains("offset")) s.source_offset = cfg::parse_profile(f.at("offset"), "source.offset");
  }

  if (root.contains("initial")) {
    const json& w = root.at("initial");
    if (w.contains("factor"))
      s.initial_factor = cfg::parse_field(w.at("factor"), s.dim, "initial.factor");
    else
      s.initial_factor = OscillatoryField::constant(s.dim, 1.0);
    if (w.contains("profile"))
      s.initial_profile = cfg::parse_profile(w.at("profile"), "initial.profile");
  } else {
    s.initial_factor = OscillatoryField::constant(s.dim, 1.0);
  }

  if (root.contains("tolerances")) {
    const json& t = root.at("tolerances");
    s.tol.tol_nl = t.value("tol_nl", s.tol.tol_nl);
    s.tol.cg = t.value("cg", s.tol.cg);
    s.tol.cell = t.value("cell", s.tol.cell);
    s.tol.psi0 = t.value("psi0", s.tol.psi0);
    s.tol.hminus1 = t.value("hminus1", s.tol.hminus1);
    s.tol.contraction_slack = t.value("contraction_slack", s.tol.contraction_slack);
    s.tol.apriori_slack = t.value("apriori_slack", s.tol.apriori_slack);
    for (double v : {s.tol.tol_nl, s.tol.cg, s.tol.cell, s.tol.psi0, s.tol.hminus1,
                     s.tol.contraction_slack, s.tol.apriori_slack})
      if (!(v > 0.0)) throw std::invalid_argument("tolerance overrides must be positive");
  }
  s.seed = root.value("seed", std::uint64_t(12345));
  return s;
}

// Canonical form: sorted keys (nlohmann objects are ordered maps), 2-space
// indent, trailing newline.  parse -> serialize is idempotent.
inline json serialize_config_json(const ProblemSpec& s, const json* raw_potential = nullptr) {
  json root;
  root["domain"] = {{"N", s.N},       {"T", s.T},
                    {"dim", s.dim},   {"dt", s.dt},
                    {"grid_factor", s.grid_factor}};
  root["eps"] = s.eps_list;
  root["cell"] = {{"M", s.cell_M}, {"Q", s.rational_Q}};
  root["potential"] = raw_potential ? *raw_potential : cfg::dump_potential(s.potential);
  json flux;
  if (s.flux_linear) {
    flux["form"] = "linear";
    flux["tensor"] = cfg::dump_tensor(s.flux_tensor);
    if (s.flux_modulated) flux["modulation"] = cfg::dump_scalar(s.flux_modulation);
  } else {
    flux["form"] = "dissipation";
    json d;
    if (s.dissipation.kind() == DissipationPotential::Kind::Quadratic) {
      d["kind"] = "quadratic";
      d["tensor"] = cfg::dump_tensor(s.dissipation.matrix());
    } else {
      d["kind"] = "power";
      d["coefficient"] = cfg::dump_field(s.dissipation.coefficient());
      d["exponent"] = s.dissipation.exponent();
    }
    flux["dissipation"] = d;
  }
  root["flux"] = flux;
  if (s.has_source)
    root["source"] = {{"factor", cfg::dump_field(s.source_factor)},
                      {"nonlinearity", cfg::dump_scalar(s.source_nonlinearity)},
                      {"offset", cfg::dump_profile(s.source_offset)}};
  root["initial"] = {{"factor", cfg::dump_field(s.initial_factor)},
                     {"profile", cfg::dump_profile(s.initial_profile)}};
  root["tolerances"] = {{"apriori_slack", s.tol.apriori_slack},
                        {"cell", s.tol.cell},
                        {"cg", s.tol.cg},
                        {"contraction_slack", s.tol.contraction_slack},
                        {"hminus1", s.tol.hminus1},
                        {"psi0", s.tol.psi0},
                        {"tol_nl", s.tol.tol_nl}};
  root["seed"] = s.seed;
  return root;
}

inline std::string serialize_config(const ProblemSpec& s,
                                    const json* raw_potential = nullptr) {
  return serialize_config_json(s, raw_potential).dump(2) + "\n";
}

inline ProblemSpec parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  ProblemSpec s = parse_config_json(root);
  const json* rawpot = nullptr;
  json pot;
  if (root.contains("potential") &&
      root.at("potential").value("kind", std::string()) == "tabulated") {
    pot = root.at("potential");
    rawpot = &pot;
  }
  s.canonical = serialize_config(s, rawpot);
  s.config_hash = hash_hex(fnv1a(s.canonical));
  return s;
}

inline ProblemSpec parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Builders tying the spec to the numerical modules

inline StudySetup make_study(const ProblemSpec& s) {
  if (!s.flux_linear)
    throw std::invalid_argument("convergence study requires a linear flux tensor");
  StudySetup st;
  st.dim = s.dim;
  st.psi = s.potential;
  st.flux = s.flux_tensor;
  st.modulated = s.flux_modulated;
  st.modulation = s.flux_modulation;
  st.has_source = s.has_source;
  st.source_factor = s.source_factor;
  st.source_nonlinearity = s.source_nonlinearity;
  st.source_offset = s.source_offset;
  st.w0_factor = s.initial_factor;
  st.w0_profile = s.initial_profile;
  st.T = s.T;
  st.dt = s.dt;
  st.eps_list = s.eps_list;
  st.grid_factor = s.grid_factor;
  st.cell_M = s.cell_M;
  return st;
}

inline EvolutionProblem make_evolution_problem(const ProblemSpec& s, double eps,
                                               bool homogenized, int N,
                                               const Mat& K0) {
  if (!s.flux_linear)
    throw std::invalid_argument("evolution solver requires a linear flux tensor");
  Grid g = Grid::domain(s.dim, N);
  EvolutionProblem P;
  P.grid = g;
  P.eps = eps;
  P.homogenized = homogenized;
  P.flux = s.flux_tensor;
  P.K0 = K0;
  P.modulated = s.flux_modulated;
  P.modulation = s.flux_modulation;
  P.psi = homogenized ? s.potential.averaged() : s.potential;
  P.has_source = s.has_source;
  P.source_factor = homogenized
                        ? OscillatoryField::constant(s.dim, s.source_factor.mean())
                        : s.source_factor;
  P.source_nonlinearity = s.source_nonlinearity;
  P.source_offset = s.source_offset;
  P.w0 = detail::sample_initial(g, s.initial_factor, s.initial_profile, eps, homogenized);
  P.T = s.T;
  P.dt = s.dt;
  P.tol_nl_factor = s.tol.tol_nl;
  P.cg_tol = s.tol.cg;
  return P;
}

// Averaged data + effective tensor of the linear case (Eq. 6.6) or the psi0
// evaluator inputs of the general case.
inline EffectiveModel build_effective_model(const ProblemSpec& s, const Grid& cell) {
  EffectiveModel m;
  m.dim = s.dim;
  m.psi_bar = s.potential.averaged();
  m.has_source = s.has_source;
  m.source_mean_factor = s.has_source ? s.source_factor.mean() : 0.0;
  m.source_nonlinearity = s.source_nonlinearity;
  m.source_offset = s.source_offset;
  m.w0_mean_factor = s.initial_factor.mean();
  m.w0_profile = s.initial_profile;
  m.cell_length = {cell.length(0), s.dim > 1 ? cell.length(1) : 1.0};
  if (s.flux_linear) {
    CorrectorSet corr = solve_corrector(cell, s.flux_tensor, 0.0, s.tol.cell);
    m.K0_base = effective_tensor(cell, s.flux_tensor, corr);
    m.corrector_residuals = corr.residuals;
    m.has_modulation = s.flux_modulated;
    m.modulation = s.flux_modulation;
  }
  return m;
}

}  // namespace homog
