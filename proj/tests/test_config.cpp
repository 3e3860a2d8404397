#include <doctest.h>

#include <string>

#include "stefanhomog/config.hpp"
#include "stefanhomog/hypotheses.hpp"

using namespace homog;

namespace {

const char* kStefanConfig = R"({
  "domain": {"dim": 1, "N": 128, "T": 0.25, "dt": 0.0078125, "grid_factor": 16},
  "eps": [0.125, 0.0625],
  "cell": {"M": 64, "Q": 8},
  "potential": {"kind": "stefan", "latent": 1.0},
  "flux": {
    "form": "linear",
    "tensor": {
      "isotropic": {
        "constant": 2.0,
        "modes": [
          {"amplitude": 1.0, "frequency": [6.2831853071795862], "phase": 0.0, "waveform": "sine"}
        ]
      },
      "k0": 1.0,
      "k1": 3.0
    }
  },
  "initial": {
    "factor": {"constant": 1.0, "modes": []},
    "profile": {"profile": "sine", "amplitude": 2.0, "offset": -0.5}
  },
  "seed": 12345
})";

}  // namespace

TEST_CASE("defaults fill every omitted section") {
  ProblemSpec s = parse_config_text("{}");
  CHECK(s.dim == 1);
  CHECK(s.N == 128);
  CHECK(s.T == 0.1);
  CHECK(s.dt == 1e-3);
  CHECK(s.cell_M == 1024);
  CHECK(s.rational_Q == 64);
  CHECK(s.flux_linear);
  CHECK(!s.flux_modulated);
  CHECK(!s.has_source);
  CHECK(s.potential.kind() == ConvexPotential::Kind::Quadratic);
  CHECK(s.tol.tol_nl == 1e-8);
  CHECK(s.seed == 12345);
  CHECK(!s.canonical.empty());
  CHECK(s.config_hash.size() == 16);
}

TEST_CASE("a full spec parses into the right domain objects") {
  ProblemSpec s = parse_config_text(kStefanConfig);
  CHECK(s.potential.kind() == ConvexPotential::Kind::Stefan);
  CHECK(s.potential.latent_heat() == 1.0);
  CHECK(s.flux_tensor.entry(0, 0).constant_term() == 2.0);
  CHECK(s.flux_tensor.lower_bound() == 1.0);
  CHECK(s.flux_tensor.upper_bound() == 3.0);
  CHECK(s.eps_list.size() == 2);
  CHECK(s.initial_profile.amplitude == 2.0);
  CHECK(s.initial_profile.offset == -0.5);
  CHECK(s.dt == doctest::Approx(1.0 / 128.0));
}

TEST_CASE("malformed configs fail with a usage error") {
  CHECK_THROWS_AS(parse_config_text("not json"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text(R"({"domain": {"dim": 3}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text(R"({"domain": {"dt": -1.0}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text(R"({"eps": [0.5, 0.0]})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text(R"({"potential": {"kind": "exotic"}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text(R"({"flux": {"form": "magic"}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text(R"({"tolerances": {"cg": 0.0}})"),
                  std::invalid_argument);
  // zero-frequency oscillation mode
  CHECK_THROWS_AS(parse_config_text(R"({
    "initial": {"factor": {"constant": 1.0,
      "modes": [{"amplitude": 1.0, "frequency": [0.0]}]}}
  })"),
                  std::invalid_argument);
  // frequency dimension mismatch
  CHECK_THROWS_AS(parse_config_text(R"({
    "domain": {"dim": 2},
    "initial": {"factor": {"constant": 1.0,
      "modes": [{"amplitude": 1.0, "frequency": [1.0]}]}}
  })"),
                  std::invalid_argument);
}

TEST_CASE("serialization is canonical and idempotent") {
  ProblemSpec s1 = parse_config_text(kStefanConfig);
  ProblemSpec s2 = parse_config_text(s1.canonical);
  // parse -> serialize is a projection: applying it twice is the identity
  CHECK(s1.canonical == s2.canonical);
  CHECK(s1.config_hash == s2.config_hash);
  // keys come out sorted (std::map-backed objects)
  CHECK(s1.canonical.rfind("{\n  \"cell\"", 0) == 0);
  CHECK(s1.canonical.back() == '\n');
  // the hash is the FNV-1a of the canonical text
  CHECK(s1.config_hash == hash_hex(fnv1a(s1.canonical)));
  // reparsing the identical text is deterministic
  ProblemSpec s3 = parse_config_text(kStefanConfig);
  CHECK(s3.canonical == s1.canonical);
  // a changed seed changes the canonical form and the hash
  ProblemSpec s4 = parse_config_text(R"({"seed": 99})");
  ProblemSpec s5 = parse_config_text("{}");
  CHECK(s4.config_hash != s5.config_hash);
}

TEST_CASE("tabulated and kirchhoff potentials round trip") {
  const char* text = R"({
    "potential": {"kind": "tabulated", "breakpoints": [-1.0, 0.0, 1.0],
                  "slopes": [-1.0, 0.5, 2.0]}
  })";
  ProblemSpec s = parse_config_text(text);
  CHECK(s.potential.kind() == ConvexPotential::Kind::Tabulated);
  CHECK(s.potential.subdiff_base(0.0).lo == doctest::Approx(0.5));
  // raw arrays survive the canonical form
  ProblemSpec s2 = parse_config_text(s.canonical);
  CHECK(s2.potential.subdiff_base(1.0).lo == doctest::Approx(2.0));
  CHECK(s2.canonical == s.canonical);

  const char* ktext = R"({
    "potential": {"kind": "kirchhoff",
                  "base": {"kind": "quadratic", "a": 1.0},
                  "density": {"name": "power", "param": 2.0}}
  })";
  ProblemSpec ks = parse_config_text(ktext);
  CHECK(ks.potential.kind() == ConvexPotential::Kind::Kirchhoff);
  CHECK(ks.potential.beta_base(2.0) == doctest::Approx(4.0));
  ProblemSpec ks2 = parse_config_text(ks.canonical);
  CHECK(ks2.canonical == ks.canonical);
}

TEST_CASE("dissipation flux form parses into the potential") {
  const char* text = R"({
    "flux": {"form": "dissipation",
             "dissipation": {"kind": "power",
                             "coefficient": {"constant": 1.5, "modes": []},
                             "exponent": 4.0}}
  })";
  ProblemSpec s = parse_config_text(text);
  CHECK(!s.flux_linear);
  CHECK(s.has_dissipation);
  CHECK(s.dissipation.kind() == DissipationPotential::Kind::Power);
  CHECK(s.dissipation.exponent() == 4.0);
  // studies and evolutions require the linear form
  CHECK_THROWS_AS(make_study(s), std::invalid_argument);
  CHECK_THROWS_AS(make_evolution_problem(s, 0.125, false, 32, Mat::identity(1)),
                  std::invalid_argument);
  ProblemSpec s2 = parse_config_text(s.canonical);
  CHECK(s2.canonical == s.canonical);
}

TEST_CASE("builders wire the spec into the numerical modules") {
  ProblemSpec s = parse_config_text(kStefanConfig);
  StudySetup st = make_study(s);
  CHECK(st.dim == 1);
  CHECK(st.eps_list.size() == 2);
  CHECK(st.cell_M == 64);

  EvolutionProblem P = make_evolution_problem(s, 0.125, false, 128, Mat::identity(1));
  CHECK(P.grid.cells(0) == 128);
  CHECK(P.eps == 0.125);
  CHECK(!P.homogenized);
  CHECK(P.w0.size() == 129);

  Grid cell = Grid::cell(1, s.cell_M);
  EffectiveModel m = build_effective_model(s, cell);
  CHECK(m.K0_base(0, 0) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-6));
  CHECK(m.corrector_residuals.size() == 1);
  CHECK(m.corrector_residuals[0] < 1e-8);
}

TEST_CASE("hypothesis validation passes the admissible catalog") {
  ProblemSpec s = parse_config_text(kStefanConfig);
  ValidationReport rep = validate_hypotheses(s);
  CHECK(rep.all_pass());
  const ConditionResult* a3 = rep.find("alpha3_coercivity");
  REQUIRE(a3 != nullptr);
  CHECK(a3->constant == doctest::Approx(1.0));
  REQUIRE(rep.find("Psi2_strict_convexity") != nullptr);
  CHECK(rep.conditions.size() == 8);
}

TEST_CASE("hypothesis validation rejects superlinear sources") {
  const char* text = R"({
    "source": {"factor": {"constant": 1.0, "modes": []},
               "nonlinearity": {"name": "power", "param": 2.0}}
  })";
  ProblemSpec s = parse_config_text(text);
  ValidationReport rep = validate_hypotheses(s);
  const ConditionResult* f3 = rep.find("f3_source_growth");
  REQUIRE(f3 != nullptr);
  CHECK(!f3->pass);
  CHECK(!f3->witness.empty());
  CHECK(!rep.all_pass());

  // sublinear (Hoelder) sources pass
  const char* ok = R"({
    "source": {"factor": {"constant": 1.0, "modes": []},
               "nonlinearity": {"name": "holder", "param": 0.5}}
  })";
  CHECK(validate_hypotheses(parse_config_text(ok)).all_pass());
}

TEST_CASE("modulated fluxes degrade the coercivity constant to zero") {
  const char* text = R"({
    "flux": {"form": "linear",
             "tensor": {"isotropic": {"constant": 2.0, "modes": []},
                        "k0": 1.0, "k1": 3.0},
             "modulation": {"name": "power", "param": 2.0}}
  })";
  ProblemSpec s = parse_config_text(text);
  CHECK(s.flux_modulated);
  ValidationReport rep = validate_hypotheses(s);
  const ConditionResult* a3 = rep.find("alpha3_coercivity");
  REQUIRE(a3 != nullptr);
  CHECK(a3->constant == 0.0);
  CHECK(a3->pass);
  CHECK(rep.all_pass());
}
