#include "nlmx/runner.hpp"

#include "nlmx/functional.hpp"
#include "nlmx/helmholtz.hpp"
#include "nlmx/io.hpp"
#include "nlmx/nehari.hpp"
#include "nlmx/operators.hpp"
#include "nlmx/reduced.hpp"
#include "nlmx/spectrum.hpp"
#include "nlmx/symmetry.hpp"

#include "CLI11.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace nlmx {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// JSON has no infinities; failed starts carry an infinite residual.
json safe_num(real v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

json vec_json(const VecX& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json base_manifest(const RunConfig& cfg, const std::string& command) {
  json m;
  m["tool"] = kToolName;
  m["version"] = kToolVersion;
  m["command"] = command;
  m["config"] = {{"source", cfg.source}, {"hash", cfg.hash}};
  m["rng_seed"] = cfg.solver.nehari.seed;
  m["threads"] = Eigen::nbThreads();
  return m;
}

json eigen_stage_json(const EigenResult& r) {
  json e;
  e["eigenvalues"] = vec_json(r.lambda);
  e["residuals"] = vec_json(r.residuals);
  e["cluster"] = r.cluster;
  e["dense_path"] = r.dense_path;
  e["iterations"] = r.iterations;
  e["harmonic_dim"] = r.harmonic_dim;
  if (r.zero_modes >= 0) e["zero_modes"] = r.zero_modes;
  if (r.graddiv_shift_used != 0) e["graddiv_shift"] = r.graddiv_shift_used;
  e["warnings"] = r.warnings;
  return e;
}

void write_modes_csv(const fs::path& path, const EigenResult& r) {
  CsvTable t({"index", "eigenvalue", "residual", "cluster"});
  for (Index i = 0; i < r.lambda.size(); ++i) {
    t.add_row({CsvTable::num(i), CsvTable::num(r.lambda[i]),
               CsvTable::num(r.residuals[i]),
               CsvTable::num(i < Index(r.cluster.size()) ? r.cluster[i] : -1)});
  }
  t.write(path.string());
}

json certificates_json(const NehariProblem::Certificates& c) {
  return {{"model", c.model},
          {"convex", c.convex},
          {"superlinear", c.superlinear}};
}

json starts_json(const MultistartReport& rep) {
  json a = json::array();
  for (const StartRecord& s : rep.starts) {
    a.push_back({{"index", s.index},
                 {"seed", s.seed},
                 {"ray_found", s.ray_found},
                 {"converged", s.converged},
                 {"energy", safe_num(s.energy)},
                 {"residual", safe_num(s.residual)}});
  }
  return a;
}

void write_starts_csv(const fs::path& path, const MultistartReport& rep) {
  CsvTable t({"index", "seed", "ray_found", "converged", "energy",
              "residual"});
  for (const StartRecord& s : rep.starts) {
    t.add_row({CsvTable::num(Index(s.index)), std::to_string(s.seed),
               s.ray_found ? "1" : "0", s.converged ? "1" : "0",
               CsvTable::num(s.energy), CsvTable::num(s.residual)});
  }
  t.write(path.string());
}

json ground_state_json(const NehariResult& r, const MultistartReport& rep) {
  json g;
  g["starts"] = starts_json(rep);
  g["coverage"] = rep.coverage;
  g["certificates"] = certificates_json(rep.certificates);
  g["converged"] = r.converged;
  g["c_N"] = safe_num(r.c_N);
  g["c_M"] = safe_num(r.c_M);
  g["t_u"] = safe_num(r.t_u);
  g["residual"] = safe_num(r.residual_norm);
  g["plus_nonzero"] = r.plus_nonzero;
  g["beta_unimodal"] = r.beta_unimodal;
  g["start_index"] = r.start_index;
  g["warnings"] = r.warnings;
  return g;
}

// Diagnostics record: energy, gradient norm, energies of the three spectral
// blocks, the nonlinear integral, and the nondegeneracy certificate.
json diagnostics_json(const EnergyContext& ctx, const EdgeField& u) {
  const DiscreteOperators& ops = ctx.ops();
  json d;
  d["J"] = ctx.energy(u);
  d["grad_norm"] = ctx.residual_norm(u);
  d["F_integral"] = ctx.nonlinear_integral(u);
  if (ctx.has_split()) {
    const SpectralSplit& sp = ctx.split();
    EdgeField vp = sp.project_plus(u);
    EdgeField vt = sp.project_tilde(u);
    EdgeField w = sp.project_kernel(u);
    d["q_plus_half"] = 0.5 * quadratic_form(ops, vp);
    d["q_tilde_half"] = 0.5 * quadratic_form(ops, vt);
    d["w_mass_half"] = 0.5 * ops.dot_V(w, w);
    d["split_route_defect"] =
        std::abs(ctx.energy(u) - ctx.energy_via_split(u));
    auto cert = ctx.admissible_certificate(u);
    d["certificate"] = {{"plus_fraction", cert.plus_fraction},
                        {"admissible", cert.admissible}};
  }
  return d;
}

json symmetry_json(const SymmetryReport& r) {
  return {{"equivariance_defect", r.equivariance_defect},
          {"rotation_average_defect", r.rotation_average_defect},
          {"tau_fraction", r.tau_fraction},
          {"rho_fraction", r.rho_fraction},
          {"zeta_fraction", r.zeta_fraction},
          {"mirror_defect", r.mirror_defect}};
}

void write_beta_csv(const fs::path& path, const NehariEngine& eng,
                    const VecX& direction, real t_top, int samples) {
  CsvTable t({"t", "beta"});
  for (int i = 0; i < samples; ++i) {
    real ti = t_top * real(i) / real(samples - 1);
    t.add_row({CsvTable::num(ti), CsvTable::num(eng.beta(direction, ti))});
  }
  t.write(path.string());
}

real poly_eval(const std::vector<real>& coeffs, real r) {
  real v = 0;
  for (size_t i = coeffs.size(); i-- > 0;) v = v * r + coeffs[i];
  return v;
}

// ---------------------------------------------------------------------------
// eigs
// ---------------------------------------------------------------------------

void cmd_eigs(const RunConfig& cfg, const fs::path& dir, json& m,
              std::ostream& log) {
  BoxGrid g = make_box_grid(cfg.domain);
  MaterialTensors mat = make_materials(g, cfg.materials);
  DiscreteOperators ops(g, mat);
  HelmholtzProjector helm(ops);

  EigenOptions eo = cfg.solver.eig;
  eo.use_graddiv = (cfg.solver.kernel == "graddiv");
  EigenResult res = solve_maxwell_modes(ops, helm, eo);
  m["eigensolve"] = eigen_stage_json(res);
  m["n_below_threshold"] = count_below(res, cfg.solver.threshold);

  if (cfg.solver.kernel == "both") {
    EigenOptions eg = cfg.solver.eig;
    eg.use_graddiv = true;
    EigenResult alt = solve_maxwell_modes(ops, helm, eg);
    m["eigensolve_graddiv"] = eigen_stage_json(alt);
    Index n = std::min(res.lambda.size(), alt.lambda.size());
    real worst = 0;
    for (Index i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(res.lambda[i] - alt.lambda[i]) /
                                  std::max(real(1), std::abs(res.lambda[i])));
    }
    bool ok = worst <= 1e-6;
    m["kernel_agreement"] = {{"max_relative_gap", worst}, {"pass", ok}};
    if (!ok) {
      throw solver_error(
          "projection and grad-div kernel treatments disagree: relative "
          "eigenvalue gap " +
          std::to_string(worst));
    }
  }

  write_modes_csv(dir / "eigs.csv", res);
  m["artifacts"]["modes_csv"] = "eigs.csv";
  log << "eigs: " << res.lambda.size() << " modes, smallest "
      << (res.lambda.size() ? res.lambda[0] : 0) << "\n";
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

void cmd_solve(const RunConfig& cfg, const fs::path& dir, json& m,
               std::ostream& log) {
  require(cfg.nonlinearity.kind != ModelKind::None,
          "solve needs a nonlinear model; pick one in [nonlinearity]");
  BoxGrid g = make_box_grid(cfg.domain);
  MaterialTensors mat = make_materials(g, cfg.materials);
  NonlinearityModel model = make_model(cfg.nonlinearity);
  DiscreteOperators ops(g, mat);
  HelmholtzProjector helm(ops);

  EigenOptions eo = cfg.solver.eig;
  eo.use_graddiv = (cfg.solver.kernel == "graddiv");
  EigenResult modes = solve_maxwell_modes(ops, helm, eo);
  m["eigensolve"] = eigen_stage_json(modes);
  if (count_below(modes, cfg.solver.threshold) == modes.lambda.size()) {
    m["eigensolve"]["warnings"].push_back(
        "every computed mode sits below the split threshold; raise n_modes "
        "so the positive block is visible");
  }

  SpectralSplit split(ops, helm, modes, cfg.solver.threshold);
  m["split"] = {{"dim_tilde", split.dim_tilde()},
                {"threshold", split.threshold()},
                {"degenerate", split.degenerate()},
                {"warnings", split.warnings()}};

  EnergyContext ctx(split, model);
  EnergyProblem prob(ctx);
  NehariOptions no = cfg.solver.nehari;
  if (cfg.solver.symmetry != "none") {
    require(g.square_xy() && g.mask_xy_symmetric(),
            "symmetry modes need a square x-y cross-section (and a mask "
            "symmetric under the diagonal swap)");
    bool s1 = (cfg.solver.symmetry == "S1");
    no.start_transform = [&g, s1](const VecX& u) {
      return s1 ? s1_project(g, u) : s2_project(g, u);
    };
  }
  NehariEngine engine(prob, no);
  MultistartReport rep;
  NehariResult r = engine.ground_state(&rep);
  m["ground_state"] = ground_state_json(r, rep);
  write_starts_csv(dir / "starts.csv", rep);
  m["artifacts"]["starts_csv"] = "starts.csv";
  write_modes_csv(dir / "eigs.csv", modes);
  m["artifacts"]["modes_csv"] = "eigs.csv";

  if (!r.converged) {
    throw solver_error("no start converged to a nontrivial solution");
  }

  const EdgeField& u = r.fiber.total;
  m["diagnostics"] = diagnostics_json(ctx, u);
  if (g.square_xy() && g.mask_xy_symmetric()) {
    CylBasis basis(ops, inscribed_cylinder(g));
    m["symmetry"] = symmetry_json(symmetry_report(basis, u, 16));
    m["symmetry"]["mode"] = cfg.solver.symmetry;
  }

  write_beta_csv(dir / "beta.csv", engine, r.direction, 2.0 * r.t_u,
                 std::max(11, no.beta_witness_samples));
  m["artifacts"]["beta_csv"] = "beta.csv";
  if (cfg.output.write_fields) {
    write_field_dump((dir / "solution.field").string(), FieldDump::of(g, u),
                     cfg.output.binary);
    m["artifacts"]["solution_field"] = "solution.field";
  }
  log << "solve: c_N = " << r.c_N << ", residual " << r.residual_norm
      << ", " << rep.starts.size() << " starts\n";
}

// ---------------------------------------------------------------------------
// reduce-solve
// ---------------------------------------------------------------------------

void cmd_reduce_solve(const RunConfig& cfg, const fs::path& dir, json& m,
                      std::ostream& log) {
  require(cfg.nonlinearity.kind != ModelKind::None,
          "reduce-solve needs a nonlinear model; pick one in [nonlinearity]");
  const DomainConfig& d = cfg.domain;
  require(std::abs(d.Lx - d.Ly) <= 1e-12 * std::max(d.Lx, d.Ly),
          "the azimuthal reduction needs a square x-y cross-section "
          "(extent Lx == Ly)");
  require(cfg.materials.regions.empty() && !cfg.materials.via_omega &&
              cfg.materials.mu.scalar && cfg.materials.V.scalar,
          "reduce-solve takes uniform scalar mu and V only; anisotropic or "
          "region-wise materials break the rotational symmetry");
  require(cfg.materials.mu.scalar_value > 0, "mu must be positive");

  int nr = d.cyl_nr > 0 ? d.cyl_nr : d.nx / 2;
  int nzc = d.cyl_nz > 0 ? d.cyl_nz : d.nz;
  CylGrid cyl(nr, nzc, d.Lx / 2, d.Lz);
  CylProfiles prof = CylProfiles::constant(1.0 / cfg.materials.mu.scalar_value,
                                           cfg.materials.V.scalar_value);
  NonlinearityModel model = make_model(cfg.nonlinearity);

  ReducedSolution sol =
      reduced_tau_solver(cyl, prof, model, cfg.solver.nehari);
  m["reduced"] = ground_state_json(sol.result, sol.report);
  m["reduced"]["lambda1"] = sol.lambda1;
  m["reduced"]["potential"] = cfg.materials.V.scalar_value;
  m["reduced"]["grid"] = {{"nr", cyl.nr},
                          {"nz", cyl.nz},
                          {"R", cyl.R},
                          {"L", cyl.L}};
  write_starts_csv(dir / "starts.csv", sol.report);
  m["artifacts"]["starts_csv"] = "starts.csv";

  if (!sol.result.converged) {
    throw solver_error("no start converged to a nontrivial solution");
  }

  // (r, z) slice of the azimuthal profile, plot-ready.
  {
    CsvTable t({"r", "z", "alpha"});
    for (int j = 0; j <= cyl.nz; ++j) {
      for (int i = 0; i < cyl.nr; ++i) {
        t.add_row({CsvTable::num(cyl.r_at(i)), CsvTable::num(cyl.z_at(j)),
                   CsvTable::num(sol.field.alpha[cyl.node(i, j)])});
      }
    }
    t.write((dir / "alpha.csv").string());
    m["artifacts"]["alpha_csv"] = "alpha.csv";
  }

  // Ray profile along the accepted direction.
  {
    ReducedTauProblem prob(cyl, prof, model);
    NehariEngine eng(prob, cfg.solver.nehari);
    write_beta_csv(dir / "beta.csv", eng, sol.result.direction,
                   2.0 * sol.result.t_u,
                   std::max(11, cfg.solver.nehari.beta_witness_samples));
    m["artifacts"]["beta_csv"] = "beta.csv";
  }

  if (cfg.output.write_fields) {
    // Push the profile through the ansatz onto the box lattice. Bilinear in
    // (r, z) with even extension at the axis and a linear taper to zero at
    // the rim, matching the discrete lift's interpolation rules.
    BoxGrid g = make_box_grid(d);
    const VecX& a = sol.field.alpha;
    auto alpha_rz = [&](real r, real z) -> real {
      if (r >= cyl.R) return 0;
      real zeta = std::clamp(z / cyl.hz, real(0), real(cyl.nz));
      int j0 = std::min(int(zeta), cyl.nz - 1);
      real wz = zeta - j0;
      auto at_layer = [&](int j) -> real {
        real xi = r / cyl.hr - 0.5;
        if (xi <= 0) return a[cyl.node(0, j)];
        if (xi >= real(cyl.nr - 1)) {
          real r_last = cyl.r_at(cyl.nr - 1);
          return a[cyl.node(cyl.nr - 1, j)] * (cyl.R - r) / (cyl.R - r_last);
        }
        int i0 = int(xi);
        real wr = xi - i0;
        return (1 - wr) * a[cyl.node(i0, j)] + wr * a[cyl.node(i0 + 1, j)];
      };
      return (1 - wz) * at_layer(j0) + wz * at_layer(j0 + 1);
    };
    Vec3 axis(d.Lx / 2, d.Ly / 2, 0);
    EdgeField u = sample_edge_field(g, [&](const Vec3& x) {
      real dx = x.x() - axis.x(), dy = x.y() - axis.y();
      real av = alpha_rz(std::hypot(dx, dy), x.z());
      return Vec3(-dy * av, dx * av, 0);
    });
    write_field_dump((dir / "solution.field").string(), FieldDump::of(g, u),
                     cfg.output.binary);
    m["artifacts"]["solution_field"] = "solution.field";
  }
  log << "reduce-solve: c_N = " << sol.result.c_N << ", lambda1 = "
      << sol.lambda1 << "\n";
}

// ---------------------------------------------------------------------------
// oracle-check
// ---------------------------------------------------------------------------

void cmd_oracle_check(const RunConfig& cfg, const fs::path& dir, json& m,
                      std::ostream& log) {
  require(cfg.oracle.has_value(),
          "oracle-check needs an [oracle] section (V, gamma, p, center, "
          "r_max)");
  const OracleConfig& oc = *cfg.oracle;
  auto Vr = [&oc](real r) { return poly_eval(oc.V_coeffs, r); };
  auto Gr = [&oc](real r) { return poly_eval(oc.Gamma_coeffs, r); };

  RadialOracle oracle = make_radial_oracle(Vr, Gr, oc.p, oc.center, oc.r_max,
                                           oc.n_samples);
  RadialCheckReport rep = verify_radial_oracle(oracle, oc.r_max, oc.n_samples);
  m["oracle"] = {{"identity_defect", rep.max_identity_defect},
                 {"max_magnitude", rep.max_magnitude},
                 {"passed", rep.passed},
                 {"p", oc.p},
                 {"r_max", oc.r_max},
                 {"samples", oc.n_samples}};
  if (!rep.passed) {
    throw certificate_error(
        "radial oracle identity violated: pointwise defect " +
        std::to_string(rep.max_identity_defect));
  }

  // Discrete curl of the sampled hedgehog away from its center; the field is
  // curl-free in the continuum, so this measures pure truncation error.
  BoxGrid g = make_box_grid(cfg.domain);
  DiscreteOperators ops(g, MaterialTensors::isotropic(1, 1));
  EdgeField u = sample_edge_field(
      g, [&](const Vec3& x) { return oracle.value(x); });
  FaceField curl = ops.C() * u;
  real h = std::max({g.hx, g.hy, g.hz});
  real far = 3 * h;
  real sup = 0;
  Index checked = 0;
  const auto& faces = g.faces();
  for (Index f = 0; f < Index(faces.size()); ++f) {
    if ((faces[size_t(f)].center - oc.center).norm() < far) continue;
    sup = std::max(sup, std::abs(curl[f]));
    ++checked;
  }
  m["oracle"]["curl_far_sup"] = sup;
  m["oracle"]["curl_faces_checked"] = checked;
  m["oracle"]["field_scale"] = u.size() ? u.cwiseAbs().maxCoeff() : 0;
  if (cfg.output.write_fields) {
    write_field_dump((dir / "oracle.field").string(), FieldDump::of(g, u),
                     cfg.output.binary);
    m["artifacts"]["oracle_field"] = "oracle.field";
  }
  log << "oracle-check: identity defect " << rep.max_identity_defect
      << ", far-field curl " << sup << "\n";
}

// ---------------------------------------------------------------------------
// check-model
// ---------------------------------------------------------------------------

const char* condition_name(GrowthCondition c) {
  switch (c) {
    case GrowthCondition::F2: return "F2";
    case GrowthCondition::F4: return "F4";
    case GrowthCondition::F6: return "F6";
    case GrowthCondition::F9: return "F9";
    case GrowthCondition::F12: return "F12";
    case GrowthCondition::F14: return "F14";
  }
  return "?";
}

void cmd_check_model(const RunConfig& cfg, const fs::path&, json& m,
                     std::ostream& log) {
  require(cfg.nonlinearity.kind != ModelKind::None,
          "check-model needs a nonlinear model; pick one in [nonlinearity]");
  NonlinearityModel model = make_model(cfg.nonlinearity);
  m["model"] = model_kind_name(model.kind);

  uint64_t seed = cfg.solver.nehari.seed;
  json conds;
  int failed = 0;
  for (GrowthCondition c :
       {GrowthCondition::F2, GrowthCondition::F4, GrowthCondition::F6,
        GrowthCondition::F9, GrowthCondition::F12, GrowthCondition::F14}) {
    ConditionReport r = check_condition(model, 1, c, 10000, seed++);
    json e = {{"passed", r.passed},
              {"samples", r.samples},
              {"worst_margin", r.worst_margin},
              {"constant_estimate", r.constant_estimate}};
    if (r.witness) {
      e["witness"] = {{"u", {r.witness->u.x(), r.witness->u.y(),
                             r.witness->u.z()}},
                      {"v", {r.witness->v.x(), r.witness->v.y(),
                             r.witness->v.z()}},
                      {"t", r.witness->t},
                      {"value", r.witness->value}};
    }
    conds[condition_name(c)] = e;
    if (!r.passed) ++failed;
  }
  m["conditions"] = conds;

  EvennessReport ev = check_model_even(model, 1, 2000, seed);
  m["evenness"] = {{"even", ev.even}, {"worst", ev.worst}};
  m["conditions_failed"] = failed;
  log << "check-model: " << model_kind_name(model.kind) << ", " << failed
      << " condition(s) failed\n";
  if (failed > 0) {
    // The report (with witnesses) is already in the manifest; the exit code
    // gives scripts a machine-readable admissibility verdict.
    throw certificate_error(std::string(model_kind_name(model.kind)) +
                            " fails " + std::to_string(failed) +
                            " admissibility condition(s)");
  }
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

RunConfig apply_sweep_point(const RunConfig& base, const std::string& param,
                            real v) {
  RunConfig pt = base;
  pt.sweep.reset();
  if (param == "lambda") {
    require(base.materials.V.scalar && !base.materials.via_omega,
            "a lambda sweep needs a scalar V in the base config");
    pt.materials.V.scalar_value = v;
    pt.materials.V.value = v * Mat3::Identity();
  } else if (param == "p") {
    require(base.nonlinearity.kind == ModelKind::DoublePowerPiecewise ||
                base.nonlinearity.kind == ModelKind::DoublePowerSmooth,
            "the exponent p applies to the double-power models only");
    pt.nonlinearity.p = v;
  } else {  // chi3
    pt.nonlinearity.chi3 = v;
  }
  return pt;
}

void cmd_sweep(const RunConfig& cfg, const fs::path& dir, json& m,
               std::ostream& log) {
  require(cfg.sweep.has_value(),
          "sweep needs a [sweep] section (parameter, values, command)");
  const SweepConfig& sw = *cfg.sweep;

  // Fail fast on a misdeclared sweep before running any point.
  for (real v : sw.values) (void)apply_sweep_point(cfg, sw.parameter, v);

  CsvTable table({"index", "value", "outcome", "exit_code", "energy",
                  "residual", "lambda_min"});
  json rows = json::array();
  int worst = 0;
  for (size_t k = 0; k < sw.values.size(); ++k) {
    real v = sw.values[k];
    RunConfig pt = apply_sweep_point(cfg, sw.parameter, v);
    pt.output.directory =
        (dir / ("point_" + std::to_string(k))).string();
    log << "sweep point " << k << ": " << sw.parameter << " = " << v << "\n";
    RunResult rr = run_command(sw.command, pt, log);

    json row = {{"index", k},
                {"value", v},
                {"exit_code", rr.exit_code},
                {"outcome", rr.manifest.value("outcome", "error")},
                {"directory", pt.output.directory}};
    std::string energy, residual, lmin;
    const json& mm = rr.manifest;
    const char* block = (sw.command == "reduce-solve") ? "reduced"
                                                       : "ground_state";
    if (mm.contains(block)) {
      const json& b = mm[block];
      if (b.contains("c_N") && b["c_N"].is_number()) {
        row["energy"] = b["c_N"];
        energy = CsvTable::num(b["c_N"].get<real>());
      }
      if (b.contains("residual") && b["residual"].is_number()) {
        row["residual"] = b["residual"];
        residual = CsvTable::num(b["residual"].get<real>());
      }
    }
    if (mm.contains("eigensolve") &&
        !mm["eigensolve"]["eigenvalues"].empty()) {
      row["lambda_min"] = mm["eigensolve"]["eigenvalues"][0];
      lmin = CsvTable::num(mm["eigensolve"]["eigenvalues"][0].get<real>());
    }
    rows.push_back(row);
    table.add_row({CsvTable::num(Index(k)), CsvTable::num(v),
                   rr.manifest.value("outcome", "error"),
                   CsvTable::num(Index(rr.exit_code)), energy, residual,
                   lmin});
    worst = std::max(worst, rr.exit_code);
  }
  table.write((dir / "sweep.csv").string());
  m["sweep"] = {{"parameter", sw.parameter},
                {"command", sw.command},
                {"values", sw.values},
                {"rows", rows}};
  m["artifacts"]["sweep_csv"] = "sweep.csv";
  if (worst != 0) {
    throw solver_error("sweep finished with failing points (worst exit code " +
                       std::to_string(worst) + "); see sweep.csv");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Dispatch, error mapping, entry point
// ---------------------------------------------------------------------------

RunResult run_command(const std::string& command, const RunConfig& cfg,
                      std::ostream& log) {
  if (const char* env = std::getenv("NLMX_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) Eigen::setNbThreads(n);
  }

  RunResult out;
  out.output_dir = cfg.output.directory;
  json& m = out.manifest;
  m = base_manifest(cfg, command);

  auto t0 = std::chrono::steady_clock::now();
  bool dir_ok = false;
  try {
    fs::create_directories(cfg.output.directory);
    dir_ok = true;
    fs::path dir(cfg.output.directory);
    if (command == "eigs") {
      cmd_eigs(cfg, dir, m, log);
    } else if (command == "solve") {
      cmd_solve(cfg, dir, m, log);
    } else if (command == "reduce-solve") {
      cmd_reduce_solve(cfg, dir, m, log);
    } else if (command == "oracle-check") {
      cmd_oracle_check(cfg, dir, m, log);
    } else if (command == "check-model") {
      cmd_check_model(cfg, dir, m, log);
    } else if (command == "sweep") {
      cmd_sweep(cfg, dir, m, log);
    } else {
      throw invalid_input_error(
          "unknown command '" + command +
          "' (eigs, solve, reduce-solve, oracle-check, sweep, check-model)");
    }
    m["outcome"] = "ok";
    out.exit_code = kExitOk;
  } catch (const invalid_input_error& e) {
    m["outcome"] = "config error";
    m["error"] = e.what();
    out.exit_code = kExitConfig;
  } catch (const certificate_error& e) {
    m["outcome"] = "certificate failure";
    m["error"] = e.what();
    out.exit_code = kExitCertificate;
  } catch (const solver_error& e) {
    m["outcome"] = "solver failure";
    m["error"] = e.what();
    out.exit_code = kExitSolver;
  } catch (const std::exception& e) {
    m["outcome"] = "internal error";
    m["error"] = e.what();
    out.exit_code = 1;
  }

  real wall = std::chrono::duration<real>(std::chrono::steady_clock::now() -
                                          t0)
                  .count();
  m["wall_time_seconds"] = wall;

  if (dir_ok) {
    try {
      write_text_file(
          (fs::path(cfg.output.directory) / "manifest.json").string(),
          m.dump(2) + "\n");
    } catch (const std::exception& e) {
      log << "warning: could not write manifest: " << e.what() << "\n";
    }
  }
  if (out.exit_code != 0) {
    log << command << ": " << m["outcome"].get<std::string>() << ": "
        << m.value("error", std::string()) << "\n";
  }
  return out;
}

int cli_main(int argc, const char* const* argv) {
  CLI::App app{
      "ground states of the nonlinear curl-curl equation on staggered box "
      "grids"};
  app.set_version_flag("--version", std::string(kToolVersion));

  struct Cmd {
    const char* name;
    const char* desc;
  };
  const std::vector<Cmd> cmds = {
      {"eigs", "constrained eigenvalues of the curl-curl pencil"},
      {"solve", "multistart ground-state search on the full grid"},
      {"reduce-solve", "azimuthal-ansatz ground state on the half-plane"},
      {"oracle-check", "closed-form radial solution family self-test"},
      {"sweep", "run one command across a declared parameter grid"},
      {"check-model", "sampled growth/convexity checks of the model"},
  };
  std::string config_path, out_dir;
  for (const Cmd& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.desc);
    sub->add_option("config", config_path, "run configuration file")
        ->required();
    sub->add_option("-o,--out", out_dir, "override the [output] directory");
  }
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    RunConfig cfg = load_run_config_file(config_path);
    if (!out_dir.empty()) cfg.output.directory = out_dir;
    return run_command(command, cfg, std::cout).exit_code;
  } catch (const invalid_input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const certificate_error& e) {
    std::cerr << "certificate failure: " << e.what() << "\n";
    return kExitCertificate;
  } catch (const solver_error& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace nlmx
