#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "nlmx/config.hpp"
#include "nlmx/io.hpp"
#include "nlmx/runner.hpp"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace nlmx;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / "nlmx_cli_tests" / tag;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Parse a config body (without an [output] section), attach a scratch output
// directory, and run the command in-process.
RunResult run_cfg(const std::string& command, const std::string& tag,
                  const std::string& body) {
  fs::path out = fresh_dir(tag) / "out";
  std::string text =
      body + "\n[output]\ndirectory = " + out.string() + "\n";
  RunConfig cfg = load_run_config(ConfigDoc::parse_string(text, tag));
  std::ostringstream log;
  return run_command(command, cfg, log);
}

template <class F>
std::string thrown_message(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

bool bits_equal(const VecX& a, const VecX& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(real) * size_t(a.size())) == 0;
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += (c == '\n');
  return n;
}

const char* kCavityEigs = R"(
[domain]
resolution = 10
extent = 3.14159265358979312

[materials]
mu = 1
v = 1

[solver]
n_modes = 5
rng_seed = 7
)";

const char* kSmallSolve = R"(
[domain]
resolution = 6
extent = 3.14159265358979312

[materials]
mu = 1
v = 0.5

[nonlinearity]
model = kerr

[solver]
starts = 2
rng_seed = 4242
n_modes = 6
)";

const char* kSmallReduce = R"(
[domain]
resolution = 8
extent = 2
cyl_resolution = 8 8

[materials]
mu = 1
v = 0

[nonlinearity]
model = kerr

[solver]
starts = 2
rng_seed = 7
)";

}  // namespace

// ---------------------------------------------------------------------------
// Configuration parsing
// ---------------------------------------------------------------------------

TEST_CASE("config: full document loads into typed blocks") {
  const char* text = R"(
# comment-only line
[domain]
resolution = 8 10 12
extent = 1 2 3.5          # trailing comment
mask = ball_cut 0.5 1.0 1.5 0.25
cyl_resolution = 6 14

[materials]
mu = diag 1 2 3
V = 2 0.1 0 0.1 2 0 0 0 1.5
region1.box = 0 0 0 0.5 1 1
region1.v = 4

[nonlinearity]
model = saturation
chi3 = 0.7

[solver]
starts = 3
rng_seed = 99
outer_tol = 1e-8
symmetry = S1
kernel = BOTH
threshold = 1.25
n_modes = 9

[output]
directory = outdir
format = binary
write_fields = false
)";
  RunConfig cfg = load_run_config(ConfigDoc::parse_string(text, "full.ini"));

  CHECK(cfg.domain.nx == 8);
  CHECK(cfg.domain.ny == 10);
  CHECK(cfg.domain.nz == 12);
  CHECK(cfg.domain.Lx == 1.0);
  CHECK(cfg.domain.Ly == 2.0);
  CHECK(cfg.domain.Lz == 3.5);
  CHECK(cfg.domain.mask.kind == "ball_cut");
  REQUIRE(cfg.domain.mask.params.size() == 4);
  CHECK(cfg.domain.mask.params[3] == 0.25);
  CHECK(cfg.domain.cyl_nr == 6);
  CHECK(cfg.domain.cyl_nz == 14);

  CHECK(!cfg.materials.mu.scalar);
  CHECK(cfg.materials.mu.value(1, 1) == 2.0);
  CHECK(cfg.materials.mu.value(0, 1) == 0.0);
  CHECK(!cfg.materials.V.scalar);
  CHECK(cfg.materials.V.value(0, 1) == 0.1);
  CHECK(cfg.materials.V.value(1, 0) == 0.1);
  CHECK(cfg.materials.V.value(2, 2) == 1.5);
  REQUIRE(cfg.materials.regions.size() == 1);
  CHECK(cfg.materials.regions[0].hi.x() == 0.5);
  CHECK(!cfg.materials.regions[0].mu.has_value());
  REQUIRE(cfg.materials.regions[0].V.has_value());
  CHECK(cfg.materials.regions[0].V->scalar_value == 4.0);

  CHECK(cfg.nonlinearity.kind == ModelKind::Saturation);
  CHECK(cfg.nonlinearity.chi3 == 0.7);

  CHECK(cfg.solver.nehari.starts == 3);
  CHECK(cfg.solver.nehari.seed == 99);
  CHECK(cfg.solver.nehari.outer_tol == 1e-8);
  CHECK(cfg.solver.eig.seed == 99);
  CHECK(cfg.solver.eig.n_modes == 9);
  CHECK(cfg.solver.symmetry == "S1");
  CHECK(cfg.solver.kernel == "both");
  CHECK(cfg.solver.threshold == 1.25);

  CHECK(cfg.output.directory == "outdir");
  CHECK(cfg.output.binary);
  CHECK(!cfg.output.write_fields);

  CHECK(cfg.hash.size() == 16);
  CHECK(cfg.hash == fnv1a64_hex(text));
  CHECK(cfg.source == "full.ini");
}

TEST_CASE("config: omega-eps pair is accepted and exclusive") {
  const char* text = R"(
[domain]
resolution = 4
extent = 1

[materials]
omega = 2
eps = diag 1 1 2
)";
  RunConfig cfg = load_run_config(ConfigDoc::parse_string(text));
  CHECK(cfg.materials.via_omega);
  CHECK(cfg.materials.omega == 2.0);
  CHECK(cfg.materials.eps.value(2, 2) == 2.0);

  std::string both = thrown_message([] {
    (void)load_run_config(ConfigDoc::parse_string(
        "[domain]\nresolution = 4\nextent = 1\n"
        "[materials]\nv = 1\nomega = 2\neps = 1\n"));
  });
  CHECK(contains(both, "not both"));

  std::string lone = thrown_message([] {
    (void)load_run_config(ConfigDoc::parse_string(
        "[domain]\nresolution = 4\nextent = 1\n[materials]\nomega = 2\n"));
  });
  CHECK(contains(lone, "together"));
}

TEST_CASE("config: syntax errors carry the file name and line") {
  std::string dup_key = thrown_message([] {
    (void)ConfigDoc::parse_string("[a]\nx = 1\nx = 2\n", "c.ini");
  });
  CHECK(contains(dup_key, "c.ini:3:"));
  CHECK(contains(dup_key, "duplicate key 'x'"));
  CHECK(contains(dup_key, "line 2"));

  std::string dup_sec = thrown_message([] {
    (void)ConfigDoc::parse_string("[a]\n[b]\n[a]\n", "c.ini");
  });
  CHECK(contains(dup_sec, "c.ini:3:"));
  CHECK(contains(dup_sec, "already declared at line 1"));

  std::string orphan = thrown_message(
      [] { (void)ConfigDoc::parse_string("x = 1\n", "c.ini"); });
  CHECK(contains(orphan, "c.ini:1:"));
  CHECK(contains(orphan, "before any [section]"));

  std::string header = thrown_message(
      [] { (void)ConfigDoc::parse_string("[oops\n", "c.ini"); });
  CHECK(contains(header, "c.ini:1:"));
  CHECK(contains(header, "malformed section header"));

  std::string no_eq = thrown_message(
      [] { (void)ConfigDoc::parse_string("[a]\njust words\n", "c.ini"); });
  CHECK(contains(no_eq, "c.ini:2:"));
}

TEST_CASE("config: semantic errors point at the offending key's line") {
  auto load = [](const std::string& text) {
    return thrown_message([&] {
      (void)load_run_config(ConfigDoc::parse_string(text, "c.ini"));
    });
  };

  // Line 3: resolution out of range.
  std::string res = load("[domain]\n\nresolution = 1\nextent = 1\n");
  CHECK(contains(res, "c.ini:3:"));
  CHECK(contains(res, "[2, 512]"));

  // Line 4: negative extent.
  std::string ext = load("[domain]\nresolution = 4\n\nextent = -1\n");
  CHECK(contains(ext, "c.ini:4:"));
  CHECK(contains(ext, "positive"));

  std::string mask =
      load("[domain]\nresolution = 4\nextent = 1\nmask = ball_cut 1 2\n");
  CHECK(contains(mask, "c.ini:4:"));
  CHECK(contains(mask, "4 parameters"));

  std::string mkind =
      load("[domain]\nresolution = 4\nextent = 1\nmask = torus 1\n");
  CHECK(contains(mkind, "unknown mask kind"));

  std::string tensor = load(
      "[domain]\nresolution = 4\nextent = 1\n[materials]\nmu = 1 2\n");
  CHECK(contains(tensor, "c.ini:5:"));
  CHECK(contains(tensor, "diag"));

  std::string asym = load(
      "[domain]\nresolution = 4\nextent = 1\n"
      "[materials]\nv = 1 2 0 0 1 0 0 0 1\n");
  CHECK(contains(asym, "symmetric"));

  std::string model = load(
      "[domain]\nresolution = 4\nextent = 1\n"
      "[nonlinearity]\nmodel = quartic\n");
  CHECK(contains(model, "unknown model 'quartic'"));

  std::string starts = load(
      "[domain]\nresolution = 4\nextent = 1\n[solver]\nstarts = 0\n");
  CHECK(contains(starts, "starts must be >= 1"));

  // The model gate runs last: structurally bad coefficients are refused at
  // the model line.
  std::string chi = load(
      "[domain]\nresolution = 4\nextent = 1\n"
      "[nonlinearity]\nmodel = kerr\nchi3 = -1\n");
  CHECK(contains(chi, "c.ini:5:"));
  CHECK(contains(chi, "chi3"));
}

TEST_CASE("config: unknown keys are rejected with their lines") {
  std::string msg = thrown_message([] {
    (void)load_run_config(ConfigDoc::parse_string(
        "[domain]\nresolution = 4\nextent = 1\n"
        "[solver]\nouter_tol = 1e-7\nouter_toll = 1e-9\n",
        "c.ini"));
  });
  CHECK(contains(msg, "unknown key"));
  CHECK(contains(msg, "line 6"));
  CHECK(contains(msg, "[solver] outer_toll"));
}

// ---------------------------------------------------------------------------
// Artifact input/output
// ---------------------------------------------------------------------------

TEST_CASE("io: field dumps round-trip bit-exactly in both modes") {
  BoxGrid g(5, 4, 3, 1.1, 0.9, 2.3);
  VecX v(g.num_edges());
  for (Index i = 0; i < v.size(); ++i) {
    v[i] = std::sin(0.7 * real(i + 1)) * std::pow(10.0, (i % 9) - 4);
  }
  // Values that expose any formatting shortcut.
  v[0] = -0.0;
  v[1] = 5e-324;
  v[2] = -1.7976931348623157e308;
  v[3] = 0.1;
  v[4] = 3.14159265358979312e17;

  fs::path dir = fresh_dir("io_roundtrip");
  for (bool binary : {false, true}) {
    fs::path p = dir / (binary ? "b.field" : "t.field");
    write_field_dump(p.string(), FieldDump::of(g, v), binary);
    FieldDump back = read_field_dump(p.string());
    CHECK(back.matches(g));
    CHECK(bits_equal(back.values, v));
    // Sign of zero survives.
    CHECK(std::signbit(back.values[0]));
  }

  FieldDump d = FieldDump::of(g, v);
  CHECK(!d.matches(BoxGrid(5, 4, 4, 1.1, 0.9, 2.3)));
  CHECK(!d.matches(BoxGrid(5, 4, 3, 1.1, 0.9, 2.4)));

  fs::path bad = dir / "bad.field";
  write_text_file(bad.string(), "notafield 1 2 3\n");
  CHECK_THROWS_AS((void)read_field_dump(bad.string()), invalid_input_error);

  fs::path trunc = dir / "trunc.field";
  std::string txt = read_text_file((dir / "t.field").string());
  write_text_file(trunc.string(), txt.substr(0, txt.size() / 2));
  CHECK_THROWS_AS((void)read_field_dump(trunc.string()), invalid_input_error);
}

TEST_CASE("io: the content digest is stable, sensitive, and well-known") {
  // Published reference values of the 64-bit Fowler-Noll-Vo 1a hash.
  CHECK(fnv1a64_hex("") == "cbf29ce484222325");
  CHECK(fnv1a64_hex("a") == "af63dc4c8601ec8c");

  std::string text = "[domain]\nresolution = 4\nextent = 1\n";
  RunConfig a = load_run_config(ConfigDoc::parse_string(text));
  RunConfig b = load_run_config(ConfigDoc::parse_string(text));
  CHECK(a.hash == b.hash);

  // Any byte change, even in a comment, renames the run.
  RunConfig c = load_run_config(ConfigDoc::parse_string(text + "# v2\n"));
  CHECK(c.hash != a.hash);
}

TEST_CASE("io: csv tables are column-checked and round-trip numerics") {
  CsvTable t({"x", "y"});
  t.add_row({CsvTable::num(real(0.1)), CsvTable::num(Index(7))});
  CHECK(t.rows() == 1);
  CHECK_THROWS_AS(t.add_row({"lonely"}), invalid_input_error);

  std::string s = t.to_string();
  CHECK(contains(s, "x,y"));
  CHECK(std::strtod(CsvTable::num(real(0.1)).c_str(), nullptr) == 0.1);
  real tricky = 1.0 / 3.0;
  CHECK(std::strtod(CsvTable::num(tricky).c_str(), nullptr) == tricky);
}

// ---------------------------------------------------------------------------
// Commands, run in-process
// ---------------------------------------------------------------------------

TEST_CASE("runner: eigs resolves the first cavity cluster") {
  RunResult r = run_cfg("eigs", "eigs_cavity", kCavityEigs);
  REQUIRE(r.exit_code == kExitOk);
  const auto& m = r.manifest;
  CHECK(m["outcome"] == "ok");
  CHECK(m["config"]["hash"].get<std::string>().size() == 16);

  auto lam = m["eigensolve"]["eigenvalues"];
  REQUIRE(lam.size() == 5);
  // Continuum value 2 with multiplicity 3, then the pair near 3.
  CHECK(lam[0].get<real>() == doctest::Approx(2.0).epsilon(0.03));
  auto cluster = m["eigensolve"]["cluster"];
  CHECK(cluster[0] == cluster[1]);
  CHECK(cluster[1] == cluster[2]);
  CHECK(cluster[3] != cluster[2]);
  for (const auto& res : m["eigensolve"]["residuals"]) {
    CHECK(res.get<real>() <= 1e-8);
  }
  CHECK(m["n_below_threshold"].get<Index>() == 0);

  fs::path out(r.output_dir);
  std::string csv = read_text_file((out / "eigs.csv").string());
  CHECK(contains(csv, "index,eigenvalue,residual,cluster"));
  CHECK(count_lines(csv) == 6);
  // The on-disk manifest matches the in-memory result.
  std::string mj = read_text_file((out / "manifest.json").string());
  CHECK(contains(mj, "\"outcome\": \"ok\""));
}

TEST_CASE("runner: solve converges, reports diagnostics, and is deterministic") {
  RunResult r1 = run_cfg("solve", "solve_small", kSmallSolve);
  REQUIRE(r1.exit_code == kExitOk);
  const auto& g1 = r1.manifest["ground_state"];
  CHECK(g1["converged"].get<bool>());
  CHECK(g1["plus_nonzero"].get<bool>());
  CHECK(g1["beta_unimodal"].get<bool>());
  REQUIRE(g1["starts"].size() == 2);

  // With V = 0.5 the whole pencil spectrum sits above the threshold.
  CHECK(r1.manifest["split"]["dim_tilde"].get<Index>() == 0);

  const auto& d = r1.manifest["diagnostics"];
  CHECK(d["J"].get<real>() ==
        doctest::Approx(g1["c_N"].get<real>()).epsilon(1e-12));
  CHECK(d["grad_norm"].get<real>() <= 1e-5);
  CHECK(d["F_integral"].get<real>() > 0);
  CHECK(d["certificate"]["admissible"].get<bool>());
  CHECK(d["split_route_defect"].get<real>() <= 1e-9);

  fs::path out(r1.output_dir);
  CHECK(fs::exists(out / "starts.csv"));
  CHECK(fs::exists(out / "beta.csv"));
  FieldDump dump = read_field_dump((out / "solution.field").string());
  BoxGrid grid(6, 6, 6, 3.14159265358979312, 3.14159265358979312,
               3.14159265358979312);
  CHECK(dump.matches(grid));
  CHECK(dump.values.allFinite());
  CHECK(dump.values.cwiseAbs().maxCoeff() > 0);

  // Identical config and seed: the rerun reproduces every energy and
  // residual bit-for-bit (the output directory is part of the config text,
  // so the rerun reuses it).
  RunResult r2 = run_cfg("solve", "solve_small", kSmallSolve);
  REQUIRE(r2.exit_code == kExitOk);
  const auto& g2 = r2.manifest["ground_state"];
  CHECK(g1["c_N"].get<real>() == g2["c_N"].get<real>());
  CHECK(g1["residual"].get<real>() == g2["residual"].get<real>());
  // Whole-record equality; a start whose ray search failed carries a null
  // residual, and the rerun must reproduce that too.
  CHECK(g1["starts"] == g2["starts"]);
  CHECK(r1.manifest["config"]["hash"] == r2.manifest["config"]["hash"]);
}

TEST_CASE("runner: reduce-solve reproduces its frozen ground state") {
  RunResult r = run_cfg("reduce-solve", "reduce_small", kSmallReduce);
  REQUIRE(r.exit_code == kExitOk);
  const auto& red = r.manifest["reduced"];
  CHECK(red["converged"].get<bool>());
  CHECK(red["c_N"].get<real>() ==
        doctest::Approx(109.93217222648619).epsilon(1e-9));
  CHECK(red["lambda1"].get<real>() ==
        doctest::Approx(16.9377).epsilon(1e-3));
  CHECK(red["residual"].get<real>() <= 1e-6);
  CHECK(red["grid"]["nr"] == 8);
  CHECK(red["grid"]["R"].get<real>() == 1.0);
  for (const auto& s : red["starts"]) CHECK(s["converged"].get<bool>());

  fs::path out(r.output_dir);
  CHECK(fs::exists(out / "alpha.csv"));
  CHECK(fs::exists(out / "beta.csv"));
  std::string alpha = read_text_file((out / "alpha.csv").string());
  CHECK(contains(alpha, "r,z,alpha"));
  // One row per (r, z) node plus the header.
  CHECK(count_lines(alpha) == 8 * 9 + 1);

  FieldDump dump = read_field_dump((out / "solution.field").string());
  CHECK(dump.matches(BoxGrid(8, 8, 8, 2, 2, 2)));
  CHECK(dump.values.allFinite());
}

TEST_CASE("runner: oracle-check verifies the family and refuses sign flips") {
  const char* good = R"(
[domain]
resolution = 8
extent = 2

[oracle]
v = 1 0.5
gamma = 1 0.25
p = 4
center = 1 1 1
r_max = 0.9
samples = 200
)";
  RunResult ok = run_cfg("oracle-check", "oracle_ok", good);
  REQUIRE(ok.exit_code == kExitOk);
  CHECK(ok.manifest["oracle"]["passed"].get<bool>());
  CHECK(ok.manifest["oracle"]["identity_defect"].get<real>() <= 1e-12);
  CHECK(fs::exists(fs::path(ok.output_dir) / "oracle.field"));

  const char* bad = R"(
[domain]
resolution = 8
extent = 2

[oracle]
v = -1
gamma = 1
p = 4
center = 1 1 1
r_max = 0.9
samples = 100
)";
  RunResult no = run_cfg("oracle-check", "oracle_bad", bad);
  CHECK(no.exit_code == kExitCertificate);
  CHECK(no.manifest["outcome"] == "certificate failure");
  CHECK(contains(no.manifest["error"].get<std::string>(), "changes sign"));
}

TEST_CASE("runner: check-model passes the focusing cubic and flags the "
          "sign-changing one") {
  const char* kerr = R"(
[domain]
resolution = 4
extent = 1

[nonlinearity]
model = kerr
)";
  RunResult ok = run_cfg("check-model", "model_kerr", kerr);
  REQUIRE(ok.exit_code == kExitOk);
  CHECK(ok.manifest["conditions_failed"].get<int>() == 0);
  CHECK(ok.manifest["conditions"]["F9"]["passed"].get<bool>());
  CHECK(ok.manifest["evenness"]["even"].get<bool>());

  const char* cq = R"(
[domain]
resolution = 4
extent = 1

[nonlinearity]
model = cubic_quintic
chi3 = 1
chi5 = 1
)";
  RunResult no = run_cfg("check-model", "model_cq", cq);
  CHECK(no.exit_code == kExitCertificate);
  CHECK(no.manifest["conditions_failed"].get<int>() >= 1);
  const auto& f6 = no.manifest["conditions"]["F6"];
  CHECK(!f6["passed"].get<bool>());
  // The failure comes with a concrete witness sample.
  REQUIRE(f6.contains("witness"));
  CHECK(f6["witness"]["u"].size() == 3);
}

TEST_CASE("runner: sweep emits one row per point and aggregates failures") {
  std::string body = std::string(kSmallReduce) +
                     "\n[sweep]\nparameter = lambda\nvalues = -1 0 0.5\n"
                     "command = reduce-solve\n";
  RunResult r = run_cfg("sweep", "sweep_ok", body);
  REQUIRE(r.exit_code == kExitOk);
  const auto& rows = r.manifest["sweep"]["rows"];
  REQUIRE(rows.size() == 3);
  std::vector<real> energies;
  for (const auto& row : rows) {
    CHECK(row["outcome"] == "ok");
    CHECK(row["exit_code"].get<int>() == 0);
    energies.push_back(row["energy"].get<real>());
  }
  // Raising the potential shift lowers the ground-state level.
  CHECK(energies[0] > energies[1]);
  CHECK(energies[1] > energies[2]);

  fs::path out(r.output_dir);
  std::string csv = read_text_file((out / "sweep.csv").string());
  CHECK(contains(csv, "index,value,outcome,exit_code"));
  CHECK(count_lines(csv) == 4);
  CHECK(fs::exists(out / "point_2" / "manifest.json"));

  // A potential at the symmetric-class eigenvalue makes one point refuse;
  // the sweep still completes every point, records the row, then fails.
  std::string mixed = std::string(kSmallReduce) +
                      "\n[sweep]\nparameter = lambda\nvalues = 0 25\n"
                      "command = reduce-solve\n";
  RunResult bad = run_cfg("sweep", "sweep_mixed", mixed);
  CHECK(bad.exit_code == kExitSolver);
  const auto& brows = bad.manifest["sweep"]["rows"];
  REQUIRE(brows.size() == 2);
  CHECK(brows[0]["exit_code"].get<int>() == 0);
  CHECK(brows[1]["exit_code"].get<int>() == kExitCertificate);
  CHECK(fs::exists(fs::path(bad.output_dir) / "sweep.csv"));
}

// ---------------------------------------------------------------------------
// Error taxonomy and the command-line wrapper
// ---------------------------------------------------------------------------

TEST_CASE("runner: exit codes map the error taxonomy") {
  // Unknown command name: a configuration-level mistake.
  RunConfig cfg = load_run_config(ConfigDoc::parse_string(
      "[domain]\nresolution = 4\nextent = 1\n[output]\ndirectory = " +
      (fresh_dir("exit_codes") / "out").string() + "\n"));
  std::ostringstream log;
  CHECK(run_command("frobnicate", cfg, log).exit_code == kExitConfig);

  // A cap too small to converge: solver failure, with the manifest still
  // recording the partial result. The appended keys extend the [solver]
  // section the base text ends with.
  std::string stuck = std::string(kSmallReduce) +
                      "outer_tol = 1e-14\npolish = false\nouter_cap = 2\n";
  RunResult r = run_cfg("reduce-solve", "exit_solver", stuck);
  CHECK(r.exit_code == kExitSolver);
  CHECK(r.manifest["outcome"] == "solver failure");
  CHECK(r.manifest["reduced"]["converged"] == false);
  CHECK(fs::exists(fs::path(r.output_dir) / "manifest.json"));
}

TEST_CASE("cli: the wrapper maps argument and file problems to exit 2") {
  auto run = [](std::vector<const char*> argv) {
    return cli_main(int(argv.size()), argv.data());
  };
  CHECK(run({"nlmx", "eigs", "/nonexistent/config.ini"}) == kExitConfig);
  CHECK(run({"nlmx", "frobnicate", "x.ini"}) == kExitConfig);
  CHECK(run({"nlmx", "eigs"}) == kExitConfig);  // missing config argument
  CHECK(run({"nlmx", "--version"}) == 0);

  // A config rejected by the parser also lands on exit 2, via the wrapper.
  fs::path dir = fresh_dir("cli_badcfg");
  fs::path bad = dir / "bad.ini";
  write_text_file(bad.string(), "[domain]\nresolution = 1\nextent = 1\n");
  std::string path = bad.string();
  CHECK(run({"nlmx", "eigs", path.c_str()}) == kExitConfig);
}

TEST_CASE("runner: the thread count honors the environment variable") {
  setenv("NLMX_THREADS", "1", 1);
  const char* kerr = R"(
[domain]
resolution = 4
extent = 1

[nonlinearity]
model = kerr
)";
  RunResult r = run_cfg("check-model", "threads_env", kerr);
  unsetenv("NLMX_THREADS");
  REQUIRE(r.exit_code == kExitOk);
  CHECK(r.manifest["threads"].get<int>() == 1);
}
