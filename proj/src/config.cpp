#include "nlmx/config.hpp"

#include "nlmx/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace nlmx {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

real to_real(const std::string& tok, const std::string& ctx) {
  const char* s = tok.c_str();
  char* end = nullptr;
  real v = std::strtod(s, &end);
  require(!tok.empty() && end == s + tok.size(),
          ctx + ": '" + tok + "' is not a number");
  return v;
}

long to_int(const std::string& tok, const std::string& ctx) {
  const char* s = tok.c_str();
  char* end = nullptr;
  long v = std::strtol(s, &end, 10);
  require(!tok.empty() && end == s + tok.size(),
          ctx + ": '" + tok + "' is not an integer");
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// ConfigDoc
// ---------------------------------------------------------------------------

ConfigDoc ConfigDoc::parse_file(const std::string& path) {
  return parse_string(read_text_file(path), path);
}

ConfigDoc ConfigDoc::parse_string(std::string text, std::string name) {
  ConfigDoc doc;
  doc.name_ = std::move(name);
  doc.raw_ = std::move(text);

  std::istringstream in(doc.raw_);
  std::string line;
  std::string section;
  int lineno = 0;
  auto fail_at = [&](const std::string& msg) -> void {
    throw invalid_input_error(doc.name_ + ":" + std::to_string(lineno) + ": " +
                              msg);
  };

  while (std::getline(in, line)) {
    ++lineno;
    // Strip comments; values never contain '#'.
    if (size_t h = line.find('#'); h != std::string::npos) line.erase(h);
    std::string t = trim(line);
    if (t.empty()) continue;

    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        fail_at("malformed section header '" + t + "'");
      }
      section = lower(trim(t.substr(1, t.size() - 2)));
      if (section.empty()) fail_at("empty section name");
      if (doc.sections_.count(section)) {
        fail_at("section [" + section + "] already declared at line " +
                std::to_string(doc.section_lines_[section]));
      }
      doc.sections_[section];
      doc.section_lines_[section] = lineno;
      continue;
    }

    size_t eq = t.find('=');
    if (eq == std::string::npos) {
      fail_at("expected 'key = value' or a [section] header, got '" + t + "'");
    }
    std::string key = lower(trim(t.substr(0, eq)));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) fail_at("empty key");
    if (section.empty()) {
      fail_at("key '" + key + "' appears before any [section] header");
    }
    auto& sec = doc.sections_[section];
    if (auto it = sec.find(key); it != sec.end()) {
      fail_at("duplicate key '" + key + "' (first set at line " +
              std::to_string(it->second.line) + ")");
    }
    sec[key] = Entry{value, lineno, false};
  }
  return doc;
}

bool ConfigDoc::has_section(const std::string& s) const {
  return sections_.count(lower(s)) != 0;
}

bool ConfigDoc::has(const std::string& s, const std::string& k) const {
  return find(s, k) != nullptr;
}

std::vector<std::string> ConfigDoc::keys_in(const std::string& s) const {
  std::vector<std::string> out;
  auto it = sections_.find(lower(s));
  if (it == sections_.end()) return out;
  out.reserve(it->second.size());
  for (const auto& [k, e] : it->second) out.push_back(k);
  return out;
}

const ConfigDoc::Entry* ConfigDoc::find(const std::string& s,
                                        const std::string& k) const {
  auto it = sections_.find(lower(s));
  if (it == sections_.end()) return nullptr;
  auto jt = it->second.find(lower(k));
  if (jt == it->second.end()) return nullptr;
  return &jt->second;
}

const ConfigDoc::Entry& ConfigDoc::entry(const std::string& s,
                                         const std::string& k) const {
  const Entry* e = find(s, k);
  if (e == nullptr) {
    std::string msg = name_ + ": missing required key '" + k + "' in [" + s +
                      "]";
    if (!has_section(s)) msg += " (the section itself is absent)";
    throw invalid_input_error(msg);
  }
  e->used = true;
  return *e;
}

std::string ConfigDoc::get_string(const std::string& s,
                                  const std::string& k) const {
  return entry(s, k).value;
}

std::string ConfigDoc::get_string(const std::string& s, const std::string& k,
                                  const std::string& fallback) const {
  const Entry* e = find(s, k);
  if (e == nullptr) return fallback;
  e->used = true;
  return e->value;
}

real ConfigDoc::get_real(const std::string& s, const std::string& k) const {
  const Entry& e = entry(s, k);
  return to_real(e.value, name_ + ":" + std::to_string(e.line));
}

real ConfigDoc::get_real(const std::string& s, const std::string& k,
                         real fallback) const {
  const Entry* e = find(s, k);
  if (e == nullptr) return fallback;
  e->used = true;
  return to_real(e->value, name_ + ":" + std::to_string(e->line));
}

long ConfigDoc::get_int(const std::string& s, const std::string& k) const {
  const Entry& e = entry(s, k);
  return to_int(e.value, name_ + ":" + std::to_string(e.line));
}

long ConfigDoc::get_int(const std::string& s, const std::string& k,
                        long fallback) const {
  const Entry* e = find(s, k);
  if (e == nullptr) return fallback;
  e->used = true;
  return to_int(e->value, name_ + ":" + std::to_string(e->line));
}

bool ConfigDoc::get_bool(const std::string& s, const std::string& k,
                         bool fallback) const {
  const Entry* e = find(s, k);
  if (e == nullptr) return fallback;
  e->used = true;
  std::string v = lower(e->value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw invalid_input_error(name_ + ":" + std::to_string(e->line) + ": '" +
                            e->value + "' is not a boolean");
}

std::vector<real> ConfigDoc::get_reals(const std::string& s,
                                       const std::string& k) const {
  const Entry& e = entry(s, k);
  std::vector<real> out;
  for (const std::string& tok : split_tokens(e.value)) {
    out.push_back(to_real(tok, name_ + ":" + std::to_string(e.line)));
  }
  require(!out.empty(), name_ + ":" + std::to_string(e.line) + ": key '" + k +
                            "' has an empty value");
  return out;
}

std::vector<std::string> ConfigDoc::get_tokens(const std::string& s,
                                               const std::string& k) const {
  return split_tokens(entry(s, k).value);
}

void ConfigDoc::fail(const std::string& s, const std::string& k,
                     const std::string& msg) const {
  int line = 0;
  if (const Entry* e = find(s, k); e != nullptr) {
    line = e->line;
  } else if (auto it = section_lines_.find(lower(s));
             it != section_lines_.end()) {
    line = it->second;
  }
  throw invalid_input_error(name_ + ":" + std::to_string(line) + ": " + msg);
}

void ConfigDoc::check_all_consumed() const {
  std::vector<std::string> bad;
  for (const auto& [sec, entries] : sections_) {
    for (const auto& [key, e] : entries) {
      if (!e.used) {
        bad.push_back("line " + std::to_string(e.line) + ": [" + sec + "] " +
                      key);
      }
    }
  }
  if (!bad.empty()) {
    std::string msg = name_ + ": unknown key";
    if (bad.size() > 1) msg += "s";
    for (const auto& b : bad) msg += "\n  " + b;
    throw invalid_input_error(msg);
  }
}

// ---------------------------------------------------------------------------
// Typed loading
// ---------------------------------------------------------------------------

namespace {

// Forms: one scalar | "diag a b c" | nine row-major entries (symmetric).
TensorSpec parse_tensor(const ConfigDoc& doc, const std::string& sec,
                        const std::string& key,
                        const std::vector<std::string>& toks) {
  TensorSpec t;
  auto bad = [&](const std::string& msg) -> void { doc.fail(sec, key, msg); };
  if (toks.size() == 1) {
    real v = to_real(toks[0], doc.name());
    t.value = v * Mat3::Identity();
    t.scalar = true;
    t.scalar_value = v;
    return t;
  }
  t.scalar = false;
  if (toks.size() == 4 && lower(toks[0]) == "diag") {
    for (int i = 0; i < 3; ++i) {
      t.value(i, i) = to_real(toks[size_t(i) + 1], doc.name());
    }
    t.value(0, 1) = t.value(0, 2) = t.value(1, 0) = 0;
    t.value(1, 2) = t.value(2, 0) = t.value(2, 1) = 0;
    return t;
  }
  if (toks.size() == 9) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        t.value(i, j) = to_real(toks[size_t(3 * i + j)], doc.name());
      }
    }
    real scale = std::max(real(1), t.value.cwiseAbs().maxCoeff());
    if ((t.value - t.value.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * scale) {
      bad("full tensors must be symmetric");
    }
    return t;
  }
  doc.fail(sec, key, "expected a scalar, 'diag a b c', or nine row-major entries");
}

TensorSpec get_tensor(const ConfigDoc& doc, const std::string& sec,
                      const std::string& key, real fallback_scalar) {
  if (!doc.has(sec, key)) {
    TensorSpec t;
    t.value = fallback_scalar * Mat3::Identity();
    t.scalar = true;
    t.scalar_value = fallback_scalar;
    return t;
  }
  return parse_tensor(doc, sec, key, doc.get_tokens(sec, key));
}

DomainConfig load_domain(const ConfigDoc& doc) {
  DomainConfig d;
  require(doc.has_section("domain"),
          doc.name() + ": missing required section [domain]");

  std::vector<real> res = doc.get_reals("domain", "resolution");
  if (res.size() == 1) res = {res[0], res[0], res[0]};
  if (res.size() != 3) {
    doc.fail("domain", "resolution", "resolution needs 1 or 3 integers");
  }
  for (real v : res) {
    if (v != std::floor(v) || v < 2 || v > 512) {
      doc.fail("domain", "resolution",
               "each resolution must be an integer in [2, 512]");
    }
  }
  d.nx = int(res[0]);
  d.ny = int(res[1]);
  d.nz = int(res[2]);

  std::vector<real> ext = doc.get_reals("domain", "extent");
  if (ext.size() == 1) ext = {ext[0], ext[0], ext[0]};
  if (ext.size() != 3) {
    doc.fail("domain", "extent", "extent needs 1 or 3 lengths");
  }
  for (real v : ext) {
    if (!(v > 0)) doc.fail("domain", "extent", "extents must be positive");
  }
  d.Lx = ext[0];
  d.Ly = ext[1];
  d.Lz = ext[2];

  if (doc.has("domain", "mask")) {
    std::vector<std::string> toks = doc.get_tokens("domain", "mask");
    d.mask.kind = lower(toks.at(0));
    for (size_t i = 1; i < toks.size(); ++i) {
      d.mask.params.push_back(to_real(toks[i], doc.name()));
    }
    const std::map<std::string, size_t> arity = {{"none", 0},
                                                 {"box_cut", 6},
                                                 {"ball_cut", 4},
                                                 {"keep_shell", 5},
                                                 {"keep_cylinder", 3}};
    auto it = arity.find(d.mask.kind);
    if (it == arity.end()) {
      doc.fail("domain", "mask",
               "unknown mask kind '" + d.mask.kind +
                   "' (none, box_cut, ball_cut, keep_shell, keep_cylinder)");
    }
    if (d.mask.params.size() != it->second) {
      doc.fail("domain", "mask",
               "mask '" + d.mask.kind + "' needs " +
                   std::to_string(it->second) + " parameters");
    }
  }

  if (doc.has("domain", "cyl_resolution")) {
    std::vector<real> cr = doc.get_reals("domain", "cyl_resolution");
    if (cr.size() != 2 || cr[0] != std::floor(cr[0]) ||
        cr[1] != std::floor(cr[1]) || cr[0] < 2 || cr[1] < 2) {
      doc.fail("domain", "cyl_resolution",
               "cyl_resolution needs two integers >= 2 (nr nz)");
    }
    d.cyl_nr = int(cr[0]);
    d.cyl_nz = int(cr[1]);
  }
  return d;
}

MaterialsConfig load_materials(const ConfigDoc& doc) {
  MaterialsConfig m;
  if (!doc.has_section("materials")) return m;  // all-identity defaults

  m.mu = get_tensor(doc, "materials", "mu", 1.0);
  bool has_V = doc.has("materials", "v");
  bool has_omega = doc.has("materials", "omega");
  bool has_eps = doc.has("materials", "eps");
  if (has_V && (has_omega || has_eps)) {
    doc.fail("materials", "v",
             "give either V directly or the omega/eps pair, not both");
  }
  if (has_omega != has_eps) {
    doc.fail("materials", has_omega ? "omega" : "eps",
             "omega and eps must be given together");
  }
  if (has_omega) {
    m.via_omega = true;
    m.omega = doc.get_real("materials", "omega");
    m.eps = get_tensor(doc, "materials", "eps", 1.0);
    if (!(m.omega > 0)) {
      doc.fail("materials", "omega", "omega must be positive");
    }
  } else {
    m.V = get_tensor(doc, "materials", "v", 1.0);
  }

  // Region overrides: region<k>.box plus region<k>.mu / region<k>.v. Later
  // regions win where boxes overlap.
  for (int k = 1;; ++k) {
    std::string base = "region" + std::to_string(k);
    bool any = doc.has("materials", base + ".box") ||
               doc.has("materials", base + ".mu") ||
               doc.has("materials", base + ".v");
    if (!any) break;
    RegionSpec r;
    if (!doc.has("materials", base + ".box")) {
      doc.fail("materials", base + ".mu",
               base + " needs a " + base + ".box = x0 y0 z0 x1 y1 z1 line");
    }
    std::vector<real> b = doc.get_reals("materials", base + ".box");
    if (b.size() != 6) {
      doc.fail("materials", base + ".box",
               "region box needs six numbers: x0 y0 z0 x1 y1 z1");
    }
    r.lo = Vec3(b[0], b[1], b[2]);
    r.hi = Vec3(b[3], b[4], b[5]);
    if (!(r.lo.x() < r.hi.x() && r.lo.y() < r.hi.y() && r.lo.z() < r.hi.z())) {
      doc.fail("materials", base + ".box",
               "region box must satisfy x0 < x1, y0 < y1, z0 < z1");
    }
    if (doc.has("materials", base + ".mu")) {
      r.mu = parse_tensor(doc, "materials", base + ".mu",
                          doc.get_tokens("materials", base + ".mu"));
    }
    if (doc.has("materials", base + ".v")) {
      r.V = parse_tensor(doc, "materials", base + ".v",
                         doc.get_tokens("materials", base + ".v"));
    }
    if (!r.mu && !r.V) {
      doc.fail("materials", base + ".box",
               base + " overrides neither mu nor V");
    }
    m.regions.push_back(r);
  }
  return m;
}

NonlinearityConfig load_nonlinearity(const ConfigDoc& doc) {
  NonlinearityConfig n;
  if (!doc.has_section("nonlinearity")) return n;

  std::string kind = lower(doc.get_string("nonlinearity", "model", "none"));
  bool known = false;
  for (ModelKind k :
       {ModelKind::None, ModelKind::Kerr, ModelKind::Saturation,
        ModelKind::CubicQuintic, ModelKind::DoublePowerPiecewise,
        ModelKind::DoublePowerSmooth}) {
    if (kind == model_kind_name(k)) {
      n.kind = k;
      known = true;
      break;
    }
  }
  if (!known) {
    doc.fail("nonlinearity", "model",
             "unknown model '" + kind +
                 "' (none, kerr, saturation, cubic_quintic, "
                 "double_power_piecewise, double_power_smooth)");
  }
  n.chi3 = doc.get_real("nonlinearity", "chi3", 1.0);
  n.chi5 = doc.get_real("nonlinearity", "chi5", 1.0);
  n.gamma = doc.get_real("nonlinearity", "gamma", 1.0);
  n.p = doc.get_real("nonlinearity", "p", 4.0);
  n.q = doc.get_real("nonlinearity", "q", 8.0);
  n.M = get_tensor(doc, "nonlinearity", "m", 1.0);
  return n;
}

SolverConfig load_solver(const ConfigDoc& doc) {
  SolverConfig s;
  const std::string sec = "solver";
  if (!doc.has_section(sec)) return s;

  NehariOptions& no = s.nehari;
  no.fiber_tol = doc.get_real(sec, "fiber_tol", no.fiber_tol);
  no.outer_tol = doc.get_real(sec, "outer_tol", no.outer_tol);
  no.fiber_cap = int(doc.get_int(sec, "fiber_cap", no.fiber_cap));
  no.outer_cap = int(doc.get_int(sec, "outer_cap", no.outer_cap));
  no.line_cap = int(doc.get_int(sec, "line_cap", no.line_cap));
  no.starts = int(doc.get_int(sec, "starts", no.starts));
  no.seed = uint64_t(doc.get_int(sec, "rng_seed", long(no.seed)));
  no.polish = doc.get_bool(sec, "polish", no.polish);
  no.deflate = doc.get_bool(sec, "deflate", no.deflate);
  no.deflation_weight =
      doc.get_real(sec, "deflation_weight", no.deflation_weight);
  no.beta_witness_samples =
      int(doc.get_int(sec, "beta_samples", no.beta_witness_samples));
  if (!(no.fiber_tol > 0) || !(no.outer_tol > 0)) {
    doc.fail(sec, "outer_tol", "tolerances must be positive");
  }
  if (no.starts < 1) doc.fail(sec, "starts", "starts must be >= 1");
  if (no.fiber_cap < 1 || no.outer_cap < 1 || no.line_cap < 1) {
    doc.fail(sec, "outer_cap", "iteration caps must be >= 1");
  }

  EigenOptions& eo = s.eig;
  eo.n_modes = doc.get_int(sec, "n_modes", eo.n_modes);
  eo.tol = doc.get_real(sec, "eig_tol", eo.tol);
  eo.block = doc.get_int(sec, "eig_block", eo.block);
  eo.max_iter = doc.get_int(sec, "eig_max_iter", eo.max_iter);
  eo.graddiv_s = doc.get_real(sec, "graddiv_shift", eo.graddiv_s);
  eo.seed = no.seed;
  if (eo.n_modes < 1) doc.fail(sec, "n_modes", "n_modes must be >= 1");
  if (!(eo.tol > 0)) doc.fail(sec, "eig_tol", "eig_tol must be positive");

  s.threshold = doc.get_real(sec, "threshold", s.threshold);
  if (!(s.threshold > 0)) {
    doc.fail(sec, "threshold", "threshold must be positive");
  }
  s.kernel = lower(doc.get_string(sec, "kernel", s.kernel));
  if (s.kernel != "project" && s.kernel != "graddiv" && s.kernel != "both") {
    doc.fail(sec, "kernel",
             "kernel must be project, graddiv, or both, got '" + s.kernel +
                 "'");
  }
  s.symmetry = doc.get_string(sec, "symmetry", s.symmetry);
  if (s.symmetry != "none" && s.symmetry != "S1" && s.symmetry != "S2") {
    doc.fail(sec, "symmetry",
             "symmetry must be none, S1, or S2, got '" + s.symmetry + "'");
  }
  return s;
}

OutputConfig load_output(const ConfigDoc& doc) {
  OutputConfig o;
  if (!doc.has_section("output")) return o;
  o.directory = doc.get_string("output", "directory", o.directory);
  std::string fmt = lower(doc.get_string("output", "format", "text"));
  if (fmt != "text" && fmt != "binary") {
    doc.fail("output", "format", "format must be text or binary");
  }
  o.binary = (fmt == "binary");
  o.write_fields = doc.get_bool("output", "write_fields", o.write_fields);
  return o;
}

std::optional<SweepConfig> load_sweep(const ConfigDoc& doc) {
  if (!doc.has_section("sweep")) return std::nullopt;
  SweepConfig s;
  s.parameter = lower(doc.get_string("sweep", "parameter"));
  if (s.parameter != "lambda" && s.parameter != "p" && s.parameter != "chi3") {
    doc.fail("sweep", "parameter",
             "sweep parameter must be lambda, p, or chi3");
  }
  if (doc.has("sweep", "values")) {
    s.values = doc.get_reals("sweep", "values");
  } else {
    real from = doc.get_real("sweep", "from");
    real to = doc.get_real("sweep", "to");
    long count = doc.get_int("sweep", "count");
    if (count < 2) doc.fail("sweep", "count", "count must be >= 2");
    for (long i = 0; i < count; ++i) {
      s.values.push_back(from + (to - from) * real(i) / real(count - 1));
    }
  }
  s.command = lower(doc.get_string("sweep", "command", s.command));
  if (s.command != "solve" && s.command != "reduce-solve" &&
      s.command != "eigs") {
    doc.fail("sweep", "command",
             "sweep command must be solve, reduce-solve, or eigs");
  }
  return s;
}

std::optional<OracleConfig> load_oracle(const ConfigDoc& doc) {
  if (!doc.has_section("oracle")) return std::nullopt;
  OracleConfig o;
  if (doc.has("oracle", "v")) o.V_coeffs = doc.get_reals("oracle", "v");
  if (doc.has("oracle", "gamma")) {
    o.Gamma_coeffs = doc.get_reals("oracle", "gamma");
  }
  o.p = doc.get_real("oracle", "p", o.p);
  if (!(o.p > 2)) doc.fail("oracle", "p", "the exponent must satisfy p > 2");
  if (doc.has("oracle", "center")) {
    std::vector<real> c = doc.get_reals("oracle", "center");
    if (c.size() != 3) doc.fail("oracle", "center", "center needs x y z");
    o.center = Vec3(c[0], c[1], c[2]);
  }
  o.r_max = doc.get_real("oracle", "r_max", o.r_max);
  if (!(o.r_max > 0)) doc.fail("oracle", "r_max", "r_max must be positive");
  o.n_samples = int(doc.get_int("oracle", "samples", o.n_samples));
  if (o.n_samples < 2) doc.fail("oracle", "samples", "samples must be >= 2");
  return o;
}

}  // namespace

RunConfig load_run_config(const ConfigDoc& doc) {
  RunConfig cfg;
  cfg.domain = load_domain(doc);
  cfg.materials = load_materials(doc);
  cfg.nonlinearity = load_nonlinearity(doc);
  cfg.solver = load_solver(doc);
  cfg.output = load_output(doc);
  cfg.sweep = load_sweep(doc);
  cfg.oracle = load_oracle(doc);
  cfg.hash = fnv1a64_hex(doc.raw());
  cfg.source = doc.name();
  doc.check_all_consumed();

  // Early model validation with a config anchor; grid-independent because
  // config coefficients are uniform.
  try {
    make_model(cfg.nonlinearity).validate(1);
  } catch (const invalid_input_error& e) {
    doc.fail("nonlinearity", "model", e.what());
  }
  return cfg;
}

RunConfig load_run_config_file(const std::string& path) {
  return load_run_config(ConfigDoc::parse_file(path));
}

BoxGrid make_box_grid(const DomainConfig& d) {
  BoxGrid::MaskPredicate pred = nullptr;
  const std::vector<real>& p = d.mask.params;
  if (d.mask.kind == "box_cut") {
    pred = mask_box_cut(Vec3(p[0], p[1], p[2]), Vec3(p[3], p[4], p[5]));
  } else if (d.mask.kind == "ball_cut") {
    pred = mask_ball_cut(Vec3(p[0], p[1], p[2]), p[3]);
  } else if (d.mask.kind == "keep_shell") {
    pred = mask_keep_shell(Vec3(p[0], p[1], p[2]), p[3], p[4]);
  } else if (d.mask.kind == "keep_cylinder") {
    pred = mask_keep_cylinder(Vec3(p[0], p[1], 0), p[2]);
  }
  return BoxGrid(d.nx, d.ny, d.nz, d.Lx, d.Ly, d.Lz, pred);
}

MaterialTensors make_materials(const BoxGrid& g, const MaterialsConfig& m) {
  auto region_value = [&m](const Vec3& x, bool want_mu,
                           const Mat3& base) -> Mat3 {
    Mat3 v = base;
    for (const RegionSpec& r : m.regions) {
      bool inside = (x.array() >= r.lo.array()).all() &&
                    (x.array() <= r.hi.array()).all();
      if (!inside) continue;
      if (want_mu && r.mu) v = r.mu->value;
      if (!want_mu && r.V) v = r.V->value;
    }
    return v;
  };

  MaterialTensors out;
  if (m.via_omega) {
    out = MaterialTensors::from_omega_eps(
        g, m.omega, [&](const Vec3& x) {
          return region_value(x, false, m.eps.value);
        });
  } else if (m.regions.empty() && m.mu.scalar && m.V.scalar) {
    out = MaterialTensors::isotropic(m.mu.scalar_value, m.V.scalar_value);
  } else if (m.regions.empty()) {
    out = MaterialTensors::from_fields(
        g, [&](const Vec3&) { return m.mu.value; },
        [&](const Vec3&) { return m.V.value; });
  } else {
    out = MaterialTensors::from_fields(
        g, [&](const Vec3& x) { return region_value(x, true, m.mu.value); },
        [&](const Vec3& x) { return region_value(x, false, m.V.value); });
  }
  out.validate(g.num_cells());
  return out;
}

NonlinearityModel make_model(const NonlinearityConfig& n) {
  NonlinearityModel m;
  m.kind = n.kind;
  m.chi3 = n.chi3;
  m.chi5 = n.chi5;
  m.gamma = n.gamma;
  m.p = n.p;
  m.q = n.q;
  m.M = n.M.value;
  return m;
}

}  // namespace nlmx
