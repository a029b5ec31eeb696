#pragma once

#include "nlmx/grid.hpp"
#include "nlmx/material.hpp"
#include "nlmx/nehari.hpp"
#include "nlmx/spectrum.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nlmx {

// Flat-sectioned key-value configuration text ([section] headers, key = value
// lines, # comments). Parsing is total: every syntactic defect reports
// "<name>:<line>: message". Typed getters record which keys they consumed;
// check_all_consumed() then reports leftovers with their lines, so a typo
// never falls back silently to a default.
class ConfigDoc {
 public:
  static ConfigDoc parse_file(const std::string& path);
  static ConfigDoc parse_string(std::string text,
                                std::string name = "<config>");

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] const std::string& raw() const { return raw_; }

  [[nodiscard]] bool has_section(const std::string& s) const;
  [[nodiscard]] bool has(const std::string& s, const std::string& k) const;
  [[nodiscard]] std::vector<std::string> keys_in(const std::string& s) const;

  // The no-default forms require the key to be present.
  [[nodiscard]] std::string get_string(const std::string& s,
                                       const std::string& k) const;
  [[nodiscard]] std::string get_string(const std::string& s,
                                       const std::string& k,
                                       const std::string& fallback) const;
  [[nodiscard]] real get_real(const std::string& s, const std::string& k) const;
  [[nodiscard]] real get_real(const std::string& s, const std::string& k,
                              real fallback) const;
  [[nodiscard]] long get_int(const std::string& s, const std::string& k) const;
  [[nodiscard]] long get_int(const std::string& s, const std::string& k,
                             long fallback) const;
  [[nodiscard]] bool get_bool(const std::string& s, const std::string& k,
                              bool fallback) const;
  [[nodiscard]] std::vector<real> get_reals(const std::string& s,
                                            const std::string& k) const;
  [[nodiscard]] std::vector<std::string> get_tokens(const std::string& s,
                                                    const std::string& k) const;

  // Line-anchored semantic error for a key (or a whole section when k is
  // empty).
  [[noreturn]] void fail(const std::string& s, const std::string& k,
                         const std::string& msg) const;
  void check_all_consumed() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };

  std::string name_, raw_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
  std::map<std::string, int> section_lines_;

  const Entry& entry(const std::string& s, const std::string& k) const;
  const Entry* find(const std::string& s, const std::string& k) const;
};

// ---------------------------------------------------------------------------
// Typed run configuration.
// ---------------------------------------------------------------------------

struct MaskSpec {
  std::string kind = "none";  // none | box_cut | ball_cut | keep_shell |
                              // keep_cylinder
  std::vector<real> params;
};

struct DomainConfig {
  int nx = 0, ny = 0, nz = 0;
  real Lx = 0, Ly = 0, Lz = 0;
  MaskSpec mask;
  // Half-plane lattice for the azimuthal reduction; 0 = derive from the box
  // resolution (nr = nx/2, nz = box nz).
  int cyl_nr = 0, cyl_nz = 0;
};

// Uniform symmetric 3x3 coefficient; scalar configs keep the scalar value so
// commands with scalar-only contracts can gate on it.
struct TensorSpec {
  Mat3 value = Mat3::Identity();
  bool scalar = true;
  real scalar_value = 1;
};

struct RegionSpec {
  Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
  std::optional<TensorSpec> mu, V;
};

struct MaterialsConfig {
  TensorSpec mu, V;
  bool via_omega = false;
  real omega = 1;
  TensorSpec eps;
  std::vector<RegionSpec> regions;
};

struct NonlinearityConfig {
  ModelKind kind = ModelKind::None;
  real chi3 = 1, chi5 = 1, gamma = 1, p = 4, q = 8;
  TensorSpec M;
};

struct SolverConfig {
  NehariOptions nehari;
  EigenOptions eig;
  std::string symmetry = "none";   // none | S1 | S2
  std::string kernel = "project";  // project | graddiv | both
  real threshold = 1.0;
};

struct OutputConfig {
  std::string directory = "out";
  bool binary = false;
  bool write_fields = true;
};

struct SweepConfig {
  std::string parameter;  // lambda | p | chi3
  std::vector<real> values;
  std::string command = "solve";  // solve | reduce-solve | eigs
};

// Radial profiles are polynomials in r = |x - center|, lowest degree first.
struct OracleConfig {
  std::vector<real> V_coeffs{1};
  std::vector<real> Gamma_coeffs{1};
  real p = 4;
  Vec3 center = Vec3::Zero();
  real r_max = 1;
  int n_samples = 512;
};

struct RunConfig {
  DomainConfig domain;
  MaterialsConfig materials;
  NonlinearityConfig nonlinearity;
  SolverConfig solver;
  OutputConfig output;
  std::optional<SweepConfig> sweep;
  std::optional<OracleConfig> oracle;
  std::string hash;    // content digest of the raw text
  std::string source;  // document name, for messages and manifests
};

RunConfig load_run_config(const ConfigDoc& doc);
RunConfig load_run_config_file(const std::string& path);

// Object factories for the run pipeline.
BoxGrid make_box_grid(const DomainConfig& d);
MaterialTensors make_materials(const BoxGrid& g, const MaterialsConfig& m);
NonlinearityModel make_model(const NonlinearityConfig& n);

}  // namespace nlmx
