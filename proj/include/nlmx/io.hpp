#pragma once

#include "nlmx/grid.hpp"
#include "nlmx/types.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace nlmx {

// On-disk edge-field container. The file starts with one header line
//
//   edgefield nx ny nz Lx Ly Lz <mode> <count>
//
// where mode is `text` or `binary` and count is the number of stored values
// (the active-edge count, which a mask can make smaller than the full
// lattice). Text mode stores one C99 hexadecimal float per line and binary
// mode stores count raw native doubles immediately after the header, so both
// modes round-trip bit-exactly. Header extents use 17 significant digits,
// which also reproduces the original doubles exactly.
struct FieldDump {
  int nx = 0, ny = 0, nz = 0;
  real Lx = 0, Ly = 0, Lz = 0;
  VecX values;

  static FieldDump of(const BoxGrid& g, const VecX& values);
  // Same lattice and extents; value count is checked against the grid's
  // active edges separately so mask mismatches get their own message.
  [[nodiscard]] bool matches(const BoxGrid& g) const;
};

void write_field_dump(const std::string& path, const FieldDump& dump,
                      bool binary = false);
FieldDump read_field_dump(const std::string& path);

// Whole-file text helpers; failures throw invalid_input_error naming the
// path.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Fowler-Noll-Vo 1a content digest, printed as 16 hex digits. Used as the
// config hash embedded in every output artifact.
uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

// Column-checked CSV table with round-trip numeric formatting.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);

  void add_row(std::vector<std::string> cells);
  [[nodiscard]] std::string to_string() const;
  void write(const std::string& path) const;

  [[nodiscard]] Index rows() const { return Index(rows_.size()); }

  static std::string num(real v);
  static std::string num(Index v);

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace nlmx
