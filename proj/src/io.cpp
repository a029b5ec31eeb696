#include "nlmx/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace nlmx {

namespace {

std::string fmt_g17(real v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_hex(real v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

// Full-token double parse; istream extraction rejects hexfloats, strtod
// accepts both decimal and hex forms.
real parse_real_token(const std::string& tok, const std::string& where) {
  const char* s = tok.c_str();
  char* end = nullptr;
  real v = std::strtod(s, &end);
  require(end == s + tok.size() && !tok.empty(),
          where + ": malformed number '" + tok + "'");
  return v;
}

}  // namespace

FieldDump FieldDump::of(const BoxGrid& g, const VecX& values) {
  require(values.size() == g.num_edges(),
          "field dump: value count does not match the grid's active edges");
  FieldDump d;
  d.nx = g.nx;
  d.ny = g.ny;
  d.nz = g.nz;
  d.Lx = g.Lx;
  d.Ly = g.Ly;
  d.Lz = g.Lz;
  d.values = values;
  return d;
}

bool FieldDump::matches(const BoxGrid& g) const {
  return nx == g.nx && ny == g.ny && nz == g.nz && Lx == g.Lx && Ly == g.Ly &&
         Lz == g.Lz;
}

void write_field_dump(const std::string& path, const FieldDump& dump,
                      bool binary) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open '" + path + "' for writing");
  out << "edgefield " << dump.nx << ' ' << dump.ny << ' ' << dump.nz << ' '
      << fmt_g17(dump.Lx) << ' ' << fmt_g17(dump.Ly) << ' ' << fmt_g17(dump.Lz)
      << ' ' << (binary ? "binary" : "text") << ' ' << dump.values.size()
      << '\n';
  if (binary) {
    out.write(reinterpret_cast<const char*>(dump.values.data()),
              std::streamsize(sizeof(real)) * dump.values.size());
  } else {
    for (Index i = 0; i < dump.values.size(); ++i) {
      out << fmt_hex(dump.values[i]) << '\n';
    }
  }
  out.flush();
  require(out.good(), "write to '" + path + "' failed");
}

FieldDump read_field_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open field dump '" + path + "'");
  std::string header;
  require(bool(std::getline(in, header)),
          "field dump '" + path + "': missing header line");

  std::istringstream hs(header);
  std::string magic, mode;
  FieldDump d;
  std::string lx, ly, lz;
  long long count = -1;
  hs >> magic >> d.nx >> d.ny >> d.nz >> lx >> ly >> lz >> mode >> count;
  require(bool(hs) && magic == "edgefield",
          "field dump '" + path +
              "': header must read 'edgefield nx ny nz Lx Ly Lz mode count'");
  require(d.nx > 0 && d.ny > 0 && d.nz > 0,
          "field dump '" + path + "': non-positive lattice size in header");
  d.Lx = parse_real_token(lx, path);
  d.Ly = parse_real_token(ly, path);
  d.Lz = parse_real_token(lz, path);
  require(count >= 0, "field dump '" + path + "': negative value count");
  d.values.resize(count);

  if (mode == "binary") {
    in.read(reinterpret_cast<char*>(d.values.data()),
            std::streamsize(sizeof(real)) * count);
    require(in.gcount() == std::streamsize(sizeof(real)) * count,
            "field dump '" + path + "': truncated binary payload");
  } else if (mode == "text") {
    std::string tok;
    for (long long i = 0; i < count; ++i) {
      require(bool(in >> tok),
              "field dump '" + path + "': expected " + std::to_string(count) +
                  " values, file ends after " + std::to_string(i));
      d.values[i] = parse_real_token(tok, path);
    }
  } else {
    throw invalid_input_error("field dump '" + path + "': unknown mode '" +
                              mode + "' (expected text or binary)");
  }
  return d;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  require(out.good(), "write to '" + path + "' failed");
}

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= uint64_t(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view bytes) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> columns)
    : columns_(std::move(columns)) {
  require(!columns_.empty(), "csv table needs at least one column");
}

void CsvTable::add_row(std::vector<std::string> cells) {
  require(cells.size() == columns_.size(),
          "csv row width does not match the header");
  rows_.push_back(std::move(cells));
}

std::string CsvTable::to_string() const {
  std::ostringstream out;
  for (size_t c = 0; c < columns_.size(); ++c) {
    out << (c ? "," : "") << columns_[c];
  }
  out << '\n';
  for (const auto& row : rows_) {
    for (size_t c = 0; c < row.size(); ++c) {
      out << (c ? "," : "") << row[c];
    }
    out << '\n';
  }
  return out.str();
}

void CsvTable::write(const std::string& path) const {
  write_text_file(path, to_string());
}

std::string CsvTable::num(real v) { return fmt_g17(v); }

std::string CsvTable::num(Index v) { return std::to_string(v); }

}  // namespace nlmx
