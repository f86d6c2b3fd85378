#include "smoothgauge/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "smoothgauge/errors.hpp"
#include "smoothgauge/version.hpp"

namespace smoothgauge {

namespace {

std::vector<std::string> split_csv_line(const std::string& line, int lineno) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          field += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted)
    throw input_error("CSV line " + std::to_string(lineno) + ": unterminated quote");
  out.push_back(field);
  return out;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<int>(j);
  return -1;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (line[0] == '#') continue;
    auto fields = split_csv_line(line, lineno);
    if (t.header.empty()) {
      t.header = std::move(fields);
    } else {
      if (fields.size() != t.header.size())
        throw input_error("CSV line " + std::to_string(lineno) + ": expected " +
                          std::to_string(t.header.size()) + " fields, got " +
                          std::to_string(fields.size()));
      t.rows.push_back(std::move(fields));
    }
  }
  if (t.header.empty()) throw input_error("CSV: no header line");
  return t;
}

CsvTable read_csv_table(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw input_error("cannot open CSV: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_csv(buf.str());
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream f(path);
  if (!f) throw input_error("cannot write CSV: " + path);
  auto emit = [&f](const std::vector<std::string>& fields) {
    for (size_t j = 0; j < fields.size(); ++j) {
      if (j) f << ',';
      const bool needs_quotes = fields[j].find_first_of(",\"\n") != std::string::npos;
      if (needs_quotes) {
        f << '"';
        for (const char c : fields[j]) {
          if (c == '"') f << '"';
          f << c;
        }
        f << '"';
      } else {
        f << fields[j];
      }
    }
    f << '\n';
  };
  emit(header);
  for (const auto& row : rows) emit(row);
}

NamedVector read_id_value_csv(const std::string& path, const std::string& value_column) {
  const CsvTable t = read_csv_table(path);
  const int vcol = t.column(value_column);
  const int icol = t.column("area_id");
  if (icol < 0 || vcol < 0)
    throw input_error(path + ": need columns area_id and " + value_column);
  NamedVector out;
  out.values.resize(static_cast<Eigen::Index>(t.rows.size()));
  for (size_t k = 0; k < t.rows.size(); ++k) {
    out.ids.push_back(t.rows[k][icol]);
    try {
      out.values[static_cast<Eigen::Index>(k)] = std::stod(t.rows[k][vcol]);
    } catch (const std::exception&) {
      throw input_error(path + ": non-numeric " + value_column + " for area \"" +
                        t.rows[k][icol] + "\"");
    }
  }
  return out;
}

VectorXd align_by_id(const AdjacencyGraph& g, const NamedVector& v, const std::string& what) {
  VectorXd out(g.size());
  std::vector<bool> seen(g.size(), false);
  for (size_t k = 0; k < v.ids.size(); ++k) {
    const int i = g.index_of(v.ids[k]);
    if (i < 0) throw data_error(what + ": id \"" + v.ids[k] + "\" is not in the graph");
    if (seen[i]) throw data_error(what + ": duplicate id \"" + v.ids[k] + "\"");
    out[i] = v.values[static_cast<Eigen::Index>(k)];
    seen[i] = true;
  }
  for (int i = 0; i < g.size(); ++i)
    if (!seen[i]) throw data_error(what + ": no value for area \"" + g.area_ids[i] + "\"");
  return out;
}

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  if (std::strtod(buf, nullptr) == x) {
    // try shorter forms first; %.17g is the fallback that always round-trips
    for (int prec = 6; prec < 17; ++prec) {
      char shorter[40];
      std::snprintf(shorter, sizeof shorter, "%.*g", prec, x);
      if (std::strtod(shorter, nullptr) == x) return shorter;
    }
  }
  return buf;
}

std::string file_digest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot digest missing file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  const std::string s = buf.str();
  std::ostringstream out;
  out << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(s);
  return out.str();
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["tool_version"] = tool_version.empty() ? version : tool_version;
  j["seed"] = seed;
  j["config"] = nlohmann::json::parse(config_json.empty() ? "{}" : config_json);
  j["inputs"] = input_digests;
  j["outputs"] = outputs;
  j["wall_seconds"] = wall_seconds;
  if (max_rhat) j["diagnostics"]["max_rhat"] = *max_rhat;
  if (min_ess) j["diagnostics"]["min_ess"] = *min_ess;
  j["completed"] = completed;
  if (!error.empty()) j["error"] = error;
  return j.dump(2);
}

void RunManifest::write(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw input_error("cannot write manifest: " + path);
  f << to_json() << '\n';
}

}  // namespace smoothgauge
