#pragma once

// File plumbing shared by the CLI and the study drivers: small CSV reader and
// writer, id-keyed column joins against a graph's area ordering, FNV-1a
// content digests, and the run manifest written next to every output set.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "smoothgauge/graph.hpp"
#include "smoothgauge/numerics.hpp"

namespace smoothgauge {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;  // -1 when absent
};

// comma-separated, first line is the header; double quotes protect separators
CsvTable parse_csv(const std::string& text);
CsvTable read_csv_table(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// two-column id,value file (e.g. counts or populations)
struct NamedVector {
  std::vector<std::string> ids;
  VectorXd values;
};
NamedVector read_id_value_csv(const std::string& path, const std::string& value_column);

// reorder values into the graph's area order; every area must be present
VectorXd align_by_id(const AdjacencyGraph& g, const NamedVector& v, const std::string& what);

// content digests for the manifest
uint64_t fnv1a64(std::string_view bytes);
std::string file_digest(const std::string& path);  // "fnv1a64:<16 hex digits>"

// shortest representation that round-trips a double
std::string format_double(double x);

struct RunManifest {
  std::string command;                               // argv echo
  std::string tool_version;
  uint64_t seed = 0;
  std::string config_json = "{}";                    // command-specific settings
  std::map<std::string, std::string> input_digests;  // path -> digest
  std::vector<std::string> outputs;
  double wall_seconds = 0;
  std::optional<double> max_rhat;
  std::optional<double> min_ess;
  bool completed = false;                            // false = partial failure
  std::string error;

  std::string to_json() const;
  void write(const std::string& path) const;
};

}  // namespace smoothgauge
