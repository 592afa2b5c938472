#pragma once

#include <string>
#include <vector>

#include "stt/config.hpp"

namespace stt {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
  double seconds = 0.0;
  std::string detail;
};

// Deterministic run report: stage sections are (name, key, value) triples in
// insertion order; serialization is byte-stable for identical inputs.
struct RunReport {
  std::string experiment;
  std::string config_hash;
  std::string summation_mode = "pairwise-fixed-order";
  int workers = 0;
  std::vector<CriterionResult> criteria;
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, double>>>> sections;

  std::vector<std::pair<std::string, double>>& section(const std::string& name);
  std::string to_json() const;  // schema-versioned
  bool all_pass() const;
};

void write_text_file(const std::string& path, const std::string& content);
void write_report(const std::string& dir, const RunReport& report);
void write_manifest(const std::string& dir, const ExperimentConfig& cfg);

// Long-format CSV: header then rows; every cell is preformatted text.
struct CsvWriter {
  explicit CsvWriter(std::vector<std::string> header);
  void row(const std::vector<std::string>& cells);
  void save(const std::string& path) const;
  static std::string num(double v);

 private:
  std::size_t width_;
  std::string body_;
};

void ensure_dir(const std::string& dir);

}  // namespace stt
