#include "stt/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "stt/error.hpp"

namespace stt {

std::vector<std::pair<std::string, double>>& RunReport::section(const std::string& name) {
  for (auto& s : sections)
    if (s.first == name) return s.second;
  sections.emplace_back(name, std::vector<std::pair<std::string, double>>{});
  return sections.back().second;
}

bool RunReport::all_pass() const {
  for (const auto& c : criteria)
    if (!c.pass) return false;
  return true;
}

std::string RunReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = "stt-report-v1";
  j["experiment"] = experiment;
  j["config_hash"] = config_hash;
  j["summation_mode"] = summation_mode;
  j["workers"] = workers;
  j["criteria"] = nlohmann::ordered_json::array();
  for (const auto& c : criteria) {
    nlohmann::ordered_json e;
    e["id"] = c.id;
    e["name"] = c.name;
    e["pass"] = c.pass;
    e["measured"] = c.measured;
    e["threshold"] = c.threshold;
    e["detail"] = c.detail;
    j["criteria"].push_back(e);
  }
  j["stages"] = nlohmann::ordered_json::object();
  for (const auto& [name, entries] : sections) {
    nlohmann::ordered_json s = nlohmann::ordered_json::object();
    for (const auto& [k, v] : entries) s[k] = v;
    j["stages"][name] = s;
  }
  return j.dump(2) + "\n";
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(Err::io_error, "cannot create output directory " + dir);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Err::io_error, "cannot write " + path);
  out << content;
}

void write_report(const std::string& dir, const RunReport& report) {
  ensure_dir(dir);
  write_text_file(dir + "/report.json", report.to_json());
}

void write_manifest(const std::string& dir, const ExperimentConfig& cfg) {
  ensure_dir(dir);
  std::string m;
  m += "config_hash " + cfg.hash_hex() + "\n";
  m += "schema stt-report-v1\n";
  m += "summation pairwise-fixed-order\n";
  m += "experiment " + cfg.experiment + "\n";
  m += "seed " + std::to_string(cfg.seed) + "\n";
  m += "workers " + std::to_string(cfg.workers) + "\n";
  write_text_file(dir + "/MANIFEST", m);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i)
    body_ += header[i] + (i + 1 < header.size() ? "," : "\n");
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) fail(Err::io_error, "csv row width mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i)
    body_ += cells[i] + (i + 1 < cells.size() ? "," : "\n");
}

void CsvWriter::save(const std::string& path) const { write_text_file(path, body_); }

std::string CsvWriter::num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace stt
