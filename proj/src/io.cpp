#include "klgame/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace klgame {

std::string format_float(Scalar value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string dataset_to_csv(const OfflineDataset& data) {
  std::string out = "x,a1,a2,p\n";
  for (const DataRecord& rec : data.records) {
    out += std::to_string(rec.x);
    out += ',';
    out += std::to_string(rec.a1);
    out += ',';
    out += std::to_string(rec.a2);
    out += ',';
    out += format_float(rec.p);
    out += '\n';
  }
  return out;
}

void write_dataset_csv(const std::filesystem::path& path, const OfflineDataset& data) {
  atomic_write_file(path, dataset_to_csv(data));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

long parse_index(const std::string& s, const char* what) {
  if (s.empty()) throw std::runtime_error(std::string("dataset csv: empty ") + what);
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (errno != 0 || end == s.c_str() || *end != '\0')
    throw std::runtime_error(std::string("dataset csv: bad ") + what + " '" + s + "'");
  return v;
}

Scalar parse_float(const std::string& s, const char* what) {
  if (s.empty()) throw std::runtime_error(std::string("dataset csv: empty ") + what);
  char* end = nullptr;
  errno = 0;
  const Scalar v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end == s.c_str() || *end != '\0')
    throw std::runtime_error(std::string("dataset csv: bad ") + what + " '" + s + "'");
  return v;
}

}  // namespace

OfflineDataset read_dataset_csv(const std::filesystem::path& path, Index num_contexts,
                                Index num_actions) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,a1,a2,p") throw std::runtime_error("dataset csv: unexpected header '" + line + "'");

  OfflineDataset data;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 4) throw std::runtime_error("dataset csv: expected 4 fields");
    DataRecord rec;
    rec.x = parse_index(fields[0], "x");
    rec.a1 = parse_index(fields[1], "a1");
    rec.a2 = parse_index(fields[2], "a2");
    rec.p = parse_float(fields[3], "p");
    if (rec.x < 0 || rec.x >= num_contexts || rec.a1 < 0 || rec.a1 >= num_actions ||
        rec.a2 < 0 || rec.a2 >= num_actions)
      throw std::runtime_error("dataset csv: index out of range");
    data.records.push_back(rec);
  }
  return data;
}

std::string trace_to_csv(const SelfPlayTrace& trace) {
  std::string out = "t,alpha,V_t,residual\n";
  for (const TracePoint& pt : trace.points) {
    out += std::to_string(pt.t);
    out += ',';
    out += format_float(pt.alpha);
    out += ',';
    if (pt.v_anchor) out += format_float(*pt.v_anchor);
    out += ',';
    if (pt.residual) out += format_float(*pt.residual);
    out += '\n';
  }
  return out;
}

std::string bounds_to_json(const std::vector<BoundReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const BoundReport& report : reports) {
    nlohmann::json obj;
    obj["name"] = report.name;
    obj["instances_checked"] = report.instances_checked;
    Scalar v = report.max_violation;
    if (!std::isfinite(v)) v = v > 0 ? 1e308 : -1e308;
    obj["max_violation"] = v;
    obj["passed"] = report.passed;
    obj["tolerance"] = report.tolerance;
    arr.push_back(obj);
  }
  return arr.dump(2) + "\n";
}

}  // namespace klgame
