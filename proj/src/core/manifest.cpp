// SPDX-License-Identifier: Apache-2.0
#include "hybridct/core/manifest.hpp"

#include <fstream>
#include <sstream>

#include "hybridct/core/error.hpp"

namespace hybridct {

std::string to_string(Gender g) { return g == Gender::female ? "female" : "male"; }
std::string to_string(Split s) { return s == Split::train ? "train" : "val"; }

Gender parse_gender(const std::string& s) {
  if (s == "female" || s == "F") return Gender::female;
  if (s == "male" || s == "M") return Gender::male;
  throw ValidationError("unknown gender '" + s + "'");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  throw ValidationError("unknown split '" + s + "' (expected train or val)");
}

void write_manifest_csv(const std::filesystem::path& path, const std::vector<ScanRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write manifest " + path.string());
  out << "scan_id,label,source,gender,split\n";
  for (const auto& r : records)
    out << r.scan_id << ',' << r.label << ',' << r.source << ',' << to_string(r.gender) << ','
        << to_string(r.split) << '\n';
  if (!out) throw RuntimeFailure("failed writing manifest " + path.string());
}

std::vector<ScanRecord> read_manifest_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "scan_id,label,source,gender,split")
    throw RuntimeFailure("manifest " + path.string() + " has an unexpected header");
  std::vector<ScanRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() != 5)
      throw RuntimeFailure(path.string() + ":" + std::to_string(lineno) + ": expected 5 columns");
    ScanRecord r;
    r.scan_id = cols[0];
    try {
      r.label = std::stoi(cols[1]);
      r.source = std::stoi(cols[2]);
      r.gender = parse_gender(cols[3]);
      r.split = parse_split(cols[4]);
    } catch (const std::exception& e) {
      throw RuntimeFailure(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace hybridct
