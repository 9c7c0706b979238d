// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace hybridct {

enum class Gender { female, male };
enum class Split { train, val };

std::string to_string(Gender g);
std::string to_string(Split s);
Gender parse_gender(const std::string& s);
Split parse_split(const std::string& s);

struct ScanRecord {
  std::string scan_id;
  int label = 0;
  int source = 0;
  Gender gender = Gender::female;
  Split split = Split::train;

  friend bool operator==(const ScanRecord&, const ScanRecord&) = default;
};

/// `scan_id,label,source,gender,split` with a header row.
void write_manifest_csv(const std::filesystem::path& path, const std::vector<ScanRecord>& records);
std::vector<ScanRecord> read_manifest_csv(const std::filesystem::path& path);

}  // namespace hybridct
