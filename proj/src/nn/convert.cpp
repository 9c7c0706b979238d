// SPDX-License-Identifier: Apache-2.0
#include "hybridct/nn/convert.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>

#include <fmt/format.h>

#include "hybridct/core/error.hpp"

namespace hybridct::nn {

namespace {

std::string header_field(const std::string& header, const std::string& key) {
  const auto k = header.find("'" + key + "'");
  if (k == std::string::npos) return {};
  auto v = header.find(':', k);
  if (v == std::string::npos) return {};
  ++v;
  while (v < header.size() && header[v] == ' ') ++v;
  if (v >= header.size()) return {};
  const char open = header[v];
  const char close = open == '(' ? ')' : open == '\'' ? '\'' : ',';
  const auto e = header.find(close, v + 1);
  if (e == std::string::npos) return {};
  return header.substr(v, e - v + (close == ',' ? 0 : 1));
}

}  // namespace

Tensor read_npy(const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little);
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeFailure("cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, "\x93NUMPY", 6) != 0)
    throw RuntimeFailure(path.string() + " is not an .npy file");
  std::uint32_t hlen = 0;
  if (magic[6] == 1) {
    std::uint16_t h16 = 0;
    is.read(reinterpret_cast<char*>(&h16), 2);
    hlen = h16;
  } else {
    is.read(reinterpret_cast<char*>(&hlen), 4);
  }
  std::string header(hlen, '\0');
  if (!is.read(header.data(), hlen)) throw RuntimeFailure(path.string() + ": truncated header");

  const std::string descr = header_field(header, "descr");
  const std::string fortran = header_field(header, "fortran_order");
  const std::string shape_text = header_field(header, "shape");
  if (fortran.find("True") != std::string::npos) throw RuntimeFailure(path.string() + ": Fortran order unsupported");
  std::size_t item = 0;
  if (descr == "'<f4'")
    item = 4;
  else if (descr == "'<f8'")
    item = 8;
  else
    throw RuntimeFailure(path.string() + ": dtype " + descr + " unsupported (need <f4 or <f8)");

  std::vector<int> shape;
  static const std::regex num("[0-9]+");
  for (auto it = std::sregex_iterator(shape_text.begin(), shape_text.end(), num); it != std::sregex_iterator(); ++it)
    shape.push_back(std::stoi(it->str()));
  if (shape.empty()) shape.push_back(1);

  Tensor t(shape);
  if (item == 4) {
    if (!is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * 4)))
      throw RuntimeFailure(path.string() + ": truncated payload");
  } else {
    std::vector<double> buf(t.size());
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8)))
      throw RuntimeFailure(path.string() + ": truncated payload");
    std::transform(buf.begin(), buf.end(), t.data(), [](double v) { return static_cast<float>(v); });
  }
  return t;
}

std::string map_encoder_name(const std::string& name) {
  std::string n = name;
  if (n.rfind("encoder.", 0) == 0) n = n.substr(8);
  if (n.rfind("patch_embed.proj.", 0) == 0) n = "patch_embed." + n.substr(17);
  return "encoder." + n;
}

Archive convert_npy_dir(const std::filesystem::path& dir, nlohmann::json arch) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError("not a directory: " + dir.string());
  for (const char* k : {"patch_size", "depth", "embedding_dim", "n_heads"})
    if (!arch.contains(k) || !arch[k].is_number_integer())
      throw ValidationError(std::string("architecture descriptor needs integer '") + k + "'");
  if (!arch.contains("mlp_ratio")) arch["mlp_ratio"] = 4;
  const int E = arch["embedding_dim"].get<int>();

  Archive a;
  a.arch = arch;
  a.arch["kind"] = "vit_encoder";
  a.meta = {{"source", dir.filename().string()}};
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".npy") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const std::string name = map_encoder_name(f.stem().string());
    Tensor t = read_npy(f);
    if (name == "encoder.cls_token") t.reshape({E});
    if (name == "encoder.pos_embed") t.reshape({static_cast<int>(t.size() / E), E});
    if (name == "encoder.patch_embed.weight" && t.rank() == 4) t.reshape({t.dim(0), t.dim(1) * t.dim(2) * t.dim(3)});
    if (a.tensors.count(name)) throw ValidationError(fmt::format("two files map to '{}'", name));
    a.tensors.emplace(name, std::move(t));
  }
  if (a.tensors.empty()) throw ValidationError("no .npy files in " + dir.string());
  return a;
}

}  // namespace hybridct::nn
