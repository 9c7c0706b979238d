// SPDX-License-Identifier: Apache-2.0
#include "hybridct/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "hybridct/core/error.hpp"

namespace hybridct::nn {

namespace {

constexpr char kMagic[4] = {'H', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "archives are written in native little-endian order");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  nlohmann::json header;
  header["meta"] = archive.meta;
  header["arch"] = archive.arch;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : archive.tensors) {
    header["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size() * sizeof(float);
  }
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw RuntimeFailure("cannot write checkpoint " + path.string());
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kVersion);
    put<std::uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : archive.tensors)
      os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!os) throw RuntimeFailure("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeFailure("cannot open checkpoint " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw RuntimeFailure(path.string() + " is not a checkpoint archive");
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) throw RuntimeFailure(fmt::format("{}: unsupported archive version {}", path.string(), version));
  const auto len = get<std::uint64_t>(is);
  if (!is || len > (1ull << 32)) throw RuntimeFailure(path.string() + ": corrupt archive header");
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw RuntimeFailure(path.string() + ": truncated archive header");

  Archive out;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    out.meta = header.at("meta");
    out.arch = header.at("arch");
  } catch (const nlohmann::json::exception& e) {
    throw RuntimeFailure(path.string() + ": bad archive header: " + e.what());
  }
  const auto data_start = is.tellg();
  for (const auto& entry : header.at("tensors")) {
    const auto shape = entry.at("shape").get<std::vector<int>>();
    Tensor t(shape);
    is.seekg(data_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
    is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!is) throw RuntimeFailure(path.string() + ": truncated tensor " + entry.at("name").get<std::string>());
    out.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  return out;
}

Archive make_checkpoint(ClassifierBranch& model, const AdamW* optimizer, nlohmann::json meta) {
  Archive a;
  a.meta = std::move(meta);
  a.arch = model.arch();
  for (Parameter* p : model.parameters()) a.tensors.emplace(p->name, p->value);
  for (const Buffer& b : model.buffers()) a.tensors.emplace(b.name, *b.value);
  if (optimizer)
    for (auto& [name, t] : optimizer->state()) a.tensors.emplace(name, std::move(t));
  return a;
}

void save_checkpoint(const std::filesystem::path& path, ClassifierBranch& model, const AdamW* optimizer,
                     nlohmann::json meta) {
  write_archive(path, make_checkpoint(model, optimizer, std::move(meta)));
}

void restore_model(ClassifierBranch& model, const Archive& archive) {
  auto copy = [&](const std::string& name, Tensor& dst) {
    const auto it = archive.tensors.find(name);
    if (it == archive.tensors.end()) throw RuntimeFailure("checkpoint is missing tensor '" + name + "'");
    if (it->second.shape() != dst.shape())
      throw RuntimeFailure(fmt::format("checkpoint tensor '{}' is {}, model expects {}", name,
                                       it->second.shape_string(), dst.shape_string()));
    dst = it->second;
  };
  for (Parameter* p : model.parameters()) copy(p->name, p->value);
  for (const Buffer& b : model.buffers()) copy(b.name, *b.value);
}

LoadedModel load_model(const std::filesystem::path& path) {
  LoadedModel out;
  out.archive = read_archive(path);
  try {
    out.model = make_branch(out.archive.arch, 0);
  } catch (const ValidationError& e) {
    throw RuntimeFailure(path.string() + ": bad architecture: " + e.what());
  }
  restore_model(*out.model, out.archive);
  return out;
}

}  // namespace hybridct::nn
