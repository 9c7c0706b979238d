// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hybridct/nn/branch.hpp"
#include "hybridct/nn/optimizer.hpp"
#include "json.hpp"

namespace hybridct::nn {

/// Tensor archive: "HCKP", u32 version, u64 header length, JSON header
/// {meta, arch, tensors: [{name, shape, offset}]}, then little-endian float32 payload.
struct Archive {
  nlohmann::json meta = nlohmann::json::object();
  nlohmann::json arch = nlohmann::json::object();
  std::map<std::string, Tensor> tensors;
};

void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

/// Model parameters, batch-norm buffers and (optionally) optimizer moments.
Archive make_checkpoint(ClassifierBranch& model, const AdamW* optimizer, nlohmann::json meta);
void save_checkpoint(const std::filesystem::path& path, ClassifierBranch& model, const AdamW* optimizer,
                     nlohmann::json meta);

/// Copies parameter and buffer tensors into `model`; throws RuntimeFailure on any missing
/// or mis-shaped tensor.
void restore_model(ClassifierBranch& model, const Archive& archive);

struct LoadedModel {
  std::unique_ptr<ClassifierBranch> model;
  Archive archive;
};

/// Rebuilds the branch from the archived architecture and restores its weights.
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace hybridct::nn
