// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "hybridct/core/tensor.hpp"
#include "hybridct/nn/checkpoint.hpp"

namespace hybridct::nn {

/// C-order little-endian .npy (format 1.x/2.x/3.x) with dtype f4 or f8; f8 is narrowed to float.
Tensor read_npy(const std::filesystem::path& path);

/// timm-style ViT names -> encoder parameter names, e.g. `patch_embed.proj.weight` ->
/// `encoder.patch_embed.weight`, `blocks.3.attn.qkv.bias` -> `encoder.blocks.3.attn.qkv.bias`.
std::string map_encoder_name(const std::string& name);

/// Reads every `<name>.npy` in `dir`, renames, squeezes leading unit axes of cls_token and
/// pos_embed and flattens a [E, C, p, p] patch projection to [E, C*p*p]. `arch` must give
/// patch_size, depth, embedding_dim and n_heads (mlp_ratio defaults to 4).
Archive convert_npy_dir(const std::filesystem::path& dir, nlohmann::json arch);

}  // namespace hybridct::nn
