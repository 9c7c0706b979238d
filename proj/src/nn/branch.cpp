// SPDX-License-Identifier: Apache-2.0
#include "hybridct/nn/branch.hpp"

#include "hybridct/core/error.hpp"
#include "hybridct/nn/resnet3d.hpp"
#include "hybridct/nn/vit.hpp"

namespace hybridct::nn {

std::unique_ptr<ClassifierBranch> make_branch(const nlohmann::json& arch, std::uint64_t seed) {
  try {
    const std::string kind = arch.at("kind").get<std::string>();
    if (kind == "3d") {
      Model3DCfg c;
      c.n_classes = arch.at("n_classes").get<int>();
      c.width_multiplier = arch.at("width_multiplier").get<double>();
      c.in_channels = arch.at("in_channels").get<int>();
      c.input_side = arch.at("input_side").get<int>();
      c.projection_dim = arch.at("projection_dim").get<int>();
      return std::make_unique<ResNet3d>(c, seed);
    }
    if (kind == "25d") {
      Encoder25DCfg c;
      c.backbone_kind = parse_backbone_kind(arch.at("backbone_kind").get<std::string>());
      c.slice_size = arch.at("slice_size").get<int>();
      c.k_slices = arch.at("k_slices").get<int>();
      c.patch_size = arch.at("patch_size").get<int>();
      c.depth = arch.at("depth").get<int>();
      c.embedding_dim = arch.at("embedding_dim").get<int>();
      c.n_heads = arch.at("n_heads").get<int>();
      c.mlp_ratio = arch.at("mlp_ratio").get<int>();
      c.n_layer_groups = arch.at("n_layer_groups").get<int>();
      c.projection_dim = arch.at("projection_dim").get<int>();
      c.n_classes = arch.at("n_classes").get<int>();
      c.pooling = parse_pooling(arch.at("pooling").get<std::string>());
      c.weights_path = arch.value("weights_path", std::string{});
      return std::make_unique<MultiViewModel>(c, seed, false);
    }
    throw ValidationError("unknown branch kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad architecture description: ") + e.what());
  }
}

}  // namespace hybridct::nn
