// SPDX-License-Identifier: Apache-2.0
// Packs a directory of per-tensor .npy files (timm ViT naming) into a weights archive usable as
// model25d.weights_path.
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "hybridct/core/error.hpp"
#include "hybridct/nn/convert.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Convert .npy ViT weights to a checkpoint archive"};
  std::string npy_dir, arch_path, out;
  app.add_option("--npy-dir", npy_dir, "Directory of <tensor name>.npy files")->required();
  app.add_option("--arch", arch_path, "JSON with patch_size, depth, embedding_dim, n_heads[, mlp_ratio]")->required();
  app.add_option("--out", out, "Archive to write")->required();
  CLI11_PARSE(app, argc, argv);
  try {
    std::ifstream is(arch_path);
    if (!is) throw hybridct::ValidationError("cannot open " + arch_path);
    const auto arch = nlohmann::json::parse(is, nullptr, false);
    if (arch.is_discarded() || !arch.is_object()) throw hybridct::ValidationError(arch_path + " is not a JSON object");
    const auto archive = hybridct::nn::convert_npy_dir(npy_dir, arch);
    hybridct::nn::write_archive(out, archive);
    std::cout << archive.tensors.size() << " tensors -> " << out << "\n";
    return 0;
  } catch (const hybridct::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
