#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "cameo/denoiser.hpp"
#include "cameo/tensor.hpp"

namespace cameo {

// manifest.json + one TensorFile per parameter.
std::string checkpoint_manifest_json(const DenoiserConfig& cfg,
                                     int precision_bits,
                                     const std::vector<std::string>& names);
void parse_checkpoint_manifest(const std::string& text, DenoiserConfig& cfg,
                               int& precision_bits,
                               std::vector<std::string>& names);

template <typename T>
void save_checkpoint(const ToyDenoiser<T>& model,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto& m = const_cast<ToyDenoiser<T>&>(model);
  std::vector<std::string> names;
  for (auto* p : m.params()) {
    names.push_back(p->name);
    Tensor<T> t({std::uint64_t(p->w.size())}, p->w);
    save_tensor(dir / (p->name + ".camt"), t);
  }
  std::ofstream f(dir / "manifest.json", std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write checkpoint manifest");
  f << checkpoint_manifest_json(model.cfg, int(sizeof(T) * 8), names);
}

template <typename T>
ToyDenoiser<T> load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f)
    throw std::runtime_error("cannot read checkpoint manifest in " +
                             dir.string());
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  DenoiserConfig cfg;
  int bits = 0;
  std::vector<std::string> names;
  parse_checkpoint_manifest(text, cfg, bits, names);
  if (bits != int(sizeof(T) * 8))
    throw std::runtime_error("checkpoint precision mismatch: file has " +
                             std::to_string(bits) + "-bit parameters");

  ToyDenoiser<T> model;
  Rng init_rng(0);
  model.init(cfg, init_rng);
  for (auto* p : model.params()) {
    Tensor<T> t = load_tensor<T>(dir / (p->name + ".camt"));
    if (t.data.size() != p->w.size())
      throw std::runtime_error("checkpoint parameter size mismatch: " +
                               p->name);
    p->w = std::move(t.data);
  }
  return model;
}

}  // namespace cameo
