#include "ets/synthesis.hpp"

#include <algorithm>
#include <filesystem>

#include "ets/image_io.hpp"

namespace ets {

Synthesizer make_synthesizer(const SynthesisConfig& cfg) {
  namespace fs = std::filesystem;
  if (cfg.texture_source.empty()) fail("config", "synthesis: texture_source is empty");
  std::error_code ec;
  if (!fs::is_directory(cfg.texture_source, ec))
    fail("config", "synthesis: texture folder not readable: " + cfg.texture_source);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(cfg.texture_source)) {
    if (!e.is_regular_file()) continue;
    files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::pair<std::string, Tensor<Real>>> textures;
  for (const auto& f : files) {
    try {
      textures.emplace_back(fs::path(f).filename().string(), load_image_rgb(f));
    } catch (const Error&) {
      // Skip non-image files in the folder.
    }
  }
  if (textures.empty())
    fail("config", "synthesis: no decodable textures in " + cfg.texture_source);
  return Synthesizer(cfg, std::move(textures));
}

}  // namespace ets
