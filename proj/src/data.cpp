#include "ets/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ets/image.hpp"
#include "ets/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ets {

namespace {

std::vector<std::string> list_files(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> list_dirs(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

DatasetItem load_item(const std::string& img_path, int label, const std::string& mask_path,
                      int size) {
  DatasetItem item;
  item.path = img_path;
  item.label = label;
  item.image = resize_image(load_image_rgb(img_path), size);
  if (label == 0 || mask_path.empty()) {
    item.mask = Tensor<Real>::zeros(1, 1, size, size);
  } else {
    item.mask = resize_mask_binary(load_mask_png(mask_path), size);
  }
  return item;
}

}  // namespace

Dataset load_split(const DatasetSpec& spec) {
  if (spec.image_size <= 0) fail("config", "dataset: image_size must be positive");
  Dataset ds;
  ds.spec = spec;
  const fs::path cat = fs::path(spec.root_path) / spec.category;
  if (!fs::is_directory(cat))
    fail("dataset-layout", "missing category folder: " + cat.string());

  if (spec.split == Split::kTrain) {
    const fs::path good = cat / "train" / "good";
    if (!fs::is_directory(good))
      fail("dataset-layout", "missing folder: " + good.string());
    for (const auto& f : list_files(good))
      ds.items.push_back(load_item(f, 0, "", spec.image_size));
    return ds;
  }

  const fs::path test = cat / "test";
  if (!fs::is_directory(test)) fail("dataset-layout", "missing folder: " + test.string());
  struct Pending {
    std::string img, mask;
    int label;
  };
  std::vector<Pending> pending;
  for (const auto& defect_dir : list_dirs(test)) {
    const std::string defect = fs::path(defect_dir).filename().string();
    const bool normal = (defect == "good");
    for (const auto& f : list_files(defect_dir)) {
      Pending p;
      p.img = f;
      p.label = normal ? 0 : 1;
      if (!normal) {
        const fs::path stem = fs::path(f).stem();
        const fs::path mask =
            cat / "ground_truth" / defect / (stem.string() + "_mask.png");
        if (!fs::exists(mask))
          fail("dataset-layout",
               "anomalous test image has no mask file: " + f + " (expected " + mask.string() + ")");
        p.mask = mask.string();
      }
      pending.push_back(std::move(p));
    }
  }
  std::sort(pending.begin(), pending.end(),
            [](const Pending& a, const Pending& b) { return a.img < b.img; });
  for (const auto& p : pending)
    ds.items.push_back(load_item(p.img, p.label, p.mask, spec.image_size));
  return ds;
}

Dataset load_manifest(const std::string& manifest_path, Split split, int image_size) {
  if (image_size <= 0) fail("config", "dataset: image_size must be positive");
  std::ifstream in(manifest_path);
  if (!in) fail("dataset-layout", "cannot open manifest: " + manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  const std::string want = (split == Split::kTrain) ? "train" : "test";

  struct Pending {
    std::string img, mask;
    int label;
  };
  std::vector<Pending> pending;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail("dataset-layout",
           "manifest parse error at line " + std::to_string(lineno) + ": " + e.what());
    }
    if (j.value("split", "") != want) continue;
    Pending p;
    fs::path img = j.value("path", "");
    if (img.empty())
      fail("dataset-layout", "manifest line " + std::to_string(lineno) + " has no path");
    p.img = img.is_absolute() ? img.string() : (base / img).string();
    p.label = j.value("label", 0);
    if (split == Split::kTest && p.label == 1) {
      fs::path mask = j.value("mask_path", "");
      if (mask.empty())
        fail("dataset-layout",
             "anomalous manifest entry without mask_path at line " + std::to_string(lineno));
      p.mask = mask.is_absolute() ? mask.string() : (base / mask).string();
    }
    pending.push_back(std::move(p));
  }
  std::sort(pending.begin(), pending.end(),
            [](const Pending& a, const Pending& b) { return a.img < b.img; });

  Dataset ds;
  ds.spec.root_path = manifest_path;
  ds.spec.image_size = image_size;
  ds.spec.split = split;
  for (const auto& p : pending)
    ds.items.push_back(load_item(p.img, split == Split::kTrain ? 0 : p.label, p.mask, image_size));
  return ds;
}

}  // namespace ets
