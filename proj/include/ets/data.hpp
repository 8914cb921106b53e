#pragma once

#include <string>
#include <vector>

#include "ets/common.hpp"
#include "ets/tensor.hpp"

namespace ets {

enum class Split { kTrain, kTest };

struct DatasetSpec {
  std::string root_path;
  std::string category;
  int image_size = 256;
  Split split = Split::kTrain;
};

// One dataset element. Images are RGB in [0,1] at image_size; normalization
// happens when batches are assembled for the networks. Masks are binary at
// image_size; normal items carry an all-zero mask.
struct DatasetItem {
  std::string path;
  int label = 0;  // 0 normal, 1 anomalous
  Tensor<Real> image;  // (1,3,S,S)
  Tensor<Real> mask;   // (1,1,S,S)
};

struct Dataset {
  DatasetSpec spec;
  std::vector<DatasetItem> items;
};

// MVTec-style layout: <root>/<category>/train/good/*.png,
// <root>/<category>/test/<defect>/*.png and
// <root>/<category>/ground_truth/<defect>/*_mask.png. Items are ordered
// lexicographically by path. Train items are all label 0 with zero masks;
// anomalous test items must have a mask file.
Dataset load_split(const DatasetSpec& spec);

// JSON-lines manifest for non-MVTec layouts. Each line:
//   {"path": ..., "split": "train"|"test", "label": 0|1, "mask_path": ...}
// Paths are relative to the manifest's directory unless absolute.
Dataset load_manifest(const std::string& manifest_path, Split split, int image_size);

}  // namespace ets
