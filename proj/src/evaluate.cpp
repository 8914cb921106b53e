#include "ets/evaluate.hpp"

#include <filesystem>
#include <fstream>

#include "ets/image.hpp"
#include "ets/image_io.hpp"

namespace fs = std::filesystem;

namespace ets {

namespace {

void write_heatmap(const std::string& dir, const std::string& stem, const Tensor<Real>& map) {
  fs::create_directories(dir);
  const Real lo = map.array().minCoeff(), hi = map.array().maxCoeff();
  Tensor<Real> norm = map;
  if (hi > lo)
    norm.array() = (norm.array() - lo) / (hi - lo);
  else
    norm.array().setZero();
  save_png((fs::path(dir) / (stem + "_heatmap.png")).string(), norm);
  std::ofstream side((fs::path(dir) / (stem + "_heatmap.json")).string());
  side << "{\"score_min\":" << lo << ",\"score_max\":" << hi << "}\n";
}

}  // namespace

AnomalyMapResult<Real> score_image(EtsModel<Real>& model, const Tensor<Real>& raw_image,
                                   double sigma) {
  model.set_eval_mode();
  const Tensor<Real> x = normalize_pretrain(raw_image);
  auto [ft, fs_] = model.infer(x);
  return anomaly_map(ft, fs_, raw_image.h(), sigma);
}

MetricsReport evaluate(EtsModel<Real>& model, const Dataset& test, const EvalOptions& opts) {
  if (test.items.empty()) fail("dataset-layout", "evaluate: empty test split");
  model.set_eval_mode();

  std::vector<double> image_scores;
  std::vector<uint8_t> image_labels;
  std::vector<double> pixel_scores;
  std::vector<uint8_t> pixel_labels;
  std::vector<Tensor<Real>> maps, masks;
  maps.reserve(test.items.size());
  masks.reserve(test.items.size());

  for (const DatasetItem& item : test.items) {
    const Tensor<Real> x = normalize_pretrain(item.image);
    auto [ft, fs_] = model.infer(x);
    AnomalyMapResult<Real> am = anomaly_map(ft, fs_, item.image.h(), opts.sigma);
    image_scores.push_back(am.image_score);
    image_labels.push_back(static_cast<uint8_t>(item.label));
    for (Eigen::Index p = 0; p < am.map.size(); ++p) {
      pixel_scores.push_back(am.map.data()[p]);
      pixel_labels.push_back(item.mask.data()[p] > Real(0) ? 1 : 0);
    }
    if (!opts.heatmap_dir.empty())
      write_heatmap(opts.heatmap_dir, fs::path(item.path).stem().string(), am.map);
    maps.push_back(std::move(am.map));
    masks.push_back(item.mask);
  }

  MetricsReport rep;
  rep.n_images = static_cast<int>(test.items.size());
  rep.n_pixels = static_cast<int64_t>(pixel_scores.size());
  for (const auto& m : masks) rep.n_gt_regions += static_cast<int>(connected_components(m).size());
  rep.i_auc = auroc(image_scores, image_labels);
  rep.i_ap = average_precision(image_scores, image_labels);
  rep.p_auc = auroc(pixel_scores, pixel_labels);
  rep.p_ap = average_precision(pixel_scores, pixel_labels);
  rep.p_pro = pro(maps, masks, opts.pro_fpr_limit, opts.pro_max_thresholds);
  return rep;
}

}  // namespace ets
