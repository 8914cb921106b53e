#include "ets/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ets {

double auroc(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
  if (scores.size() != labels.size()) fail("shape", "auroc: scores/labels size mismatch");
  size_t pos = 0;
  for (uint8_t l : labels) pos += (l != 0);
  const size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0)
    fail("single-class", "auroc needs both classes (got " + std::to_string(pos) + " positives of " +
                             std::to_string(labels.size()) + ")");

  // Rank-sum with average ranks over ties.
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(pos) * (pos + 1);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double average_precision(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
  if (scores.size() != labels.size()) fail("shape", "average_precision: size mismatch");
  size_t total_pos = 0;
  for (uint8_t l : labels) total_pos += (l != 0);
  if (total_pos == 0) fail("single-class", "average_precision needs at least one positive");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0, prev_recall = 0.0;
  size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]])
        ++tp;
      else
        ++fp;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j + 1;
  }
  return ap;
}

std::vector<std::vector<int>> connected_components(const Tensor<Real>& mask) {
  const int H = mask.h(), W = mask.w();
  std::vector<std::vector<int>> regions;
  std::vector<uint8_t> seen(static_cast<size_t>(H) * W, 0);
  std::vector<int> stack;
  for (int start = 0; start < H * W; ++start) {
    if (seen[start] || mask.data()[start] <= Real(0)) continue;
    regions.emplace_back();
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      regions.back().push_back(p);
      const int y = p / W, x = p % W;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (!dy && !dx) continue;
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
          const int q = ny * W + nx;
          if (!seen[q] && mask.data()[q] > Real(0)) {
            seen[q] = 1;
            stack.push_back(q);
          }
        }
      }
    }
  }
  return regions;
}

double pro(const std::vector<Tensor<Real>>& score_maps, const std::vector<Tensor<Real>>& gt_masks,
           double fpr_limit, int max_thresholds) {
  if (fpr_limit <= 0.0 || fpr_limit > 1.0) fail("config", "pro: fpr_limit must be in (0,1]");
  if (score_maps.size() != gt_masks.size()) fail("shape", "pro: maps/masks count mismatch");

  // Flatten: region id per pixel (or -1 for normal pixels), pooled scores.
  struct Px {
    double score;
    int region;  // -1: normal
  };
  std::vector<Px> pixels;
  std::vector<int> region_sizes;
  for (size_t img = 0; img < score_maps.size(); ++img) {
    const Tensor<Real>& map = score_maps[img];
    const Tensor<Real>& mask = gt_masks[img];
    if (map.h() != mask.h() || map.w() != mask.w())
      fail("shape", "pro: map/mask size mismatch at image " + std::to_string(img));
    std::vector<int> region_of(static_cast<size_t>(map.h()) * map.w(), -1);
    for (const auto& comp : connected_components(mask)) {
      const int rid = static_cast<int>(region_sizes.size());
      region_sizes.push_back(static_cast<int>(comp.size()));
      for (int p : comp) region_of[p] = rid;
    }
    for (Eigen::Index p = 0; p < map.size(); ++p)
      pixels.push_back({static_cast<double>(map.data()[p]), region_of[p]});
  }
  if (region_sizes.empty()) fail("single-class", "pro: no ground-truth regions in the set");
  int64_t total_neg = 0;
  for (const auto& px : pixels) total_neg += (px.region < 0);
  if (total_neg == 0) fail("single-class", "pro: no normal pixels in the set");

  // Threshold grid: descending unique scores, or quantiles when too many.
  std::vector<double> uniq;
  uniq.reserve(pixels.size());
  for (const auto& px : pixels) uniq.push_back(px.score);
  std::sort(uniq.begin(), uniq.end(), std::greater<double>());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<double> thresholds;
  if (static_cast<int>(uniq.size()) <= max_thresholds) {
    thresholds = uniq;
  } else {
    thresholds.reserve(max_thresholds);
    for (int i = 0; i < max_thresholds; ++i) {
      const double q = static_cast<double>(i) / (max_thresholds - 1);
      thresholds.push_back(uniq[static_cast<size_t>(q * (uniq.size() - 1))]);
    }
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  }

  // Walk pixels in descending score order, activating them as the threshold
  // falls below their score (prediction = score > threshold).
  std::sort(pixels.begin(), pixels.end(),
            [](const Px& a, const Px& b) { return a.score > b.score; });
  std::vector<int64_t> region_hits(region_sizes.size(), 0);
  int64_t false_pos = 0;
  size_t cursor = 0;
  const double inv_regions = 1.0 / static_cast<double>(region_sizes.size());

  std::vector<std::pair<double, double>> curve;  // (fpr, mean overlap), fpr nondecreasing
  for (double th : thresholds) {
    while (cursor < pixels.size() && pixels[cursor].score > th) {
      if (pixels[cursor].region >= 0)
        ++region_hits[pixels[cursor].region];
      else
        ++false_pos;
      ++cursor;
    }
    double overlap = 0.0;
    for (size_t r = 0; r < region_sizes.size(); ++r)
      overlap += static_cast<double>(region_hits[r]) / region_sizes[r];
    overlap *= inv_regions;
    const double fpr = static_cast<double>(false_pos) / static_cast<double>(total_neg);
    curve.emplace_back(fpr, overlap);
  }

  // Integrate overlap d(fpr) on [0, fpr_limit]; extend the last observed
  // overlap to the limit when the curve stops short of it.
  double area = 0.0;
  double px = curve.front().first, py = curve.front().second;
  for (size_t i = 1; i < curve.size() && px < fpr_limit; ++i) {
    double cx = curve[i].first, cy = curve[i].second;
    if (cx > fpr_limit) {
      // Clip the segment at the limit.
      const double t = (fpr_limit - px) / (cx - px);
      cy = py + t * (cy - py);
      cx = fpr_limit;
    }
    area += 0.5 * (py + cy) * (cx - px);
    px = cx;
    py = cy;
  }
  if (px < fpr_limit) area += py * (fpr_limit - px);
  return area / fpr_limit;
}

}  // namespace ets
