#pragma once

#include <cstdint>
#include <vector>

#include "ets/common.hpp"
#include "ets/tensor.hpp"

namespace ets {

// Area under the ROC curve as the Mann-Whitney statistic:
// P(score_pos > score_neg) + 0.5 * P(tie). Requires both classes.
double auroc(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

// Average precision by step integration of the precision-recall curve over
// descending unique score thresholds. Requires at least one positive.
double average_precision(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

// Per-region overlap: ground-truth regions are 8-connected components;
// thresholds sweep the pooled score range (all unique values up to
// `max_thresholds`, evenly spaced quantiles beyond that); mean per-region
// overlap is integrated against the false-positive rate on [0, fpr_limit]
// (trapezoid, constant extension past the last observed FPR) and normalized
// by fpr_limit.
double pro(const std::vector<Tensor<Real>>& score_maps, const std::vector<Tensor<Real>>& gt_masks,
           double fpr_limit = 0.3, int max_thresholds = 5000);

// 8-connected component labelling of a binary (1,1,H,W) mask; returns one
// vector of flat pixel indices per region.
std::vector<std::vector<int>> connected_components(const Tensor<Real>& mask);

}  // namespace ets
