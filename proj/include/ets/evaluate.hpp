#pragma once

#include "ets/data.hpp"
#include "ets/model.hpp"
#include "ets/scoring.hpp"

namespace ets {

// Run the frozen teacher/student over a test split: image metrics over the
// per-image max scores, pixel metrics over all pixels pooled across the set,
// PRO over ground-truth regions. Writes min-max normalized 8-bit heat maps
// (plus a sidecar JSON with the raw score range) when opts.heatmap_dir is
// set.
MetricsReport evaluate(EtsModel<Real>& model, const Dataset& test, const EvalOptions& opts);

// Single-image scoring: anomaly map at the image's resolution.
AnomalyMapResult<Real> score_image(EtsModel<Real>& model, const Tensor<Real>& raw_image,
                                   double sigma = 4.0);

}  // namespace ets
