#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "ets/checkpoint.hpp"
#include "ets/data.hpp"
#include "ets/losses.hpp"
#include "ets/optim.hpp"
#include "ets/synthesis.hpp"

namespace ets {

struct TrainConfig {
  int batch_size = 16;
  int64_t max_iterations = 10000;
  double teacher_lr = 1e-4;   // teacher encoder optimizer
  double student_lr = 5e-3;   // bottleneck + decoder + GII optimizer
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  uint64_t seed = 0;
  int64_t checkpoint_every = 0;  // 0: only the final checkpoint
  int64_t eval_every = 0;        // 0: validation hook off
  int image_size = 256;
  MaskPool mask_pool = MaskPool::kAverage;

  void validate() const {
    if (batch_size < 1) fail("config", "train: batch_size must be >= 1");
    if (teacher_lr <= 0 || student_lr <= 0) fail("config", "train: learning rates must be > 0");
    if (max_iterations < 0) fail("config", "train: max_iterations must be >= 0");
    if (image_size <= 0 || image_size % 32)
      fail("config", "train: image_size must be a positive multiple of 32");
  }
};

struct LossRecord {
  int64_t iteration = 0;
  double l_te_n = 0, l_te_a = 0, l_s = 0;
  double wall_ms = 0;
};

// One optimization step over a batch of raw [0,1] images: synthesize the
// anomalous counterparts, run expert/teacher/student, compute both losses
// from the same forward pass, then step the two optimizers (gradients are
// fully gathered before either step).
class Trainer {
 public:
  Trainer(EtsModel<Real>& model, const Synthesizer& synth, const TrainConfig& cfg);

  LossRecord train_step(const std::vector<const Tensor<Real>*>& batch);

  int64_t iteration() const { return iteration_; }
  Adam<Real>& teacher_opt() { return teacher_opt_; }
  Adam<Real>& student_opt() { return student_opt_; }

  // Test seams: disable one optimizer to verify parameter isolation.
  bool step_teacher = true;
  bool step_student = true;

 private:
  EtsModel<Real>& model_;
  const Synthesizer& synth_;
  TrainConfig cfg_;
  Adam<Real> teacher_opt_, student_opt_;
  Rng base_rng_;
  int64_t iteration_ = 0;
};

struct FitOptions {
  std::string out_dir;
  nlohmann::json config_echo;
  std::ostream* log = nullptr;          // JSON-lines loss log
  const Dataset* validation = nullptr;  // used by the eval hook when eval_every > 0
  int early_stop_patience = 0;          // evals without improvement before stopping; 0 = off
  double eval_sigma = 4.0;
};

struct FitResult {
  int64_t iterations = 0;
  std::string checkpoint_path;
  double best_val_p_auc = -1;
};

// Epoch-shuffled training to max_iterations with periodic checkpoints; the
// final checkpoint (teacher + bottleneck + decoder + GII, optimizer state,
// config echo, iteration) lands at <out_dir>/model.etsc.
FitResult fit(EtsModel<Real>& model, const Dataset& train_data, const Synthesizer& synth,
              const TrainConfig& cfg, const FitOptions& opts);

// Assemble a normalized batch and the matching synthetic batch. Exposed for
// tests; train_step uses it internally.
struct SynthBatch {
  Tensor<Real> normal;     // normalized (N,3,S,S)
  Tensor<Real> anomalous;  // normalized (N,3,S,S)
  Tensor<Real> mask;       // (N,1,S,S)
};
SynthBatch make_batch(const std::vector<const Tensor<Real>*>& images, const Synthesizer& synth,
                      Rng& rng);

}  // namespace ets
