#include "ets/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "ets/evaluate.hpp"
#include "ets/image.hpp"

namespace fs = std::filesystem;

namespace ets {

SynthBatch make_batch(const std::vector<const Tensor<Real>*>& images, const Synthesizer& synth,
                      Rng& rng) {
  if (images.empty()) fail("config", "train: empty batch");
  const int N = static_cast<int>(images.size());
  const int H = images[0]->h(), W = images[0]->w();
  SynthBatch b;
  b.normal = Tensor<Real>(N, 3, H, W);
  b.anomalous = Tensor<Real>(N, 3, H, W);
  b.mask = Tensor<Real>(N, 1, H, W);
  const Eigen::Index img_len = static_cast<Eigen::Index>(3) * H * W;
  const Eigen::Index mask_len = static_cast<Eigen::Index>(H) * W;
  for (int n = 0; n < N; ++n) {
    const Tensor<Real>& raw = *images[n];
    if (raw.h() != H || raw.w() != W) fail("shape", "train: mixed image sizes in batch");
    SyntheticSample<Real> s = synth.synthesize(raw, rng);
    std::copy(raw.data(), raw.data() + img_len, b.normal.data() + n * img_len);
    std::copy(s.anomalous_image.data(), s.anomalous_image.data() + img_len,
              b.anomalous.data() + n * img_len);
    std::copy(s.mask.data(), s.mask.data() + mask_len, b.mask.data() + n * mask_len);
  }
  b.normal = normalize_pretrain(b.normal);
  b.anomalous = normalize_pretrain(b.anomalous);
  return b;
}

Trainer::Trainer(EtsModel<Real>& model, const Synthesizer& synth, const TrainConfig& cfg)
    : model_(model),
      synth_(synth),
      cfg_(cfg),
      teacher_opt_(model.teacher_params(), cfg.teacher_lr, cfg.adam_beta1, cfg.adam_beta2),
      student_opt_(model.student_params(), cfg.student_lr, cfg.adam_beta1, cfg.adam_beta2),
      base_rng_(Rng::seeded(cfg.seed)) {
  cfg.validate();
  model_.set_train_mode();
}

LossRecord Trainer::train_step(const std::vector<const Tensor<Real>*>& batch) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng step_rng = base_rng_.fork(static_cast<uint64_t>(iteration_));
  SynthBatch b = make_batch(batch, synth_, step_rng);

  Tape<Real> tape;
  Var<Real> x_n = tape.value(b.normal);
  Var<Real> x_a = tape.value(b.anomalous);
  PyramidVars<Real> expert_pyr = model_.expert_forward(tape, x_n);
  auto branch_n = model_.branch_forward(tape, x_n);
  auto branch_a = model_.branch_forward(tape, x_a);

  TeacherLossVars<Real> lte = teacher_loss(tape, branch_n.teacher, branch_a.teacher, expert_pyr,
                                           b.mask, cfg_.mask_pool);
  Var<Real> ls = student_loss(tape, branch_n.student, branch_a.student, expert_pyr,
                              branch_n.teacher);

  LossRecord rec;
  rec.iteration = iteration_;
  rec.l_te_n = tape.val(lte.normal).data()[0];
  rec.l_te_a = tape.val(lte.anomalous).data()[0];
  rec.l_s = tape.val(ls).data()[0];
  if (!std::isfinite(rec.l_te_n) || !std::isfinite(rec.l_te_a) || !std::isfinite(rec.l_s))
    fail("nan-loss", "non-finite loss at iteration " + std::to_string(iteration_) +
                         " (l_te_n=" + std::to_string(rec.l_te_n) +
                         ", l_te_a=" + std::to_string(rec.l_te_a) +
                         ", l_s=" + std::to_string(rec.l_s) + ")");

  // One backward over the sum: the teacher loss touches no student-side
  // parameter and the student loss reaches the teacher only through detached
  // features, so the gradient sets are disjoint by construction.
  Var<Real> total = ops::add(tape, lte.total, ls);
  tape.backward(total);

  if (step_teacher) teacher_opt_.step();
  if (step_student) student_opt_.step();
  teacher_opt_.zero_grad();
  student_opt_.zero_grad();

  ++iteration_;
  rec.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

FitResult fit(EtsModel<Real>& model, const Dataset& train_data, const Synthesizer& synth,
              const TrainConfig& cfg, const FitOptions& opts) {
  cfg.validate();
  if (train_data.items.empty()) fail("dataset-layout", "train: dataset train split is empty");
  fs::create_directories(opts.out_dir);

  Trainer trainer(model, synth, cfg);
  Rng shuffle_rng = Rng::seeded(cfg.seed ^ 0x5A17F1E5ull);
  FitResult result;

  std::vector<size_t> order(train_data.items.size());
  std::iota(order.begin(), order.end(), size_t(0));
  size_t cursor = order.size();  // trigger reshuffle on first use
  int64_t epoch = 0;

  const auto write_ckpt = [&](const std::string& name) {
    const std::string path = (fs::path(opts.out_dir) / name).string();
    save_checkpoint(path, model, trainer.iteration(), opts.config_echo, &trainer.teacher_opt(),
                    &trainer.student_opt());
    return path;
  };

  int evals_since_best = 0;
  while (trainer.iteration() < cfg.max_iterations) {
    std::vector<const Tensor<Real>*> batch;
    for (int i = 0; i < cfg.batch_size; ++i) {
      if (cursor >= order.size()) {
        Rng r = shuffle_rng.fork(static_cast<uint64_t>(epoch++));
        for (size_t j = order.size(); j > 1; --j)
          std::swap(order[j - 1], order[static_cast<size_t>(r.uniform_int(0, static_cast<int64_t>(j) - 1))]);
        cursor = 0;
      }
      batch.push_back(&train_data.items[order[cursor++]].image);
    }

    LossRecord rec = trainer.train_step(batch);
    if (opts.log) {
      *opts.log << "{\"iteration\":" << rec.iteration << ",\"l_te_n\":" << rec.l_te_n
                << ",\"l_te_a\":" << rec.l_te_a << ",\"l_s\":" << rec.l_s
                << ",\"wall_ms\":" << rec.wall_ms << "}\n";
      opts.log->flush();
    }

    if (cfg.checkpoint_every > 0 && trainer.iteration() % cfg.checkpoint_every == 0 &&
        trainer.iteration() < cfg.max_iterations)
      write_ckpt("ckpt_" + std::to_string(trainer.iteration()) + ".etsc");

    if (cfg.eval_every > 0 && opts.validation && trainer.iteration() % cfg.eval_every == 0) {
      EvalOptions eo;
      eo.sigma = opts.eval_sigma;
      MetricsReport rep = evaluate(model, *opts.validation, eo);
      model.set_train_mode();
      if (rep.p_auc > result.best_val_p_auc) {
        result.best_val_p_auc = rep.p_auc;
        evals_since_best = 0;
        write_ckpt("best.etsc");
      } else if (opts.early_stop_patience > 0 && ++evals_since_best >= opts.early_stop_patience) {
        break;
      }
    }
  }

  result.iterations = trainer.iteration();
  result.checkpoint_path = write_ckpt("model.etsc");
  return result;
}

}  // namespace ets
