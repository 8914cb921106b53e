// etsad: train / evaluate / inspect expert-teacher-student anomaly detectors.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ets/config.hpp"
#include "ets/evaluate.hpp"
#include "ets/image_io.hpp"
#include "ets/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string data_root, category, manifest, texture_source, out;
  int64_t max_iterations = -1;
  int64_t seed = -1;
  int batch_size = -1;
  int image_size = -1;
};

// File values first, then flags on top.
ets::RunConfig resolve_config(const CommonArgs& a) {
  ets::RunConfig cfg;
  if (!a.config_path.empty()) cfg = ets::load_run_config(a.config_path);
  if (!a.data_root.empty()) cfg.data_root = a.data_root;
  if (!a.category.empty()) cfg.category = a.category;
  if (!a.manifest.empty()) cfg.manifest = a.manifest;
  if (!a.texture_source.empty()) cfg.synth.texture_source = a.texture_source;
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (a.max_iterations >= 0) cfg.train.max_iterations = a.max_iterations;
  if (a.seed >= 0) {
    cfg.train.seed = static_cast<uint64_t>(a.seed);
    cfg.synth.seed = cfg.train.seed;
  }
  if (a.batch_size > 0) cfg.train.batch_size = a.batch_size;
  if (a.image_size > 0) {
    cfg.image_size = a.image_size;
    cfg.train.image_size = a.image_size;
  }
  return cfg;
}

ets::Dataset load_dataset(const ets::RunConfig& cfg, ets::Split split) {
  if (!cfg.manifest.empty()) return ets::load_manifest(cfg.manifest, split, cfg.image_size);
  ets::DatasetSpec spec;
  spec.root_path = cfg.data_root;
  spec.category = cfg.category;
  spec.image_size = cfg.image_size;
  spec.split = split;
  return ets::load_split(spec);
}

void echo_config(const ets::RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  std::ofstream out(fs::path(cfg.out_dir) / "config.json");
  out << cfg.to_json().dump(2) << "\n";
}

int cmd_train(const CommonArgs& args) {
  ets::RunConfig cfg = resolve_config(args);
  cfg.train.validate();
  echo_config(cfg);

  ets::Dataset train_data = load_dataset(cfg, ets::Split::kTrain);
  ets::Synthesizer synth = ets::make_synthesizer(cfg.synth);
  ets::EtsModel<ets::Real> model = ets::build_model<ets::Real>(cfg.model);

  std::ofstream log(fs::path(cfg.out_dir) / "train_log.jsonl");
  ets::FitOptions opts;
  opts.out_dir = cfg.out_dir;
  opts.config_echo = cfg.to_json();
  opts.log = &log;
  opts.early_stop_patience = cfg.early_stop_patience;
  opts.eval_sigma = cfg.eval.sigma;
  ets::Dataset val;
  if (cfg.train.eval_every > 0 && !cfg.val_manifest.empty()) {
    val = ets::load_manifest(cfg.val_manifest, ets::Split::kTest, cfg.image_size);
    opts.validation = &val;
  }

  ets::FitResult res = ets::fit(model, train_data, synth, cfg.train, opts);
  std::cout << "trained " << res.iterations << " iterations; checkpoint: "
            << res.checkpoint_path << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& ckpt, const std::string& report_path,
             const std::string& heatmap_dir) {
  ets::RunConfig cfg = resolve_config(args);
  auto loaded = ets::load_checkpoint<ets::Real>(ckpt);
  cfg.image_size = loaded.config_echo.contains("data")
                       ? loaded.config_echo["data"].value("image_size", cfg.image_size)
                       : cfg.image_size;
  if (args.image_size > 0) cfg.image_size = args.image_size;

  ets::Dataset test = load_dataset(cfg, ets::Split::kTest);
  ets::EvalOptions eo = cfg.eval;
  if (!heatmap_dir.empty()) eo.heatmap_dir = heatmap_dir;
  ets::MetricsReport rep = ets::evaluate(loaded.model, test, eo);

  std::cout << "category=" << cfg.category << " i_auc=" << rep.i_auc << " i_ap=" << rep.i_ap
            << " p_auc=" << rep.p_auc << " p_ap=" << rep.p_ap << " p_pro=" << rep.p_pro << "\n";

  json report = {{"category", cfg.category},
                 {"metrics",
                  {{"i_auc", rep.i_auc},
                   {"i_ap", rep.i_ap},
                   {"p_auc", rep.p_auc},
                   {"p_ap", rep.p_ap},
                   {"p_pro", rep.p_pro}}},
                 {"config_digest", ets::config_digest(cfg)},
                 {"n_images", rep.n_images}};
  if (!report_path.empty()) {
    if (fs::path(report_path).has_parent_path())
      fs::create_directories(fs::path(report_path).parent_path());
    std::ofstream out(report_path);
    out << report.dump(2) << "\n";
  }
  return 0;
}

int cmd_synth_preview(const CommonArgs& args, int n) {
  ets::RunConfig cfg = resolve_config(args);
  ets::Dataset train_data = load_dataset(cfg, ets::Split::kTrain);
  if (train_data.items.empty()) ets::fail("dataset-layout", "no training images to preview");
  ets::Synthesizer synth = ets::make_synthesizer(cfg.synth);
  fs::create_directories(cfg.out_dir);
  ets::Rng rng = ets::Rng::seeded(cfg.synth.seed);
  for (int i = 0; i < n; ++i) {
    const auto& item = train_data.items[static_cast<size_t>(i) % train_data.items.size()];
    ets::SyntheticSample<ets::Real> s = synth.synthesize(item.image, rng);
    const std::string stem = (fs::path(cfg.out_dir) / std::to_string(i)).string();
    ets::save_png(stem + "_normal.png", item.image);
    ets::save_png(stem + "_anomalous.png", s.anomalous_image);
    ets::save_png(stem + "_mask.png", s.mask);
  }
  std::cout << "wrote " << 3 * n << " files to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_score(const std::string& ckpt, const std::string& image_path, const std::string& out_dir,
              double sigma) {
  auto loaded = ets::load_checkpoint<ets::Real>(ckpt);
  const int size = loaded.config_echo.contains("data")
                       ? loaded.config_echo["data"].value("image_size", 256)
                       : 256;
  ets::Tensor<ets::Real> img = ets::resize_image(ets::load_image_rgb(image_path), size);
  ets::AnomalyMapResult<ets::Real> am = ets::score_image(loaded.model, img, sigma);
  std::cout << "image_score=" << am.image_score << "\n";
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    const ets::Real lo = am.map.array().minCoeff(), hi = am.map.array().maxCoeff();
    ets::Tensor<ets::Real> norm = am.map;
    if (hi > lo)
      norm.array() = (norm.array() - lo) / (hi - lo);
    else
      norm.array().setZero();
    const std::string stem = (fs::path(out_dir) / fs::path(image_path).stem()).string();
    ets::save_png(stem + "_heatmap.png", norm);
    std::ofstream side(stem + "_heatmap.json");
    side << "{\"score_min\":" << lo << ",\"score_max\":" << hi
         << ",\"image_score\":" << am.image_score << "}\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"expert-teacher-student anomaly detection"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* cmd, bool with_train_flags) {
    cmd->add_option("--config", args.config_path, "YAML or JSON config file");
    cmd->add_option("--data-root", args.data_root, "dataset root folder");
    cmd->add_option("--category", args.category, "dataset category");
    cmd->add_option("--manifest", args.manifest, "JSONL manifest instead of MVTec layout");
    cmd->add_option("--out", args.out, "output directory");
    cmd->add_option("--image-size", args.image_size, "input resolution");
    if (with_train_flags) {
      cmd->add_option("--texture-source", args.texture_source, "overlay texture folder");
      cmd->add_option("--max-iterations", args.max_iterations, "training iteration budget");
      cmd->add_option("--seed", args.seed, "RNG seed");
      cmd->add_option("--batch-size", args.batch_size, "batch size");
    }
  };

  CLI::App* train = app.add_subcommand("train", "train one category");
  add_common(train, true);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  std::string ckpt, report_path = "report.json", heatmap_dir;
  eval->add_option("--ckpt", ckpt, "checkpoint file")->required();
  eval->add_option("--report", report_path, "metrics report path (JSON)");
  eval->add_option("--heatmaps", heatmap_dir, "write per-image heat maps to this folder");
  add_common(eval, false);

  CLI::App* synth = app.add_subcommand("synth-preview", "write synthetic (normal, anomalous, mask) triples");
  int preview_n = 4;
  synth->add_option("--n", preview_n, "number of triples");
  add_common(synth, true);

  CLI::App* score = app.add_subcommand("score", "score a single image");
  std::string image_path, score_out;
  double score_sigma = 4.0;
  score->add_option("--ckpt", ckpt, "checkpoint file")->required();
  score->add_option("--image", image_path, "input image")->required();
  score->add_option("--out", score_out, "heat-map output directory");
  score->add_option("--sigma", score_sigma, "smoothing sigma");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(args);
    if (eval->parsed()) return cmd_eval(args, ckpt, report_path, heatmap_dir);
    if (synth->parsed()) return cmd_synth_preview(args, preview_n);
    if (score->parsed()) return cmd_score(ckpt, image_path, score_out, score_sigma);
  } catch (const ets::Error& e) {
    std::cerr << "error[" << e.kind() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
