#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ets/model.hpp"
#include "ets/scoring.hpp"
#include "ets/synthesis.hpp"
#include "ets/trainer.hpp"

namespace ets {

// One config file drives every subcommand. Defaults follow the method's
// stated training recipe (256 inputs, batch 16, 10k iterations, Adam with
// betas (0.5, 0.999), teacher lr 1e-4, student lr 5e-3, sigma 4).
struct RunConfig {
  std::string data_root;
  std::string category;
  std::string manifest;  // JSONL alternative to the MVTec layout
  int image_size = 256;

  ModelSpec model;
  SynthesisConfig synth;
  TrainConfig train;
  EvalOptions eval;

  std::string val_manifest;      // validation list for the optional eval hook
  int early_stop_patience = 0;   // evals without improvement; 0 = off
  std::string out_dir = "runs/default";

  nlohmann::json to_json() const;
};

// Parse YAML or JSON (by extension, defaulting to YAML syntax which is a
// superset here). Unknown keys anywhere are collected and reported together.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// CRC32 hex digest of the canonical config JSON, recorded in reports.
std::string config_digest(const RunConfig& cfg);

}  // namespace ets
