#include "ets/config.hpp"

#include <yaml-cpp/yaml.h>
#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace ets {

namespace {

json yaml_to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
      return nullptr;
    case YAML::NodeType::Scalar: {
      // Try bool, integer, float, then string.
      const std::string& s = n.Scalar();
      if (s == "true" || s == "True") return true;
      if (s == "false" || s == "False") return false;
      try {
        size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos == s.size()) return v;
      } catch (...) {
      }
      try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos == s.size()) return v;
      } catch (...) {
      }
      return s;
    }
    case YAML::NodeType::Sequence: {
      json a = json::array();
      for (const auto& e : n) a.push_back(yaml_to_json(e));
      return a;
    }
    case YAML::NodeType::Map: {
      json o = json::object();
      for (const auto& kv : n) o[kv.first.Scalar()] = yaml_to_json(kv.second);
      return o;
    }
    default:
      return nullptr;
  }
}

class StrictReader {
 public:
  StrictReader(const json& j, std::string scope, std::vector<std::string>& unknown)
      : j_(j), scope_(std::move(scope)), unknown_(unknown) {}

  template <typename T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    if (!j_.is_object() || !j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail("config", "config key '" + scope_ + key + "' has the wrong type");
    }
  }

  json section(const char* key) {
    seen_.push_back(key);
    if (!j_.is_object() || !j_.contains(key)) return json::object();
    return j_.at(key);
  }

  ~StrictReader() {
    if (!j_.is_object()) return;
    for (const auto& [k, v] : j_.items())
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end())
        unknown_.push_back(scope_ + k);
  }

 private:
  const json& j_;
  std::string scope_;
  std::vector<std::string>& unknown_;
  std::vector<std::string> seen_;
};

}  // namespace

RunConfig parse_run_config(const json& j) {
  RunConfig cfg;
  std::vector<std::string> unknown;
  {
    StrictReader top(j, "", unknown);
    {
      json d = top.section("data");
      StrictReader r(d, "data.", unknown);
      r.get("root", cfg.data_root);
      r.get("category", cfg.category);
      r.get("manifest", cfg.manifest);
      r.get("image_size", cfg.image_size);
    }
    {
      json m = top.section("model");
      StrictReader r(m, "model.", unknown);
      r.get("architecture", cfg.model.architecture);
      r.get("pretrained_weights", cfg.model.pretrained_weights);
      r.get("use_gii", cfg.model.use_gii);
      r.get("teacher_norm_eval", cfg.model.teacher_norm_eval);
    }
    {
      json s = top.section("synthesis");
      StrictReader r(s, "synthesis.", unknown);
      r.get("beta_min", cfg.synth.beta_min);
      r.get("beta_max", cfg.synth.beta_max);
      r.get("perlin_min_exp", cfg.synth.perlin_min_exp);
      r.get("perlin_max_exp", cfg.synth.perlin_max_exp);
      r.get("binarize_threshold", cfg.synth.binarize_threshold);
      r.get("use_foreground_mask", cfg.synth.use_foreground_mask);
      r.get("foreground_threshold", cfg.synth.foreground_threshold);
      r.get("texture_source", cfg.synth.texture_source);
      r.get("resample_attempts", cfg.synth.resample_attempts);
    }
    {
      json t = top.section("train");
      StrictReader r(t, "train.", unknown);
      r.get("batch_size", cfg.train.batch_size);
      r.get("max_iterations", cfg.train.max_iterations);
      r.get("teacher_lr", cfg.train.teacher_lr);
      r.get("student_lr", cfg.train.student_lr);
      r.get("adam_beta1", cfg.train.adam_beta1);
      r.get("adam_beta2", cfg.train.adam_beta2);
      r.get("seed", cfg.train.seed);
      r.get("checkpoint_every", cfg.train.checkpoint_every);
      r.get("eval_every", cfg.train.eval_every);
      std::string pool = "average";
      r.get("mask_pool", pool);
      if (pool == "average")
        cfg.train.mask_pool = MaskPool::kAverage;
      else if (pool == "max")
        cfg.train.mask_pool = MaskPool::kMax;
      else
        fail("config", "train.mask_pool must be 'average' or 'max'");
    }
    {
      json e = top.section("eval");
      StrictReader r(e, "eval.", unknown);
      r.get("sigma", cfg.eval.sigma);
      r.get("pro_fpr_limit", cfg.eval.pro_fpr_limit);
      r.get("pro_max_thresholds", cfg.eval.pro_max_thresholds);
      r.get("heatmap_dir", cfg.eval.heatmap_dir);
    }
    top.get("val_manifest", cfg.val_manifest);
    top.get("early_stop_patience", cfg.early_stop_patience);
    top.get("out_dir", cfg.out_dir);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    fail("config", msg);
  }
  cfg.train.image_size = cfg.image_size;
  cfg.synth.seed = cfg.train.seed;
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("config", "cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  json j;
  const bool looks_json = path.size() > 5 && path.substr(path.size() - 5) == ".json";
  if (looks_json) {
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      fail("config", std::string("config JSON parse error: ") + e.what());
    }
  } else {
    try {
      j = yaml_to_json(YAML::Load(text));
    } catch (const YAML::Exception& e) {
      fail("config", std::string("config YAML parse error: ") + e.what());
    }
  }
  return parse_run_config(j);
}

json RunConfig::to_json() const {
  json j;
  j["data"] = {{"root", data_root},
               {"category", category},
               {"manifest", manifest},
               {"image_size", image_size}};
  j["model"] = {{"architecture", model.architecture},
                {"pretrained_weights", model.pretrained_weights},
                {"use_gii", model.use_gii},
                {"teacher_norm_eval", model.teacher_norm_eval}};
  j["synthesis"] = {{"beta_min", synth.beta_min},
                    {"beta_max", synth.beta_max},
                    {"perlin_min_exp", synth.perlin_min_exp},
                    {"perlin_max_exp", synth.perlin_max_exp},
                    {"binarize_threshold", synth.binarize_threshold},
                    {"use_foreground_mask", synth.use_foreground_mask},
                    {"foreground_threshold", synth.foreground_threshold},
                    {"texture_source", synth.texture_source},
                    {"resample_attempts", synth.resample_attempts}};
  j["train"] = {{"batch_size", train.batch_size},
                {"max_iterations", train.max_iterations},
                {"teacher_lr", train.teacher_lr},
                {"student_lr", train.student_lr},
                {"adam_beta1", train.adam_beta1},
                {"adam_beta2", train.adam_beta2},
                {"seed", train.seed},
                {"checkpoint_every", train.checkpoint_every},
                {"eval_every", train.eval_every},
                {"mask_pool", train.mask_pool == MaskPool::kAverage ? "average" : "max"}};
  j["eval"] = {{"sigma", eval.sigma},
               {"pro_fpr_limit", eval.pro_fpr_limit},
               {"pro_max_thresholds", eval.pro_max_thresholds},
               {"heatmap_dir", eval.heatmap_dir}};
  j["val_manifest"] = val_manifest;
  j["early_stop_patience"] = early_stop_patience;
  j["out_dir"] = out_dir;
  return j;
}

std::string config_digest(const RunConfig& cfg) {
  const std::string s = cfg.to_json().dump();
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", crc);
  return buf;
}

}  // namespace ets
