#include "asc/model_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "asc/error.hpp"

namespace asc {

using nlohmann::json;

std::size_t ConvTSpec::expanded_channels() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(in_channels) * expand_ratio));
}

namespace {

std::string block_name(std::size_t i) { return "block" + std::to_string(i); }

void check_se_site(std::size_t channels, std::size_t r, const std::string& where) {
  if (channels % r != 0 || channels / r == 0) {
    throw ConfigError("se_reduction " + std::to_string(r) + " does not divide " + std::to_string(channels) +
                      " channels at " + where);
  }
}

}  // namespace

void ModelConfig::validate() const {
  frontend.validate();
  if (input_mels != frontend.n_mels) throw ConfigError("input_mels must equal frontend.n_mels");
  if (input_mels < 2 || input_frames < 2) throw ConfigError("input needs at least 2 mels and 2 frames for pooling");
  if (stem_out_channels == 0) throw ConfigError("stem_out_channels must be >= 1");
  if (se_reduction == 0) throw ConfigError("se_reduction must be >= 1");
  if (shuffle_groups == 0) throw ConfigError("shuffle_groups must be >= 1");
  if (gru_hidden == 0) throw ConfigError("gru_hidden must be >= 1");
  if (n_classes < 2) throw ConfigError("n_classes must be >= 2");
  check_se_site(stem_out_channels, se_reduction, "the stem");
  std::size_t channels = stem_out_channels;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const ConvTSpec& b = blocks[i];
    const std::string where = block_name(i);
    if (b.in_channels != channels) {
      throw ConfigError(where + ".in_channels is " + std::to_string(b.in_channels) + " but the previous stage emits " +
                        std::to_string(channels));
    }
    if (!(b.expand_ratio > 0.0) || b.expanded_channels() == 0) throw ConfigError(where + ": expand_ratio too small");
    if (b.dw_multiplier == 0) throw ConfigError(where + ": dw_multiplier must be >= 1");
    if (b.time_kernel % 2 == 0 || b.freq_kernel % 2 == 0) throw ConfigError(where + ": kernels must be odd");
    if (b.freq_stride != 1 && b.freq_stride != 2) throw ConfigError(where + ": freq_stride must be 1 or 2");
    if (b.expanded_channels() % shuffle_groups != 0) {
      throw ConfigError(where + ": shuffle_groups " + std::to_string(shuffle_groups) + " does not divide " +
                        std::to_string(b.expanded_channels()) + " expanded channels");
    }
    channels = b.out_channels();
    if (has_se_after_block(i)) check_se_site(channels, se_reduction, where);
  }
}

std::size_t ModelConfig::final_channels() const {
  return blocks.empty() ? stem_out_channels : blocks.back().out_channels();
}

ModelConfig default_model_config() {
  ModelConfig cfg;
  cfg.stem_out_channels = 12;
  cfg.blocks = {
      {12, 2.0, 1, 3, 3, 2},
      {24, 1.0, 2, 3, 3, 2},
      {48, 1.0, 2, 3, 3, 2},
      {96, 1.0, 1, 3, 3, 2},
  };
  cfg.se_reduction = 4;
  cfg.shuffle_groups = 4;
  cfg.gru_hidden = 112;
  cfg.head_fusion = HeadFusion::kAdd;
  return cfg;
}

std::vector<LayerShape> plan_layers(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<LayerShape> out;
  std::size_t c = cfg.stem_out_channels, f = cfg.input_mels, t = cfg.input_frames;
  out.push_back({"stem", LayerKind::kStem, {1, f, t}, {c, f, t}});
  out.push_back({"pool", LayerKind::kHybridPool, {c, f, t}, {c, f / 2, t / 2}});
  f /= 2;
  t /= 2;
  out.push_back({"se0", LayerKind::kSqueezeExcite, {c, f, t}, {c, f, t}});
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const ConvTSpec& b = cfg.blocks[i];
    const std::string n = block_name(i);
    const std::size_t e = b.expanded_channels();
    out.push_back({n + ".pw", LayerKind::kPointwise, {c, f, t}, {e, f, t}});
    out.push_back({n + ".shuffle", LayerKind::kShuffle, {e, f, t}, {e, f, t}});
    out.push_back({n + ".dw_time", LayerKind::kDepthwiseTime, {e, f, t}, {e, f, t}, b.time_kernel});
    const std::size_t fo = (f + b.freq_stride - 1) / b.freq_stride;
    out.push_back({n + ".dw_freq", LayerKind::kDepthwiseFreq, {e, f, t}, {e * b.dw_multiplier, fo, t}, b.freq_kernel,
                   b.dw_multiplier, b.freq_stride});
    c = e * b.dw_multiplier;
    f = fo;
    if (cfg.has_se_after_block(i)) {
      out.push_back({"se" + std::to_string(i + 1), LayerKind::kSqueezeExcite, {c, f, t}, {c, f, t}});
    }
  }
  const std::size_t h = cfg.gru_hidden;
  out.push_back({"time_mean", LayerKind::kTimeMean, {c, f, t}, {c, f}});
  out.push_back({"gru", LayerKind::kGru, {c, f}, {c, h}});
  out.push_back({"branch", LayerKind::kBranchConv, {c, f}, {c, h}});
  out.push_back({"fusion", LayerKind::kFusion, {c, h}, {c, cfg.head_width()}});
  out.push_back({"head", LayerKind::kHead, {c, cfg.head_width()}, {cfg.n_classes}});
  return out;
}

std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<std::string, Shape>> p;
  const auto add_se = [&](const std::string& n, std::size_t c) {
    const std::size_t hidden = c / cfg.se_reduction;
    p.push_back({n + ".fc1.weight", {hidden, c}});
    p.push_back({n + ".fc1.bias", {hidden}});
    p.push_back({n + ".fc2.weight", {c, hidden}});
    p.push_back({n + ".fc2.bias", {c}});
  };
  std::size_t c = cfg.stem_out_channels;
  p.push_back({"stem.weight", {c, 1, 3, 3}});
  p.push_back({"stem.bias", {c}});
  add_se("se0", c);
  std::size_t f = cfg.input_mels / 2;
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const ConvTSpec& b = cfg.blocks[i];
    const std::string n = block_name(i);
    const std::size_t e = b.expanded_channels();
    p.push_back({n + ".pw.weight", {e, c}});
    p.push_back({n + ".pw.bias", {e}});
    p.push_back({n + ".dw_time.weight", {e, b.time_kernel}});
    p.push_back({n + ".dw_freq.weight", {e * b.dw_multiplier, b.freq_kernel}});
    c = b.out_channels();
    f = (f + b.freq_stride - 1) / b.freq_stride;
    if (cfg.has_se_after_block(i)) add_se("se" + std::to_string(i + 1), c);
  }
  const std::size_t h = cfg.gru_hidden;
  for (const char* g : {"z", "r", "h"}) {
    p.push_back({std::string("gru.w_") + g, {h, f}});
    p.push_back({std::string("gru.u_") + g, {h, h}});
    p.push_back({std::string("gru.b_") + g, {h}});
  }
  p.push_back({"branch.weight", {h, f}});
  p.push_back({"head.weight", {cfg.n_classes, cfg.head_width()}});
  p.push_back({"head.bias", {cfg.n_classes}});
  return p;
}

// ---- JSON ----

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw ConfigError("unknown field '" + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where + ": " + e.what());
  }
}

json frontend_to_json(const FrontendConfig& f) {
  return json{{"sample_rate_hz", f.sample_rate_hz}, {"n_fft", f.n_fft},       {"win_length", f.win_length},
              {"hop_length", f.hop_length},         {"n_mels", f.n_mels},     {"f_min_hz", f.f_min_hz},
              {"f_max_hz", f.f_max_hz},             {"log_floor", f.log_floor}};
}

FrontendConfig frontend_from_json(const json& j) {
  reject_unknown(j, {"sample_rate_hz", "n_fft", "win_length", "hop_length", "n_mels", "f_min_hz", "f_max_hz", "log_floor"},
                 "frontend");
  FrontendConfig f;
  read_opt(j, "sample_rate_hz", f.sample_rate_hz, "frontend");
  read_opt(j, "n_fft", f.n_fft, "frontend");
  read_opt(j, "win_length", f.win_length, "frontend");
  read_opt(j, "hop_length", f.hop_length, "frontend");
  read_opt(j, "n_mels", f.n_mels, "frontend");
  read_opt(j, "f_min_hz", f.f_min_hz, "frontend");
  read_opt(j, "f_max_hz", f.f_max_hz, "frontend");
  read_opt(j, "log_floor", f.log_floor, "frontend");
  return f;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
  json blocks = json::array();
  for (const auto& b : cfg.blocks) {
    blocks.push_back({{"in_channels", b.in_channels},
                      {"expand_ratio", b.expand_ratio},
                      {"dw_multiplier", b.dw_multiplier},
                      {"time_kernel", b.time_kernel},
                      {"freq_kernel", b.freq_kernel},
                      {"freq_stride", b.freq_stride}});
  }
  json j = {{"schema_version", ModelConfig::kSchemaVersion},
            {"stem_out_channels", cfg.stem_out_channels},
            {"blocks", blocks},
            {"se_reduction", cfg.se_reduction},
            {"shuffle_groups", cfg.shuffle_groups},
            {"gru_hidden", cfg.gru_hidden},
            {"head_fusion", cfg.head_fusion == HeadFusion::kAdd ? "add" : "concat"},
            {"n_classes", cfg.n_classes},
            {"input_mels", cfg.input_mels},
            {"input_frames", cfg.input_frames},
            {"frontend", frontend_to_json(cfg.frontend)}};
  return j.dump(2) + "\n";
}

ModelConfig model_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("model config is not valid JSON: ") + e.what());
  }
  reject_unknown(j,
                 {"schema_version", "stem_out_channels", "blocks", "se_reduction", "shuffle_groups", "gru_hidden",
                  "head_fusion", "n_classes", "input_mels", "input_frames", "frontend"},
                 "model config");
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
      j["schema_version"].get<int>() != ModelConfig::kSchemaVersion) {
    throw ConfigError("model config needs \"schema_version\": " + std::to_string(ModelConfig::kSchemaVersion));
  }
  ModelConfig cfg;
  cfg.blocks.clear();
  read_opt(j, "stem_out_channels", cfg.stem_out_channels, "model config");
  read_opt(j, "se_reduction", cfg.se_reduction, "model config");
  read_opt(j, "shuffle_groups", cfg.shuffle_groups, "model config");
  read_opt(j, "gru_hidden", cfg.gru_hidden, "model config");
  read_opt(j, "n_classes", cfg.n_classes, "model config");
  read_opt(j, "input_mels", cfg.input_mels, "model config");
  read_opt(j, "input_frames", cfg.input_frames, "model config");
  if (j.contains("head_fusion")) {
    std::string mode;
    read_opt(j, "head_fusion", mode, "model config");
    if (mode == "add") {
      cfg.head_fusion = HeadFusion::kAdd;
    } else if (mode == "concat") {
      cfg.head_fusion = HeadFusion::kConcat;
    } else {
      throw ConfigError("head_fusion must be \"add\" or \"concat\"");
    }
  }
  if (j.contains("frontend")) cfg.frontend = frontend_from_json(j["frontend"]);
  if (j.contains("blocks")) {
    if (!j["blocks"].is_array()) throw ConfigError("blocks must be an array");
    for (std::size_t i = 0; i < j["blocks"].size(); ++i) {
      const json& b = j["blocks"][i];
      const std::string where = "blocks[" + std::to_string(i) + "]";
      reject_unknown(b, {"in_channels", "expand_ratio", "dw_multiplier", "time_kernel", "freq_kernel", "freq_stride"},
                     where);
      ConvTSpec s;
      read_opt(b, "in_channels", s.in_channels, where);
      read_opt(b, "expand_ratio", s.expand_ratio, where);
      read_opt(b, "dw_multiplier", s.dw_multiplier, where);
      read_opt(b, "time_kernel", s.time_kernel, where);
      read_opt(b, "freq_kernel", s.freq_kernel, where);
      read_opt(b, "freq_stride", s.freq_stride, where);
      cfg.blocks.push_back(s);
    }
  }
  cfg.validate();
  return cfg;
}

ModelConfig load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_config_from_json(ss.str());
}

}  // namespace asc
