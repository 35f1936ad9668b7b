#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "left/training.hpp"

// Checkpoint archive: a magic header, a JSON manifest (format version,
// config snapshot, optimizer step, shuffle RNG state), then one named blob
// per tensor in little-endian 64-bit floats with a shape header. Parameters
// and Adam moments round-trip bit-exactly.

namespace left {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

using json = nlohmann::json;

inline json to_json(const StftConfig& c) {
  return json{{"window_length", c.window_length},
              {"hop", c.hop},
              {"fft_size", c.fft_size},
              {"window_kind", c.window_kind == WindowKind::hann ? "hann" : "rect"},
              {"center_pad", c.center_pad}};
}

inline StftConfig stft_from_json(const json& j) {
  StftConfig c;
  c.window_length = j.at("window_length");
  c.hop = j.at("hop");
  c.fft_size = j.at("fft_size");
  c.window_kind =
      j.at("window_kind") == "hann" ? WindowKind::hann : WindowKind::rect;
  c.center_pad = j.at("center_pad");
  return c;
}

inline json to_json(const EncoderConfig& c) {
  return json{{"d_model", c.d_model},
              {"time_kernels", {c.time_kernels[0], c.time_kernels[1], c.time_kernels[2]}},
              {"freq_kernel", c.freq_kernel},
              {"freq_hidden", c.freq_hidden},
              {"patch_len", c.patch_len},
              {"ms_depth", c.ms_depth},
              {"heads", c.heads}};
}

inline EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig c;
  c.d_model = j.at("d_model");
  for (int i = 0; i < 3; ++i) c.time_kernels[i] = j.at("time_kernels")[i];
  c.freq_kernel = j.at("freq_kernel");
  c.freq_hidden = j.at("freq_hidden");
  c.patch_len = j.at("patch_len");
  c.ms_depth = j.at("ms_depth");
  c.heads = j.at("heads");
  return c;
}

inline json to_json(const FusionConfig& c) {
  return json{{"depth", c.depth},
              {"strategy", to_string(c.strategy)},
              {"heads", c.heads},
              {"d_model", c.d_model},
              {"sequential", c.sequential}};
}

inline FusionConfig fusion_from_json(const json& j) {
  FusionConfig c;
  c.depth = j.at("depth");
  c.strategy = fusion_strategy_from_string(j.at("strategy"));
  c.heads = j.at("heads");
  c.d_model = j.at("d_model");
  c.sequential = j.at("sequential");
  return c;
}

inline json to_json(const ModelConfig& c) {
  return json{{"window", c.window},
              {"channels", c.channels},
              {"enc", to_json(c.enc)},
              {"stft", to_json(c.stft)},
              {"factors", c.factors},
              {"tau", c.tau},
              {"eps", c.eps},
              {"prototypes", c.prototypes},
              {"gamma", c.gamma},
              {"fusion", to_json(c.fusion)},
              {"beta_res", c.beta_res},
              {"beta_int", c.beta_int},
              {"pos_dim", c.pos_dim},
              {"decoder_hidden", c.decoder_hidden},
              {"learnable_filterbank", c.learnable_filterbank},
              {"enable_interaction", c.enable_interaction},
              {"seed", c.seed}};
}

inline ModelConfig model_from_json(const json& j) {
  ModelConfig c;
  c.window = j.at("window");
  c.channels = j.at("channels");
  c.enc = encoder_from_json(j.at("enc"));
  c.stft = stft_from_json(j.at("stft"));
  c.factors = j.at("factors").get<std::vector<std::size_t>>();
  c.tau = j.at("tau");
  c.eps = j.at("eps");
  c.prototypes = j.at("prototypes");
  c.gamma = j.at("gamma");
  c.fusion = fusion_from_json(j.at("fusion"));
  c.beta_res = j.at("beta_res");
  c.beta_int = j.at("beta_int");
  c.pos_dim = j.at("pos_dim");
  c.decoder_hidden = j.at("decoder_hidden");
  c.learnable_filterbank = j.at("learnable_filterbank");
  c.enable_interaction = j.at("enable_interaction");
  c.seed = j.at("seed");
  return c;
}

inline json to_json(const LossWeights& w) {
  return json{{"lambda_ms", w.lambda_ms},
              {"lambda_cyc", w.lambda_cyc},
              {"lambda_cons", w.lambda_cons},
              {"omega", w.omega.data}};
}

inline LossWeights loss_weights_from_json(const json& j) {
  LossWeights w;
  w.lambda_ms = j.at("lambda_ms");
  w.lambda_cyc = j.at("lambda_cyc");
  w.lambda_cons = j.at("lambda_cons");
  auto om = j.at("omega").get<std::vector<double>>();
  w.omega = Tensor({om.size()}, om);
  return w;
}

inline json to_json(const TrainConfig& c) {
  return json{{"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"lambda_start", c.lambda_start},
              {"lambda_end", c.lambda_end},
              {"ramp_fraction", c.ramp_fraction},
              {"loss_weights", to_json(c.loss_weights)},
              {"checkpoint_dir", c.checkpoint_dir},
              {"early_stop_patience", c.early_stop_patience},
              {"check_finite", c.check_finite},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_eps", c.adam_eps}};
}

inline TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate");
  c.batch_size = j.at("batch_size");
  c.epochs = j.at("epochs");
  c.seed = j.at("seed");
  c.lambda_start = j.at("lambda_start");
  c.lambda_end = j.at("lambda_end");
  c.ramp_fraction = j.at("ramp_fraction");
  c.loss_weights = loss_weights_from_json(j.at("loss_weights"));
  c.checkpoint_dir = j.at("checkpoint_dir");
  c.early_stop_patience = j.at("early_stop_patience");
  c.check_finite = j.at("check_finite");
  c.adam_beta1 = j.at("adam_beta1");
  c.adam_beta2 = j.at("adam_beta2");
  c.adam_eps = j.at("adam_eps");
  return c;
}

namespace detail {

constexpr char kCheckpointMagic[8] = {'L', 'E', 'F', 'T', 'C', 'K', 'P', '1'};

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

inline void write_blob(std::ostream& os, const std::string& name, const Tensor& t) {
  write_u32(os, std::uint32_t(name.size()));
  os.write(name.data(), std::streamsize(name.size()));
  write_u32(os, std::uint32_t(t.ndim()));
  for (auto d : t.shape) write_u64(os, d);
  os.write(reinterpret_cast<const char*>(t.data.data()),
           std::streamsize(t.data.size() * sizeof(double)));
}

inline std::pair<std::string, Tensor> read_blob(std::istream& is) {
  std::uint32_t nlen = read_u32(is);
  std::string name(nlen, '\0');
  is.read(name.data(), nlen);
  std::uint32_t nd = read_u32(is);
  Shape s(nd);
  for (auto& d : s) d = read_u64(is);
  Tensor t(s);
  is.read(reinterpret_cast<char*>(t.data.data()),
          std::streamsize(t.data.size() * sizeof(double)));
  if (!is) throw io_error("checkpoint: truncated blob " + name);
  return {std::move(name), std::move(t)};
}

}  // namespace detail

struct Checkpoint {
  int format_version = 1;
  std::uint64_t step = 0;
  std::uint64_t adam_t = 0;
  ModelConfig model_cfg;
  TrainConfig train_cfg;
  std::string shuffle_rng_state;
  std::map<std::string, Tensor> tensors;  // parameters and optimizer moments
};

inline void save_checkpoint(const std::string& path, const LeftModel& model,
                            const Adam& opt, const TrainConfig& tc,
                            std::uint64_t step, const std::string& rng_state) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot write checkpoint: " + path);
  os.write(detail::kCheckpointMagic, 8);

  json manifest{{"format_version", 1},
                {"step", step},
                {"model", to_json(model.cfg)},
                {"train", to_json(tc)},
                {"shuffle_rng", rng_state},
                {"adam_t", opt.t}};
  std::string mstr = manifest.dump();
  detail::write_u32(os, std::uint32_t(mstr.size()));
  os.write(mstr.data(), std::streamsize(mstr.size()));

  std::uint64_t n = model.params.items.size();
  bool with_adam = opt.m.size() == model.params.items.size();
  detail::write_u64(os, with_adam ? 3 * n : n);
  for (std::size_t i = 0; i < model.params.items.size(); ++i) {
    const auto& [name, var] = model.params.items[i];
    detail::write_blob(os, name, var->val);
    if (with_adam) {
      detail::write_blob(os, "adam.m." + name, opt.m[i]);
      detail::write_blob(os, "adam.v." + name, opt.v[i]);
    }
  }
  if (!os) throw io_error("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot read checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
    throw io_error("not a checkpoint file: " + path);
  std::uint32_t mlen = detail::read_u32(is);
  std::string mstr(mlen, '\0');
  is.read(mstr.data(), mlen);
  json manifest = json::parse(mstr);

  Checkpoint ck;
  ck.format_version = manifest.at("format_version");
  if (ck.format_version != 1) throw io_error("unsupported checkpoint version");
  ck.step = manifest.at("step");
  ck.adam_t = manifest.at("adam_t");
  ck.model_cfg = model_from_json(manifest.at("model"));
  ck.train_cfg = train_from_json(manifest.at("train"));
  ck.shuffle_rng_state = manifest.at("shuffle_rng");

  std::uint64_t n = detail::read_u64(is);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto [name, t] = detail::read_blob(is);
    ck.tensors.emplace(std::move(name), std::move(t));
  }
  return ck;
}

/// Rebuild the model from a checkpoint's config snapshot and load its
/// parameters. Shape disagreements raise shape_mismatch.
inline LeftModel restore_model(const Checkpoint& ck) {
  LeftModel model(ck.model_cfg);
  for (auto& [name, var] : model.params.items) {
    auto it = ck.tensors.find(name);
    if (it == ck.tensors.end())
      throw shape_mismatch("checkpoint missing parameter: " + name);
    if (it->second.shape != var->val.shape)
      throw shape_mismatch("checkpoint shape mismatch for " + name);
    var->val = it->second;
  }
  return model;
}

inline Adam restore_adam(const Checkpoint& ck, const LeftModel& model) {
  Adam opt;
  opt.init(model.params);
  for (std::size_t i = 0; i < model.params.items.size(); ++i) {
    const auto& name = model.params.items[i].first;
    auto mi = ck.tensors.find("adam.m." + name);
    auto vi = ck.tensors.find("adam.v." + name);
    if (mi == ck.tensors.end() || vi == ck.tensors.end()) continue;
    opt.m[i] = mi->second;
    opt.v[i] = vi->second;
  }
  opt.t = ck.adam_t;
  return opt;
}

}  // namespace left
