// wav2vec/config_io.cpp
#include "semiasr/wav2vec/config_io.hpp"

#include "semiasr/nn/checkpoint.hpp"

namespace semiasr::wav2vec {

namespace {

const char* positional_name(PositionalScheme p) {
  switch (p) {
    case PositionalScheme::kSinusoidal: return "sinusoidal";
    case PositionalScheme::kConv: return "conv";
    case PositionalScheme::kNone: break;
  }
  return "none";
}

}  // namespace

Json to_json(const Wav2VecConfig& c) {
  Json layers = Json::array();
  for (const auto& l : c.encoder.layers) layers.push_back({{"stride", l.stride}, {"kernel", l.kernel}, {"channels", l.channels}});
  return {
      {"encoder", {{"layers", layers}, {"layer_norm", c.encoder.layer_norm}}},
      {"context",
       {{"blocks", c.context.blocks},
        {"dim", c.context.dim},
        {"ffn_dim", c.context.ffn_dim},
        {"heads", c.context.heads},
        {"positional", positional_name(c.context.positional)},
        {"positional_kernel", c.context.positional_kernel}}},
      {"quantizer",
       {{"groups", c.quantizer.groups},
        {"entries", c.quantizer.entries},
        {"codeword_dim", c.quantizer.codeword_dim},
        {"temperature_start", c.quantizer.temperature_start},
        {"temperature_end", c.quantizer.temperature_end},
        {"temperature_decay", c.quantizer.temperature_decay},
        {"logit_init_scale", c.quantizer.logit_init_scale}}},
      {"mask", {{"span", c.mask.span}, {"start_prob", c.mask.start_prob}}},
  };
}

Wav2VecConfig wav2vec_config_from_json(const Json& j, const std::string& path) {
  Wav2VecConfig c;
  require_keys(j, path, {"encoder", "context", "quantizer", "mask"});
  if (auto it = j.find("encoder"); it != j.end()) {
    const std::string p = join_path(path, "encoder");
    require_keys(*it, p, {"layers", "layer_norm"});
    read_field(*it, p, "layer_norm", c.encoder.layer_norm);
    if (auto l = it->find("layers"); l != it->end()) {
      if (!l->is_array()) throw ConfigError(p + ".layers", "expected an array");
      c.encoder.layers.clear();
      for (std::size_t i = 0; i < l->size(); ++i) {
        const std::string lp = p + ".layers[" + std::to_string(i) + "]";
        ConvLayerSpec spec;
        require_keys((*l)[i], lp, {"stride", "kernel", "channels"});
        read_field((*l)[i], lp, "stride", spec.stride);
        read_field((*l)[i], lp, "kernel", spec.kernel);
        read_field((*l)[i], lp, "channels", spec.channels);
        c.encoder.layers.push_back(spec);
      }
    }
  }
  if (auto it = j.find("context"); it != j.end()) {
    const std::string p = join_path(path, "context");
    require_keys(*it, p, {"blocks", "dim", "ffn_dim", "heads", "positional", "positional_kernel"});
    read_field(*it, p, "blocks", c.context.blocks);
    read_field(*it, p, "dim", c.context.dim);
    read_field(*it, p, "ffn_dim", c.context.ffn_dim);
    read_field(*it, p, "heads", c.context.heads);
    read_field(*it, p, "positional_kernel", c.context.positional_kernel);
    std::string pos = positional_name(c.context.positional);
    read_field(*it, p, "positional", pos);
    if (pos == "sinusoidal") c.context.positional = PositionalScheme::kSinusoidal;
    else if (pos == "conv") c.context.positional = PositionalScheme::kConv;
    else if (pos == "none") c.context.positional = PositionalScheme::kNone;
    else throw ConfigError(p + ".positional", "expected \"conv\", \"sinusoidal\" or \"none\"");
  }
  if (auto it = j.find("quantizer"); it != j.end()) {
    const std::string p = join_path(path, "quantizer");
    require_keys(*it, p, {"groups", "entries", "codeword_dim", "temperature_start", "temperature_end", "temperature_decay",
                          "logit_init_scale"});
    read_field(*it, p, "groups", c.quantizer.groups);
    read_field(*it, p, "entries", c.quantizer.entries);
    read_field(*it, p, "codeword_dim", c.quantizer.codeword_dim);
    read_field(*it, p, "temperature_start", c.quantizer.temperature_start);
    read_field(*it, p, "temperature_end", c.quantizer.temperature_end);
    read_field(*it, p, "temperature_decay", c.quantizer.temperature_decay);
    read_field(*it, p, "logit_init_scale", c.quantizer.logit_init_scale);
  }
  if (auto it = j.find("mask"); it != j.end()) {
    const std::string p = join_path(path, "mask");
    require_keys(*it, p, {"span", "start_prob"});
    read_field(*it, p, "span", c.mask.span);
    read_field(*it, p, "start_prob", c.mask.start_prob);
  }
  c.validate();
  return c;
}

void save_model(const std::filesystem::path& path, const Wav2VecModel& model) {
  nn::save_checkpoint(path, model.params());
  write_json_file(sidecar_path(path), {{"kind", "wav2vec"}, {"wav2vec", to_json(model.config())}});
}

Wav2VecModel load_model(const std::filesystem::path& path) {
  const Json meta = read_json_file(sidecar_path(path));
  if (meta.value("kind", "") != "wav2vec") throw IoError(path.string() + ": not a pre-trained model checkpoint");
  return Wav2VecModel(wav2vec_config_from_json(meta.at("wav2vec")), nn::load_checkpoint(path));
}

}  // namespace semiasr::wav2vec
