#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lmfn {

/// Architecture hyperparameters, including the three ablation switches.
struct ModelConfig {
  int encoder_width = 64;
  int decoder_width = 48;
  int num_scales = 4;
  int num_rfdb = 4;
  bool mshf_enabled = true;
  bool rfdb_enabled = true;
  bool attention_enabled = true;
  /// Downsampling factor of the encoder output fed to the decoder (2 = half resolution).
  int fusion_output_scale = 2;
  /// Adds the blurred input to the prediction. Off by default.
  bool global_skip = false;
  std::size_t alfm_max_entries = std::size_t{1} << 24;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;

  /// log2(fusion_output_scale).
  int fusion_levels() const {
    int levels = 0;
    for (int s = fusion_output_scale; s > 1; s >>= 1) ++levels;
    return levels;
  }

  /// Input H and W must be multiples of this.
  int required_multiple() const {
    return mshf_enabled ? (1 << num_scales) : fusion_output_scale;
  }

  int disabled_ablations() const {
    return static_cast<int>(!mshf_enabled) + static_cast<int>(!rfdb_enabled) +
           static_cast<int>(!attention_enabled);
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("ModelConfig: " + m); };
    if (num_rfdb < 1) fail("num_rfdb must be >= 1");
    if (num_scales < 1) fail("num_scales must be >= 1");
    if (num_scales > 12) fail("num_scales must be <= 12");
    if (encoder_width < 4 || encoder_width % 2 != 0) fail("encoder_width must be even and >= 4");
    if (decoder_width < 4 || decoder_width % 2 != 0) fail("decoder_width must be even and >= 4");
    if (fusion_output_scale < 2 || (fusion_output_scale & (fusion_output_scale - 1)) != 0) {
      fail("fusion_output_scale must be a power of two >= 2");
    }
    if (fusion_levels() > num_scales) {
      fail("fusion_output_scale " + std::to_string(fusion_output_scale) +
           " is coarser than the deepest scale 2^" + std::to_string(num_scales));
    }
    if (alfm_max_entries == 0) fail("alfm_max_entries must be positive");
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"encoder_width", c.encoder_width},
                     {"decoder_width", c.decoder_width},
                     {"num_scales", c.num_scales},
                     {"num_rfdb", c.num_rfdb},
                     {"mshf_enabled", c.mshf_enabled},
                     {"rfdb_enabled", c.rfdb_enabled},
                     {"attention_enabled", c.attention_enabled},
                     {"fusion_output_scale", c.fusion_output_scale},
                     {"global_skip", c.global_skip},
                     {"alfm_max_entries", c.alfm_max_entries}};
}

/// Reads the keys present in `j` over the current values. Unknown keys are rejected.
inline void merge_json(ModelConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("ModelConfig: JSON config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "encoder_width") c.encoder_width = value.get<int>();
    else if (key == "decoder_width") c.decoder_width = value.get<int>();
    else if (key == "num_scales") c.num_scales = value.get<int>();
    else if (key == "num_rfdb") c.num_rfdb = value.get<int>();
    else if (key == "mshf_enabled") c.mshf_enabled = value.get<bool>();
    else if (key == "rfdb_enabled") c.rfdb_enabled = value.get<bool>();
    else if (key == "attention_enabled") c.attention_enabled = value.get<bool>();
    else if (key == "fusion_output_scale") c.fusion_output_scale = value.get<int>();
    else if (key == "global_skip") c.global_skip = value.get<bool>();
    else if (key == "alfm_max_entries") c.alfm_max_entries = value.get<std::size_t>();
    else throw std::invalid_argument("ModelConfig: unknown key '" + key + "'");
  }
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  merge_json(c, j);
}

}  // namespace lmfn
