#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "slfc/core/errors.hpp"

namespace slfc {

/// Ablation variants: plain mixture policy, + feedback structure,
/// + switching-consistency KL.
enum class ModelVariant { kMdn, kMdnFb, kMdnFbSw };

inline std::string variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::kMdn: return "mdn";
    case ModelVariant::kMdnFb: return "mdn_fb";
    case ModelVariant::kMdnFbSw: return "mdn_fb_sw";
  }
  return "mdn_fb_sw";
}

inline ModelVariant variant_from_name(const std::string& s) {
  if (s == "mdn") return ModelVariant::kMdn;
  if (s == "mdn_fb") return ModelVariant::kMdnFb;
  if (s == "mdn_fb_sw") return ModelVariant::kMdnFbSw;
  throw ConfigError("unknown variant '" + s + "' (expected mdn|mdn_fb|mdn_fb_sw)");
}

struct ModelConfig {
  std::size_t obs_dim = 0;
  std::size_t action_dim = 0;
  std::size_t latent_dim = 0;
  std::size_t num_skills = 0;
  std::vector<std::size_t> encoder_hidden{64, 64};
  std::vector<std::size_t> decoder_hidden{64, 64};
  std::vector<std::size_t> switcher_hidden{64};
  double var_floor = 1e-5;
  bool feedback_structure = true;
  bool switch_kl = true;

  void apply_variant(ModelVariant v) {
    feedback_structure = v != ModelVariant::kMdn;
    switch_kl = v == ModelVariant::kMdnFbSw;
  }

  ModelVariant variant() const {
    if (!feedback_structure) return ModelVariant::kMdn;
    return switch_kl ? ModelVariant::kMdnFbSw : ModelVariant::kMdnFb;
  }

  void validate() const {
    if (obs_dim < 1 || action_dim < 1 || latent_dim < 1 || num_skills < 1)
      throw ConfigError("ModelConfig: O, A, S, C must all be >= 1");
    if (!(var_floor > 0.0)) throw ConfigError("ModelConfig: var_floor must be > 0");
    for (auto h : {&encoder_hidden, &decoder_hidden, &switcher_hidden})
      for (std::size_t w : *h)
        if (w < 1) throw ConfigError("ModelConfig: hidden widths must be >= 1");
  }
};

}  // namespace slfc
