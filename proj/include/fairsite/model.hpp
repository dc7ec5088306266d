#pragma once

#include <string>

#include "fairsite/encoders.hpp"
#include "fairsite/fusion.hpp"
#include "fairsite/scorer.hpp"
#include "fairsite/types.hpp"

namespace fairsite {

struct ModelConfig {
  int n_emb = 128;
  int n_head = 4;
  int n_layers = 2;
  int head_hidden = 64;
  FusionKind fusion = FusionKind::kMcat;
};

// The full scoring pipeline: modality encoders, fusion, and the
// transformer scorer, with all parameters in one store.
struct Model {
  DatasetManifest dims;
  ModelConfig config;
  ParamStore store;
  EncoderParams encoders;
  FusionParams fusion;
  ScorerParams scorer;

  static Model create(const DatasetManifest& dims, const ModelConfig& config,
                      long long init_seed);

  struct Forward {
    TapeBinding binding;
    int trial_node = -1;
    int repr_node = -1;  // M x 2*n_emb
    int q_node = -1;     // M x 1
  };

  // Builds the whole forward pass for one instance on the given tape.
  Forward forward(ad::Tape& tape, const RankingInstance& instance) const;

  // Plain score evaluation (private tape).
  Vec score(const RankingInstance& instance) const;
};

}  // namespace fairsite
