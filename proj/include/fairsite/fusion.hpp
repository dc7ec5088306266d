#pragma once

#include "fairsite/encoders.hpp"
#include "fairsite/params.hpp"

namespace fairsite {

enum class FusionKind { kMcat, kFc };

// Masked cross-attention: the trial embedding queries the four modality
// embeddings (keys and values); absent modalities get exactly zero
// attention weight. The FC variant is the ablation that concatenates
// everything through a single rectified layer.
struct FusionParams {
  // MCAT: per-head projections realized as n_emb -> n_emb/n_head.
  std::vector<int> wq, wk, wv;  // one handle per head
  int wo = -1;                  // n_emb -> n_emb
  int n_head = 4;
  // FC ablation: (5 * n_emb) -> n_emb.
  int fc_w = -1, fc_b = -1;
  int n_emb = 128;

  static FusionParams create(ParamStore& store, int n_emb, int n_head, Rng& rng);
};

// Attention weights of the last fuse_mcat call, per head (n_head x 4).
// Exposed for the exact-zero mask invariant checks.
struct McatAttention {
  Mat weights;
};

// Returns the tape node of h = concat(h', t_e), 1 x 2*n_emb.
int fuse_mcat(ad::Tape& tape, const TapeBinding& bind, const FusionParams& params,
              const ModalityEmbeddings& emb, McatAttention* attention = nullptr);

int fuse_fc(ad::Tape& tape, const TapeBinding& bind, const FusionParams& params,
            const ModalityEmbeddings& emb);

int fuse(ad::Tape& tape, const TapeBinding& bind, const FusionParams& params,
         const ModalityEmbeddings& emb, FusionKind kind);

}  // namespace fairsite
