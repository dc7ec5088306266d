#pragma once

#include "fairsite/params.hpp"

namespace fairsite {

// Transformer encoder stack over the M trial-site representations plus a
// rectified feed-forward head producing one scalar per site. No positional
// encoding: scoring is permutation equivariant by construction.
struct ScorerParams {
  struct Layer {
    std::vector<int> wq, wk, wv;  // per head, d -> d/n_head
    int wo;                       // d -> d
    int ln1_g, ln1_b, ln2_g, ln2_b;
    int ff_w, ff_b, ff_v, ff_c;  // d -> d -> d
  };
  std::vector<Layer> layers;  // n_l of them
  int head_w = -1, head_b = -1, head_v = -1, head_c = -1;  // d -> 64 -> 1
  int n_head = 4;
  int d = 256;  // 2 * n_emb
  int head_hidden = 64;

  static ScorerParams create(ParamStore& store, int d, int n_layers, int n_head,
                             int head_hidden, Rng& rng);
};

// H is the tape node holding the M x d representation matrix; returns the
// node of the M x 1 score column.
int score_sites(ad::Tape& tape, const TapeBinding& bind,
                const ScorerParams& params, int H);

// Convenience forward without an external tape (builds a private one).
Vec score_sites_values(const ParamStore& store, const ScorerParams& params,
                       const Mat& H);

}  // namespace fairsite
