#pragma once

#include <array>

#include "fairsite/params.hpp"
#include "fairsite/types.hpp"

namespace fairsite {

// f(x) = max(0, biLSTM(x) W + b) V + c over a sequence, where the biLSTM
// summary is the concatenation of the final hidden states of both
// directions, projected by W (2h x h).
struct LstmParams {
  int wx_f, wh_f, b_f;  // forward direction, gates stacked [i f g o]
  int wx_b, wh_b, b_b;  // backward direction
};

struct SeqEncoderParams {
  LstmParams lstm;
  int W, b, V, c;
};

// g(x) = max(0, x W + b) V + c.
struct MlpEncoderParams {
  int W, b, V, c;
};

struct EncoderParams {
  SeqEncoderParams diagnosis;
  SeqEncoderParams prescription;
  SeqEncoderParams history;
  MlpEncoderParams site_static;
  MlpEncoderParams trial;
  int n_emb = 128;

  static EncoderParams create(ParamStore& store, const DatasetManifest& dims,
                              int n_emb, Rng& rng);
};

// Embeddings for one site; absent slots hold the zero placeholder and are
// only reachable through the mask.
struct ModalityEmbeddings {
  std::array<int, kNumModalities> node{};  // tape nodes, 1 x n_emb each
  std::array<bool, kNumModalities> present{};
  int trial_node = -1;  // t_e, 1 x n_emb
};

// Dense sequence input, one row per step (rows of one-hot for code
// sequences, reduced-trial-vector + enrollment rows for histories).
int encode_sequence(ad::Tape& tape, const TapeBinding& bind,
                    const SeqEncoderParams& params, const Mat& input);

int encode_static(ad::Tape& tape, const TapeBinding& bind,
                  const MlpEncoderParams& params, const Vec& x);

// Builds input matrices from the raw record. `trial_node` is computed once
// per instance by the caller and shared.
ModalityEmbeddings encode_site(ad::Tape& tape, const TapeBinding& bind,
                               const EncoderParams& params,
                               const SiteRecord& site,
                               const DatasetManifest& dims, int trial_node);

int encode_trial(ad::Tape& tape, const TapeBinding& bind,
                 const EncoderParams& params, const TrialRecord& trial);

Mat one_hot_rows(const std::vector<int>& codes, int vocab);
Mat history_rows(const std::vector<HistoryEntry>& history, int n_t_prime);

}  // namespace fairsite
