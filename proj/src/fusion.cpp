#include "fairsite/fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace fairsite {

FusionParams FusionParams::create(ParamStore& store, int n_emb, int n_head,
                                  Rng& rng) {
  if (n_emb % n_head != 0)
    throw std::invalid_argument("FusionParams: n_emb must be divisible by n_head");
  FusionParams p;
  p.n_emb = n_emb;
  p.n_head = n_head;
  const int dh = n_emb / n_head;
  for (int j = 0; j < n_head; ++j) {
    const std::string suffix = std::to_string(j);
    p.wq.push_back(store.add("fusion.mcat.wq" + suffix, init_matrix(n_emb, dh, n_emb, rng)));
    p.wk.push_back(store.add("fusion.mcat.wk" + suffix, init_matrix(n_emb, dh, n_emb, rng)));
    p.wv.push_back(store.add("fusion.mcat.wv" + suffix, init_matrix(n_emb, dh, n_emb, rng)));
  }
  p.wo = store.add("fusion.mcat.wo", init_matrix(n_emb, n_emb, n_emb, rng));
  p.fc_w = store.add("fusion.fc.w", init_matrix(5 * n_emb, n_emb, 5 * n_emb, rng));
  p.fc_b = store.add("fusion.fc.b", Mat::Zero(1, n_emb));
  return p;
}

namespace {

void require_some_modality(const ModalityEmbeddings& emb) {
  bool any = false;
  for (bool b : emb.present) any = any || b;
  if (!any) throw std::invalid_argument("fuse: all-false mask");
}

// Stacks the four modality embeddings into a 4 x n_emb node, substituting
// a zero row for absent slots so hidden content cannot leak through.
int stacked_modalities(ad::Tape& tape, const ModalityEmbeddings& emb, int n_emb) {
  std::vector<int> rows;
  const int zero = tape.leaf(Mat::Zero(1, n_emb));
  for (int k = 0; k < kNumModalities; ++k)
    rows.push_back(emb.present[k] ? emb.node[k] : zero);
  return tape.concat_rows(rows);
}

}  // namespace

int fuse_mcat(ad::Tape& tape, const TapeBinding& bind, const FusionParams& params,
              const ModalityEmbeddings& emb, McatAttention* attention) {
  require_some_modality(emb);
  const int dh = params.n_emb / params.n_head;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const int kv = stacked_modalities(tape, emb, params.n_emb);
  std::vector<bool> present(emb.present.begin(), emb.present.end());

  if (attention) attention->weights = Mat::Zero(params.n_head, kNumModalities);
  std::vector<int> heads;
  for (int j = 0; j < params.n_head; ++j) {
    int q = tape.matmul(emb.trial_node, bind(params.wq[j]));  // 1 x dh
    int k = tape.matmul(kv, bind(params.wk[j]));              // 4 x dh
    int logits = tape.scale(tape.matmul(q, tape.transpose(k)), scale);  // 1 x 4
    int weights = tape.masked_softmax_rows(logits, present);
    if (attention) attention->weights.row(j) = tape.value(weights).row(0);
    int v = tape.matmul(kv, bind(params.wv[j]));  // 4 x dh
    heads.push_back(tape.matmul(weights, v));     // 1 x dh
  }
  int h_prime = tape.matmul(tape.concat_cols(heads), bind(params.wo));
  return tape.concat_cols({h_prime, emb.trial_node});
}

int fuse_fc(ad::Tape& tape, const TapeBinding& bind, const FusionParams& params,
            const ModalityEmbeddings& emb) {
  require_some_modality(emb);
  const int zero = tape.leaf(Mat::Zero(1, params.n_emb));
  std::vector<int> parts;
  for (int k = 0; k < kNumModalities; ++k)
    parts.push_back(emb.present[k] ? emb.node[k] : zero);
  parts.push_back(emb.trial_node);
  int x = tape.concat_cols(parts);  // 1 x 5*n_emb
  int h_prime = tape.relu(
      tape.add_rowvec(tape.matmul(x, bind(params.fc_w)), bind(params.fc_b)));
  return tape.concat_cols({h_prime, emb.trial_node});
}

int fuse(ad::Tape& tape, const TapeBinding& bind, const FusionParams& params,
         const ModalityEmbeddings& emb, FusionKind kind) {
  return kind == FusionKind::kMcat ? fuse_mcat(tape, bind, params, emb)
                                   : fuse_fc(tape, bind, params, emb);
}

}  // namespace fairsite
