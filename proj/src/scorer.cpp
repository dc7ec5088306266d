#include "fairsite/scorer.hpp"

#include <cmath>
#include <stdexcept>

namespace fairsite {

ScorerParams ScorerParams::create(ParamStore& store, int d, int n_layers,
                                  int n_head, int head_hidden, Rng& rng) {
  if (d % n_head != 0)
    throw std::invalid_argument("ScorerParams: width must be divisible by n_head");
  ScorerParams p;
  p.d = d;
  p.n_head = n_head;
  p.head_hidden = head_hidden;
  const int dh = d / n_head;
  for (int i = 0; i < n_layers; ++i) {
    const std::string pre = "scorer.layer" + std::to_string(i);
    Layer layer;
    for (int j = 0; j < n_head; ++j) {
      const std::string sj = std::to_string(j);
      layer.wq.push_back(store.add(pre + ".wq" + sj, init_matrix(d, dh, d, rng)));
      layer.wk.push_back(store.add(pre + ".wk" + sj, init_matrix(d, dh, d, rng)));
      layer.wv.push_back(store.add(pre + ".wv" + sj, init_matrix(d, dh, d, rng)));
    }
    layer.wo = store.add(pre + ".wo", init_matrix(d, d, d, rng));
    layer.ln1_g = store.add(pre + ".ln1_g", Mat::Ones(1, d));
    layer.ln1_b = store.add(pre + ".ln1_b", Mat::Zero(1, d));
    layer.ln2_g = store.add(pre + ".ln2_g", Mat::Ones(1, d));
    layer.ln2_b = store.add(pre + ".ln2_b", Mat::Zero(1, d));
    layer.ff_w = store.add(pre + ".ff_w", init_matrix(d, d, d, rng));
    layer.ff_b = store.add(pre + ".ff_b", Mat::Zero(1, d));
    layer.ff_v = store.add(pre + ".ff_v", init_matrix(d, d, d, rng));
    layer.ff_c = store.add(pre + ".ff_c", Mat::Zero(1, d));
    p.layers.push_back(std::move(layer));
  }
  p.head_w = store.add("scorer.head_w", init_matrix(d, head_hidden, d, rng));
  p.head_b = store.add("scorer.head_b", Mat::Zero(1, head_hidden));
  p.head_v = store.add("scorer.head_v", init_matrix(head_hidden, 1, head_hidden, rng));
  p.head_c = store.add("scorer.head_c", Mat::Zero(1, 1));
  return p;
}

namespace {

int self_attention(ad::Tape& tape, const TapeBinding& bind,
                   const ScorerParams::Layer& layer, int H, int n_head, int d) {
  const int dh = d / n_head;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::vector<bool> all_present(
      static_cast<std::size_t>(tape.value(H).rows()), true);
  std::vector<int> heads;
  for (int j = 0; j < n_head; ++j) {
    int q = tape.matmul(H, bind(layer.wq[j]));
    int k = tape.matmul(H, bind(layer.wk[j]));
    int v = tape.matmul(H, bind(layer.wv[j]));
    int logits = tape.scale(tape.matmul(q, tape.transpose(k)), scale);  // M x M
    int weights = tape.masked_softmax_rows(logits, all_present);
    heads.push_back(tape.matmul(weights, v));
  }
  return tape.matmul(tape.concat_cols(heads), bind(layer.wo));
}

}  // namespace

int score_sites(ad::Tape& tape, const TapeBinding& bind,
                const ScorerParams& params, int H) {
  if (!tape.value(H).allFinite())
    throw std::invalid_argument("score_sites: non-finite input");
  int cur = H;
  for (const ScorerParams::Layer& layer : params.layers) {
    int att = self_attention(tape, bind, layer, cur, params.n_head, params.d);
    int h1 = tape.layer_norm_rows(tape.add(cur, att), bind(layer.ln1_g),
                                  bind(layer.ln1_b));
    int ff = tape.add_rowvec(
        tape.matmul(tape.relu(tape.add_rowvec(tape.matmul(h1, bind(layer.ff_w)),
                                              bind(layer.ff_b))),
                    bind(layer.ff_v)),
        bind(layer.ff_c));
    cur = tape.layer_norm_rows(tape.add(h1, ff), bind(layer.ln2_g),
                               bind(layer.ln2_b));
  }
  int hidden = tape.relu(
      tape.add_rowvec(tape.matmul(cur, bind(params.head_w)), bind(params.head_b)));
  return tape.add_rowvec(tape.matmul(hidden, bind(params.head_v)),
                         bind(params.head_c));  // M x 1
}

Vec score_sites_values(const ParamStore& store, const ScorerParams& params,
                       const Mat& H) {
  ad::Tape tape;
  TapeBinding bind = TapeBinding::bind(tape, store);
  int q = score_sites(tape, bind, params, tape.leaf(H));
  return tape.value(q).col(0);
}

}  // namespace fairsite
