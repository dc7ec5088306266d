#include "fairsite/encoders.hpp"

#include <stdexcept>

namespace fairsite {

namespace {

SeqEncoderParams make_seq(ParamStore& store, const std::string& prefix,
                          int in_dim, int h, Rng& rng) {
  SeqEncoderParams p;
  p.lstm.wx_f = store.add(prefix + ".lstm.wx_f", init_matrix(in_dim, 4 * h, in_dim, rng));
  p.lstm.wh_f = store.add(prefix + ".lstm.wh_f", init_matrix(h, 4 * h, h, rng));
  p.lstm.b_f = store.add(prefix + ".lstm.b_f", Mat::Zero(1, 4 * h));
  p.lstm.wx_b = store.add(prefix + ".lstm.wx_b", init_matrix(in_dim, 4 * h, in_dim, rng));
  p.lstm.wh_b = store.add(prefix + ".lstm.wh_b", init_matrix(h, 4 * h, h, rng));
  p.lstm.b_b = store.add(prefix + ".lstm.b_b", Mat::Zero(1, 4 * h));
  p.W = store.add(prefix + ".W", init_matrix(2 * h, h, 2 * h, rng));
  p.b = store.add(prefix + ".b", Mat::Zero(1, h));
  p.V = store.add(prefix + ".V", init_matrix(h, h, h, rng));
  p.c = store.add(prefix + ".c", Mat::Zero(1, h));
  return p;
}

MlpEncoderParams make_mlp(ParamStore& store, const std::string& prefix,
                          int in_dim, int h, Rng& rng) {
  MlpEncoderParams p;
  p.W = store.add(prefix + ".W", init_matrix(in_dim, h, in_dim, rng));
  p.b = store.add(prefix + ".b", Mat::Zero(1, h));
  p.V = store.add(prefix + ".V", init_matrix(h, h, h, rng));
  p.c = store.add(prefix + ".c", Mat::Zero(1, h));
  return p;
}

// One LSTM direction; returns the final hidden state (1 x h).
int lstm_final_state(ad::Tape& tape, const TapeBinding& bind, int wx, int wh,
                     int b, const Mat& input, bool reverse) {
  (void)bind;
  const int hdim = static_cast<int>(tape.value(wh).rows());
  const Eigen::Index steps = input.rows();
  int h_prev = tape.leaf(Mat::Zero(1, hdim));
  int c_prev = tape.leaf(Mat::Zero(1, hdim));
  for (Eigen::Index s = 0; s < steps; ++s) {
    const Eigen::Index row = reverse ? steps - 1 - s : s;
    int x = tape.leaf(input.row(row));
    int z = tape.add_rowvec(tape.add(tape.matmul(x, wx), tape.matmul(h_prev, wh)), b);
    int gi = tape.sigmoid(tape.slice_cols(z, 0, hdim));
    int gf = tape.sigmoid(tape.slice_cols(z, hdim, hdim));
    int gg = tape.tanh(tape.slice_cols(z, 2 * hdim, hdim));
    int go = tape.sigmoid(tape.slice_cols(z, 3 * hdim, hdim));
    c_prev = tape.add(tape.cmul(gf, c_prev), tape.cmul(gi, gg));
    h_prev = tape.cmul(go, tape.tanh(c_prev));
  }
  return h_prev;
}

}  // namespace

EncoderParams EncoderParams::create(ParamStore& store,
                                    const DatasetManifest& dims, int n_emb,
                                    Rng& rng) {
  EncoderParams p;
  p.n_emb = n_emb;
  p.diagnosis = make_seq(store, "enc.diagnosis", dims.n_d, n_emb, rng);
  p.prescription = make_seq(store, "enc.prescription", dims.n_p, n_emb, rng);
  p.history = make_seq(store, "enc.history", dims.n_t_prime + 1, n_emb, rng);
  p.site_static = make_mlp(store, "enc.static", dims.n_s, n_emb, rng);
  p.trial = make_mlp(store, "enc.trial", dims.n_t, n_emb, rng);
  return p;
}

int encode_sequence(ad::Tape& tape, const TapeBinding& bind,
                    const SeqEncoderParams& params, const Mat& input) {
  if (input.rows() == 0)
    throw std::invalid_argument("encode_sequence: empty sequence for a present modality");
  if (!input.allFinite())
    throw std::invalid_argument("encode_sequence: non-finite input");
  int fwd = lstm_final_state(tape, bind, bind(params.lstm.wx_f),
                             bind(params.lstm.wh_f), bind(params.lstm.b_f),
                             input, /*reverse=*/false);
  int bwd = lstm_final_state(tape, bind, bind(params.lstm.wx_b),
                             bind(params.lstm.wh_b), bind(params.lstm.b_b),
                             input, /*reverse=*/true);
  int summary = tape.concat_cols({fwd, bwd});
  int hidden = tape.relu(
      tape.add_rowvec(tape.matmul(summary, bind(params.W)), bind(params.b)));
  return tape.add_rowvec(tape.matmul(hidden, bind(params.V)), bind(params.c));
}

int encode_static(ad::Tape& tape, const TapeBinding& bind,
                  const MlpEncoderParams& params, const Vec& x) {
  if (x.size() != tape.value(bind(params.W)).rows())
    throw std::invalid_argument("encode_static: input dimension mismatch");
  int xi = tape.leaf(x.transpose());
  int hidden =
      tape.relu(tape.add_rowvec(tape.matmul(xi, bind(params.W)), bind(params.b)));
  return tape.add_rowvec(tape.matmul(hidden, bind(params.V)), bind(params.c));
}

int encode_trial(ad::Tape& tape, const TapeBinding& bind,
                 const EncoderParams& params, const TrialRecord& trial) {
  return encode_static(tape, bind, params.trial, trial.features);
}

Mat one_hot_rows(const std::vector<int>& codes, int vocab) {
  Mat m = Mat::Zero(static_cast<Eigen::Index>(codes.size()), vocab);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] < 0 || codes[i] >= vocab)
      throw std::out_of_range("one_hot_rows: code index out of range");
    m(static_cast<Eigen::Index>(i), codes[i]) = 1.0;
  }
  return m;
}

Mat history_rows(const std::vector<HistoryEntry>& history, int n_t_prime) {
  Mat m(static_cast<Eigen::Index>(history.size()), n_t_prime + 1);
  for (std::size_t i = 0; i < history.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)).head(n_t_prime) = history[i].trial.transpose();
    m(static_cast<Eigen::Index>(i), n_t_prime) = history[i].enrollment;
  }
  return m;
}

ModalityEmbeddings encode_site(ad::Tape& tape, const TapeBinding& bind,
                               const EncoderParams& params,
                               const SiteRecord& site,
                               const DatasetManifest& dims, int trial_node) {
  ModalityEmbeddings out;
  out.trial_node = trial_node;
  out.present = site.mask;
  const int zero = tape.leaf(Mat::Zero(1, params.n_emb));

  out.node[kStatic] = site.mask[kStatic]
                          ? encode_static(tape, bind, params.site_static,
                                          *site.static_features)
                          : zero;
  out.node[kDiagnosis] =
      site.mask[kDiagnosis]
          ? encode_sequence(tape, bind, params.diagnosis,
                            one_hot_rows(*site.diagnoses, dims.n_d))
          : zero;
  out.node[kPrescription] =
      site.mask[kPrescription]
          ? encode_sequence(tape, bind, params.prescription,
                            one_hot_rows(*site.prescriptions, dims.n_p))
          : zero;
  out.node[kHistory] =
      site.mask[kHistory]
          ? encode_sequence(tape, bind, params.history,
                            history_rows(*site.history, dims.n_t_prime))
          : zero;
  return out;
}

}  // namespace fairsite
