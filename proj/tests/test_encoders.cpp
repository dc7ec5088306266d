#include <doctest.h>

#include <cmath>

#include "fairsite/encoders.hpp"

using namespace fairsite;

namespace {

// Deterministic weight pattern shared with the independent oracle that
// produced the frozen output below.
Mat grid(int rows, int cols, double scale) {
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      m(r, c) = 0.4 * std::sin(0.7 * (r * cols + c) + scale);
  return m;
}

DatasetManifest tiny_dims() {
  DatasetManifest d;
  d.n_t = 5;
  d.n_t_prime = 3;
  d.n_s = 4;
  d.n_c = 6;
  d.n_d = 5;
  d.n_p = 4;
  d.n_h = 3;
  d.M = 4;
  d.K = 2;
  return d;
}

}  // namespace

TEST_CASE("biLSTM sequence encoder matches the frozen oracle") {
  // in_dim = 2, h = 2, 3 steps. Independently recomputed final output:
  // [0.5814098272299686, 0.5586737952857812].
  ParamStore store;
  SeqEncoderParams p;
  p.lstm.wx_f = store.add("wx_f", grid(2, 8, 0.1));
  p.lstm.wh_f = store.add("wh_f", grid(2, 8, 0.2));
  p.lstm.b_f = store.add("b_f", grid(1, 8, 0.3));
  p.lstm.wx_b = store.add("wx_b", grid(2, 8, 0.4));
  p.lstm.wh_b = store.add("wh_b", grid(2, 8, 0.5));
  p.lstm.b_b = store.add("b_b", grid(1, 8, 0.6));
  p.W = store.add("W", grid(4, 2, 0.7));
  p.b = store.add("b", grid(1, 2, 0.8));
  p.V = store.add("V", grid(2, 2, 0.9));
  p.c = store.add("c", grid(1, 2, 1.0));

  Mat input(3, 2);
  input << 0.5, -0.25, 1.0, 0.75, -0.5, 0.25;

  ad::Tape tape;
  const TapeBinding bind = TapeBinding::bind(tape, store);
  const int out = encode_sequence(tape, bind, p, input);
  const Mat v = tape.value(out);
  REQUIRE(v.rows() == 1);
  REQUIRE(v.cols() == 2);
  CHECK(v(0, 0) == doctest::Approx(0.5814098272299686).epsilon(1e-12));
  CHECK(v(0, 1) == doctest::Approx(0.5586737952857812).epsilon(1e-12));
}

TEST_CASE("sequence encoder rejects degenerate input") {
  ParamStore store;
  Rng rng(1);
  const DatasetManifest d = tiny_dims();
  const EncoderParams enc = EncoderParams::create(store, d, 4, rng);
  ad::Tape tape;
  const TapeBinding bind = TapeBinding::bind(tape, store);
  CHECK_THROWS(encode_sequence(tape, bind, enc.diagnosis, Mat(0, d.n_d)));
  Mat bad = Mat::Zero(2, d.n_d);
  bad(1, 0) = std::nan("");
  CHECK_THROWS(encode_sequence(tape, bind, enc.diagnosis, bad));
}

TEST_CASE("one_hot_rows and history_rows") {
  const Mat oh = one_hot_rows({2, 0, 1}, 4);
  REQUIRE(oh.rows() == 3);
  CHECK(oh(0, 2) == 1.0);
  CHECK(oh(1, 0) == 1.0);
  CHECK(oh.sum() == 3.0);
  CHECK_THROWS(one_hot_rows({4}, 4));
  CHECK_THROWS(one_hot_rows({-1}, 4));

  std::vector<HistoryEntry> h(2);
  h[0].trial = Vec::Ones(3) * 2.0;
  h[0].enrollment = 7;
  h[1].trial = Vec::Zero(3);
  h[1].enrollment = 1;
  const Mat hr = history_rows(h, 3);
  REQUIRE(hr.rows() == 2);
  REQUIRE(hr.cols() == 4);
  CHECK(hr(0, 0) == 2.0);
  CHECK(hr(0, 3) == 7.0);
  CHECK(hr(1, 3) == 1.0);
}

TEST_CASE("encode_site routes absent modalities to the zero placeholder") {
  const DatasetManifest d = tiny_dims();
  ParamStore store;
  Rng rng(12);
  const EncoderParams enc = EncoderParams::create(store, d, 4, rng);

  SiteRecord site;
  site.site_id = "s";
  site.static_features = Vec::Ones(d.n_s);
  site.diagnoses = std::vector<int>(static_cast<std::size_t>(d.n_c), 1);
  site.mask = {true, true, false, false};  // prescriptions/history hidden

  TrialRecord trial;
  trial.features = Vec::Ones(d.n_t);
  trial.reduced_features = Vec::Ones(d.n_t_prime);

  ad::Tape tape;
  const TapeBinding bind = TapeBinding::bind(tape, store);
  const int tnode = encode_trial(tape, bind, enc, trial);
  const ModalityEmbeddings emb = encode_site(tape, bind, enc, site, d, tnode);

  CHECK(emb.present == site.mask);
  CHECK(emb.trial_node == tnode);
  CHECK(tape.value(emb.node[kPrescription]).cwiseAbs().maxCoeff() == 0.0);
  CHECK(tape.value(emb.node[kHistory]).cwiseAbs().maxCoeff() == 0.0);
  CHECK(tape.value(emb.node[kStatic]).cwiseAbs().maxCoeff() > 0.0);
  for (int k = 0; k < kNumModalities; ++k) {
    CHECK(tape.value(emb.node[k]).rows() == 1);
    CHECK(tape.value(emb.node[k]).cols() == 4);
  }
}

TEST_CASE("encoder parameters differentiate through the tape") {
  // Finite-difference spot check of d sum(encode_sequence) / d W.
  const DatasetManifest d = tiny_dims();
  ParamStore store;
  Rng rng(77);
  const EncoderParams enc = EncoderParams::create(store, d, 3, rng);
  const Mat input = one_hot_rows({0, 3, 2, 1}, d.n_d);

  auto value = [&](const ParamStore& s) {
    ad::Tape tape;
    const TapeBinding bind = TapeBinding::bind(tape, s);
    return tape.value(tape.sum(encode_sequence(tape, bind, enc.diagnosis, input)))(0, 0);
  };

  ad::Tape tape;
  const TapeBinding bind = TapeBinding::bind(tape, store);
  const int out = tape.sum(encode_sequence(tape, bind, enc.diagnosis, input));
  tape.backward(out, Mat::Ones(1, 1));

  for (int handle : {enc.diagnosis.lstm.wx_f, enc.diagnosis.lstm.wh_b,
                     enc.diagnosis.W, enc.diagnosis.V}) {
    const Mat grad = tape.grad(bind(handle));
    const double h = 1e-6;
    for (int probe = 0; probe < 3; ++probe) {
      const int i = probe % static_cast<int>(store[handle].rows());
      const int j = (probe * 2 + 1) % static_cast<int>(store[handle].cols());
      ParamStore s2 = store;
      s2[handle](i, j) += h;
      ParamStore s3 = store;
      s3[handle](i, j) -= h;
      const double fd = (value(s2) - value(s3)) / (2 * h);
      CHECK(std::abs(grad(i, j) - fd) < 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}
