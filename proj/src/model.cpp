#include "fairsite/model.hpp"

namespace fairsite {

Model Model::create(const DatasetManifest& dims, const ModelConfig& config,
                    long long init_seed) {
  Model m;
  m.dims = dims;
  m.config = config;
  Rng rng(static_cast<std::uint64_t>(init_seed));
  m.encoders = EncoderParams::create(m.store, dims, config.n_emb, rng);
  m.fusion = FusionParams::create(m.store, config.n_emb, config.n_head, rng);
  m.scorer = ScorerParams::create(m.store, 2 * config.n_emb, config.n_layers,
                                  config.n_head, config.head_hidden, rng);
  return m;
}

Model::Forward Model::forward(ad::Tape& tape,
                              const RankingInstance& instance) const {
  Forward f;
  f.binding = TapeBinding::bind(tape, store);
  f.trial_node = encode_trial(tape, f.binding, encoders, instance.trial);
  std::vector<int> reprs;
  reprs.reserve(instance.sites.size());
  for (const SiteRecord& site : instance.sites) {
    ModalityEmbeddings emb =
        encode_site(tape, f.binding, encoders, site, dims, f.trial_node);
    reprs.push_back(fuse(tape, f.binding, fusion, emb, config.fusion));
  }
  f.repr_node = tape.concat_rows(reprs);
  f.q_node = score_sites(tape, f.binding, scorer, f.repr_node);
  return f;
}

Vec Model::score(const RankingInstance& instance) const {
  ad::Tape tape;
  Forward f = forward(tape, instance);
  return tape.value(f.q_node).col(0);
}

}  // namespace fairsite
