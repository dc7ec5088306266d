#include "fairsite/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fairsite/validate.hpp"

namespace fairsite {

using nlohmann::json;

namespace {

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const json& a) {
  Vec v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

json site_to_json(const SiteRecord& s) {
  json j;
  j["site_id"] = s.site_id;
  j["static"] = s.static_features ? vec_to_json(*s.static_features) : json(nullptr);
  j["diagnoses"] = s.diagnoses ? json(*s.diagnoses) : json(nullptr);
  j["prescriptions"] = s.prescriptions ? json(*s.prescriptions) : json(nullptr);
  if (s.history) {
    json h = json::array();
    for (const HistoryEntry& e : *s.history)
      h.push_back(json::array({vec_to_json(e.trial), e.enrollment}));
    j["enrollment_history"] = h;
  } else {
    j["enrollment_history"] = nullptr;
  }
  j["mask"] = json::array({s.mask[0], s.mask[1], s.mask[2], s.mask[3]});
  j["enrollment"] = s.enrollment_label;
  j["race"] = json::array();
  for (int g = 0; g < kNumRaceGroups; ++g) j["race"].push_back(s.race_label[g]);
  return j;
}

SiteRecord site_from_json(const json& j) {
  SiteRecord s;
  s.site_id = j.at("site_id").get<std::string>();
  if (!j.at("static").is_null()) s.static_features = vec_from_json(j.at("static"));
  if (!j.at("diagnoses").is_null())
    s.diagnoses = j.at("diagnoses").get<std::vector<int>>();
  if (!j.at("prescriptions").is_null())
    s.prescriptions = j.at("prescriptions").get<std::vector<int>>();
  if (!j.at("enrollment_history").is_null()) {
    std::vector<HistoryEntry> h;
    for (const json& e : j.at("enrollment_history")) {
      HistoryEntry entry;
      entry.trial = vec_from_json(e.at(0));
      entry.enrollment = e.at(1).get<double>();
      h.push_back(std::move(entry));
    }
    s.history = std::move(h);
  }
  const json& m = j.at("mask");
  if (m.size() != kNumModalities) throw DatasetError("mask must have 4 entries");
  for (int k = 0; k < kNumModalities; ++k) s.mask[k] = m[k].get<bool>();
  s.enrollment_label = j.at("enrollment").get<double>();
  const json& r = j.at("race");
  if (r.size() != kNumRaceGroups)
    throw DatasetError("race must have " + std::to_string(kNumRaceGroups) +
                       " entries, got " + std::to_string(r.size()));
  for (int g = 0; g < kNumRaceGroups; ++g) s.race_label[g] = r[g].get<double>();
  return s;
}

json instance_to_json(const RankingInstance& inst) {
  json j;
  j["trial_id"] = inst.trial.trial_id;
  j["features"] = vec_to_json(inst.trial.features);
  j["reduced_features"] = vec_to_json(inst.trial.reduced_features);
  json sites = json::array();
  for (const SiteRecord& s : inst.sites) sites.push_back(site_to_json(s));
  j["sites"] = sites;
  return j;
}

RankingInstance instance_from_json(const json& j, const DatasetManifest& manifest) {
  RankingInstance inst;
  inst.trial.trial_id = j.at("trial_id").get<std::string>();
  inst.trial.features = vec_from_json(j.at("features"));
  inst.trial.reduced_features = vec_from_json(j.at("reduced_features"));
  for (const json& s : j.at("sites")) inst.sites.push_back(site_from_json(s));
  inst.K = manifest.K;
  return inst;
}

json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["n_t"] = m.n_t;
  j["n_t_prime"] = m.n_t_prime;
  j["n_s"] = m.n_s;
  j["n_c"] = m.n_c;
  j["n_d"] = m.n_d;
  j["n_p"] = m.n_p;
  j["n_h"] = m.n_h;
  j["M"] = m.M;
  j["K"] = m.K;
  j["schema_version"] = m.schema_version;
  j["record_count"] = m.record_count;
  j["seed"] = m.seed;
  return j;
}

DatasetManifest manifest_from_json(const json& j) {
  DatasetManifest m;
  m.n_t = j.at("n_t").get<int>();
  m.n_t_prime = j.at("n_t_prime").get<int>();
  m.n_s = j.at("n_s").get<int>();
  m.n_c = j.at("n_c").get<int>();
  m.n_d = j.at("n_d").get<int>();
  m.n_p = j.at("n_p").get<int>();
  m.n_h = j.at("n_h").get<int>();
  m.M = j.at("M").get<int>();
  m.K = j.at("K").get<int>();
  m.schema_version = j.at("schema_version").get<std::string>();
  m.record_count = j.at("record_count").get<long long>();
  m.seed = j.at("seed").get<long long>();
  return m;
}

}  // namespace

void save_dataset(const DatasetManifest& manifest,
                  const std::vector<RankingInstance>& instances,
                  const std::string& path) {
  DatasetManifest m = manifest;
  m.record_count = static_cast<long long>(instances.size());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot open " + path + " for writing");
  out << manifest_to_json(m).dump() << "\n";
  for (const RankingInstance& inst : instances)
    out << instance_to_json(inst).dump() << "\n";
  if (!out) throw DatasetError("write failure on " + path);
}

DatasetManifest load_dataset(
    const std::string& path,
    const std::function<void(RankingInstance&&)>& sink) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DatasetError(path + ": missing manifest line");
  DatasetManifest manifest;
  try {
    manifest = manifest_from_json(json::parse(line));
  } catch (const json::exception& e) {
    throw DatasetError(path + ": line 1 (manifest): " + e.what());
  }
  validate_manifest(manifest);
  long long record = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++record;
    try {
      RankingInstance inst = instance_from_json(json::parse(line), manifest);
      sink(validate_instance(std::move(inst), manifest));
    } catch (const json::exception& e) {
      throw DatasetError(path + ": record " + std::to_string(record) + ": " +
                         e.what());
    } catch (const ValidationError& e) {
      throw DatasetError(path + ": record " + std::to_string(record) + ": " +
                         e.what());
    } catch (const DatasetError& e) {
      throw DatasetError(path + ": record " + std::to_string(record) + ": " +
                         e.what());
    }
  }
  if (manifest.record_count != record)
    throw DatasetError(path + ": manifest declares " +
                       std::to_string(manifest.record_count) + " records, found " +
                       std::to_string(record));
  return manifest;
}

std::pair<DatasetManifest, std::vector<RankingInstance>> load_dataset(
    const std::string& path) {
  std::vector<RankingInstance> instances;
  DatasetManifest manifest =
      load_dataset(path, [&](RankingInstance&& inst) { instances.push_back(std::move(inst)); });
  return {manifest, std::move(instances)};
}

std::string manifest_hash(const DatasetManifest& manifest) {
  const std::string text = manifest_to_json(manifest).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

}  // namespace fairsite
