#include "gblend/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "gblend/errors.hpp"
#include "gblend/serialize.hpp"

namespace gblend {

using nlohmann::json;

void ModalitySpec::validate() const {
  if (feature_dim == 0) throw ConfigError(name + ".feature_dim", "must be positive");
  if (informative_dim > feature_dim) {
    throw ConfigError(name + ".informative_dim", "exceeds feature_dim");
  }
  if (informative_dim + bait_dim > feature_dim) {
    throw ConfigError(name + ".bait_dim", "informative_dim + bait_dim exceeds feature_dim");
  }
  if (!(label_noise >= 0.0 && label_noise < 1.0)) {
    throw ConfigError(name + ".label_noise", "must be in [0, 1)");
  }
  if (!(snr >= 0.0) || !std::isfinite(snr)) throw ConfigError(name + ".snr", "must be >= 0");
  if (!(bait_strength >= 0.0)) throw ConfigError(name + ".bait_strength", "must be >= 0");
}

void SyntheticSpec::validate() const {
  if (class_count < 2) throw ConfigError("class_count", "must be at least 2");
  if (rows == 0) throw ConfigError("rows", "must be positive");
  if (modalities.empty()) throw ConfigError("modalities", "need at least one modality");
  for (const auto& m : modalities) m.validate();
  if (multilabel) {
    if (prevalence.size() != class_count) {
      throw ConfigError("prevalence", "needs one probability per class");
    }
    for (double p : prevalence) {
      if (!(p > 0.0 && p <= 1.0)) throw ConfigError("prevalence", "entries must be in (0, 1]");
    }
  }
}

json to_json(const ModalitySpec& m) {
  return {{"name", m.name},
          {"feature_dim", m.feature_dim},
          {"informative_dim", m.informative_dim},
          {"snr", m.snr},
          {"label_noise", m.label_noise},
          {"bait_dim", m.bait_dim},
          {"bait_strength", m.bait_strength}};
}

json to_json(const SyntheticSpec& s) {
  json mods = json::array();
  for (const auto& m : s.modalities) mods.push_back(to_json(m));
  json j = {{"class_count", s.class_count},
            {"rows", s.rows},
            {"modalities", std::move(mods)},
            {"multilabel", s.multilabel},
            {"seed", s.seed}};
  if (s.multilabel) j["prevalence"] = s.prevalence;
  return j;
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(path + "." + key, "unknown key");
    }
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path + "." + key, e.what());
  }
}

}  // namespace

SyntheticSpec synthetic_spec_from_json(const json& j, const std::string& path) {
  reject_unknown(j, {"class_count", "rows", "modalities", "multilabel", "prevalence", "seed"},
                 path);
  SyntheticSpec s;
  read_field(j, "class_count", s.class_count, path);
  read_field(j, "rows", s.rows, path);
  read_field(j, "multilabel", s.multilabel, path);
  read_field(j, "prevalence", s.prevalence, path);
  read_field(j, "seed", s.seed, path);
  if (!j.contains("modalities") || !j["modalities"].is_array()) {
    throw ConfigError(path + ".modalities", "required array");
  }
  for (std::size_t i = 0; i < j["modalities"].size(); ++i) {
    const json& mj = j["modalities"][i];
    const std::string mp = path + ".modalities[" + std::to_string(i) + "]";
    reject_unknown(mj,
                   {"name", "feature_dim", "informative_dim", "snr", "label_noise", "bait_dim",
                    "bait_strength"},
                   mp);
    ModalitySpec m;
    m.name = "m" + std::to_string(i);
    read_field(mj, "name", m.name, mp);
    read_field(mj, "feature_dim", m.feature_dim, mp);
    read_field(mj, "informative_dim", m.informative_dim, mp);
    read_field(mj, "snr", m.snr, mp);
    read_field(mj, "label_noise", m.label_noise, mp);
    read_field(mj, "bait_dim", m.bait_dim, mp);
    read_field(mj, "bait_strength", m.bait_strength, mp);
    s.modalities.push_back(std::move(m));
  }
  s.validate();
  return s;
}

std::vector<std::size_t> Dataset::input_dims() const {
  std::vector<std::size_t> dims;
  for (const auto& m : modalities) dims.push_back(m.cols());
  return dims;
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s) out.push_back(i);
  }
  return out;
}

Batch Dataset::batch(std::span<const std::size_t> rows) const {
  Batch b;
  b.inputs.reserve(modalities.size());
  for (const auto& m : modalities) b.inputs.push_back(m.gather_rows(rows));
  b.labels = labels.subset(rows);
  return b;
}

std::size_t Dataset::primary_class(std::size_t row) const {
  if (!labels.is_multilabel()) return labels.index[row];
  for (std::size_t c = 0; c < class_count; ++c) {
    if (labels.multi_hot(row, c) != 0.0) return c;
  }
  return class_count;
}

std::vector<std::size_t> Dataset::class_volumes() const {
  std::vector<std::size_t> v(class_count, 0);
  for (std::size_t r = 0; r < rows(); ++r) {
    if (labels.is_multilabel()) {
      for (std::size_t c = 0; c < class_count; ++c) v[c] += labels.multi_hot(r, c) != 0.0;
    } else {
      ++v[labels.index[r]];
    }
  }
  return v;
}

void Dataset::validate() const {
  if (modalities.size() != modality_names.size()) {
    throw DimensionError("dataset: modality names do not match matrices");
  }
  for (const auto& m : modalities) {
    if (m.rows() != rows()) throw DimensionError("dataset: modality row counts differ");
    if (!m.all_finite()) throw NumericError("dataset: non-finite feature");
  }
  if (split.size() != rows()) throw DimensionError("dataset: split tags do not cover all rows");
  if (labels.is_multilabel()) {
    if (labels.multi_hot.cols() != class_count) throw DimensionError("dataset: multi-hot width");
  } else {
    for (std::size_t y : labels.index) {
      if (y >= class_count) throw ArgumentError("dataset: label out of range");
    }
  }
}

Dataset gen_multimodal(const SyntheticSpec& spec) {
  spec.validate();
  const RngSeed root{spec.seed};
  const std::size_t n = spec.rows, C = spec.class_count;

  Dataset d;
  d.class_count = C;
  d.split.assign(n, Split::train);
  Rng label_rng(derive_seed(root, "labels"));
  if (spec.multilabel) {
    Tensor hot = Tensor::matrix(n, C);
    for (std::size_t r = 0; r < n; ++r) {
      bool any = false;
      for (std::size_t c = 0; c < C; ++c) {
        if (label_rng.bernoulli(spec.prevalence[c])) {
          hot(r, c) = 1.0;
          any = true;
        }
      }
      if (!any) hot(r, label_rng.below(C)) = 1.0;
    }
    d.labels = Labels::multi(std::move(hot));
  } else {
    std::vector<std::size_t> y(n);
    for (auto& v : y) v = label_rng.below(C);
    d.labels = Labels::single(std::move(y));
  }

  for (std::size_t mi = 0; mi < spec.modalities.size(); ++mi) {
    const ModalitySpec& ms = spec.modalities[mi];
    Rng mean_rng(derive_seed(root, "means", mi));
    Tensor means = Tensor::matrix(C, ms.informative_dim);
    for (std::size_t c = 0; c < C; ++c) {
      double norm = 0.0;
      for (std::size_t j = 0; j < ms.informative_dim; ++j) {
        means(c, j) = mean_rng.normal();
        norm += means(c, j) * means(c, j);
      }
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < ms.informative_dim; ++j) {
        means(c, j) = norm > 0.0 ? means(c, j) * ms.snr / norm : 0.0;
      }
    }

    Rng row_rng(derive_seed(root, "rows", mi));
    Tensor x = Tensor::matrix(n, ms.feature_dim);
    std::vector<double> centre(ms.informative_dim);
    for (std::size_t r = 0; r < n; ++r) {
      std::fill(centre.begin(), centre.end(), 0.0);
      std::vector<std::size_t> active;
      if (spec.multilabel) {
        for (std::size_t c = 0; c < C; ++c) {
          if (d.labels.multi_hot(r, c) != 0.0) active.push_back(c);
        }
      } else {
        active.push_back(d.labels.index[r]);
      }
      for (std::size_t c : active) {
        std::size_t shown = c;
        if (ms.label_noise > 0.0 && row_rng.bernoulli(ms.label_noise)) {
          shown = (c + 1 + row_rng.below(C - 1)) % C;
        }
        for (std::size_t j = 0; j < ms.informative_dim; ++j) {
          centre[j] += means(shown, j) / static_cast<double>(active.size());
        }
      }
      double* xr = x.data() + r * ms.feature_dim;
      std::size_t j = 0;
      for (; j < ms.informative_dim; ++j) xr[j] = centre[j] + row_rng.normal();
      for (std::size_t b = 0; b < ms.bait_dim; ++b, ++j) xr[j] = ms.bait_strength * row_rng.normal();
      for (; j < ms.feature_dim; ++j) xr[j] = row_rng.normal();
    }
    d.modality_names.push_back(ms.name);
    d.modalities.push_back(std::move(x));
  }
  return d;
}

void SplitFractions::validate() const {
  auto check = [](double f, const char* name) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError(std::string("split.") + name, "must be in [0, 1]");
  };
  check(train, "train");
  check(holdout, "holdout");
  check(test, "test");
  if (train + holdout + test > 1.0 + 1e-12) {
    throw ConfigError("split", "fractions sum to more than 1");
  }
}

namespace {

void fisher_yates(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

Dataset split(const Dataset& data, const SplitFractions& fractions, RngSeed seed) {
  fractions.validate();
  Dataset out = data;
  std::vector<std::vector<std::size_t>> by_class(data.class_count + 1);
  for (std::size_t r = 0; r < data.rows(); ++r) by_class[data.primary_class(r)].push_back(r);
  Rng rng(derive_seed(seed, "split"));
  for (auto& rows : by_class) {
    fisher_yates(rows, rng);
    // Cumulative boundaries, so fractions summing to one use every row.
    const double n = static_cast<double>(rows.size());
    auto boundary = [&](double f) {
      return std::min(rows.size(), static_cast<std::size_t>(std::llround(f * n)));
    };
    const std::size_t b_train = boundary(fractions.train);
    const std::size_t b_hold = boundary(fractions.train + fractions.holdout);
    const std::size_t b_test = boundary(fractions.train + fractions.holdout + fractions.test);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      Split s = Split::unused;
      if (i < b_train) s = Split::train;
      else if (i < b_hold) s = Split::holdout;
      else if (i < b_test) s = Split::test;
      out.split[rows[i]] = s;
    }
  }
  return out;
}

std::vector<std::size_t> subsample(std::span<const std::size_t> rows, double fraction,
                                   RngSeed seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("subsample fraction in (0, 1]");
  std::vector<std::size_t> pool(rows.begin(), rows.end());
  Rng rng(derive_seed(seed, "subsample"));
  fisher_yates(pool, rng);
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size()))));
  pool.resize(std::min(keep, pool.size()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

BalanceResult balance_multilabel(const Dataset& data, std::size_t min_volume,
                                 std::size_t target_volume, RngSeed seed) {
  if (!data.labels.is_multilabel()) throw ArgumentError("balance_multilabel needs multi-hot labels");
  const std::size_t C = data.class_count;
  const std::vector<std::size_t> source_volume = data.class_volumes();

  BalanceResult res;
  std::vector<bool> kept(C, false);
  for (std::size_t c = 0; c < C; ++c) {
    if (source_volume[c] >= min_volume) {
      kept[c] = true;
      res.kept_classes.push_back(c);
    }
  }
  if (res.kept_classes.empty()) {
    throw ArgumentError("balance_multilabel: minimum volume removes every class");
  }

  std::vector<std::size_t> order(data.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "balance"));
  fisher_yates(order, rng);

  std::vector<std::size_t> out_volume(C, 0);
  for (std::size_t row : order) {
    std::size_t chosen = C;
    for (std::size_t c = 0; c < C; ++c) {
      if (!kept[c] || data.labels.multi_hot(row, c) == 0.0) continue;
      if (chosen == C || out_volume[c] < out_volume[chosen]) chosen = c;
    }
    if (chosen == C) continue;
    const std::size_t r = rng.below(source_volume[chosen] - out_volume[chosen]);
    if (out_volume[chosen] < target_volume && r < target_volume - out_volume[chosen]) {
      res.accepted_rows.push_back(row);
      for (std::size_t c = 0; c < C; ++c) {
        if (kept[c] && data.labels.multi_hot(row, c) != 0.0) ++out_volume[c];
      }
    }
  }
  std::sort(res.accepted_rows.begin(), res.accepted_rows.end());

  Dataset& d = res.dataset;
  d.class_count = C;
  d.modality_names = data.modality_names;
  for (const auto& m : data.modalities) d.modalities.push_back(m.gather_rows(res.accepted_rows));
  Tensor hot = data.labels.multi_hot.gather_rows(res.accepted_rows);
  for (std::size_t r = 0; r < hot.rows(); ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      if (!kept[c]) hot(r, c) = 0.0;
    }
  }
  d.labels = Labels::multi(std::move(hot));
  for (std::size_t row : res.accepted_rows) d.split.push_back(data.split[row]);
  return res;
}

namespace {

template <typename T>
void write_raw(const std::filesystem::path& p, std::span<const T> values) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
}

template <typename T>
std::vector<T> read_raw(const std::filesystem::path& p, std::size_t count) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::vector<T> v(count);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(T)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(T) || in.peek() != EOF) {
    throw std::runtime_error(p.string() + ": unexpected size");
  }
  return v;
}

}  // namespace

void save_dataset(const Dataset& data, const std::filesystem::path& dir,
                  const json& manifest_extra) {
  data.validate();
  std::filesystem::create_directories(dir);
  json mods = json::array();
  for (std::size_t i = 0; i < data.modality_count(); ++i) {
    const std::string file = "modality_" + std::to_string(i) + ".f64";
    write_raw<double>(dir / file, data.modalities[i].values());
    mods.push_back({{"name", data.modality_names[i]},
                    {"dim", data.modalities[i].cols()},
                    {"file", file}});
  }
  json labels;
  if (data.labels.is_multilabel()) {
    write_raw<double>(dir / "labels.f64", data.labels.multi_hot.values());
    labels = {{"kind", "multi_hot"}, {"file", "labels.f64"}};
  } else {
    std::vector<std::uint32_t> y(data.labels.index.begin(), data.labels.index.end());
    write_raw<std::uint32_t>(dir / "labels.u32", y);
    labels = {{"kind", "index"}, {"file", "labels.u32"}};
  }
  std::vector<std::uint8_t> tags;
  for (Split s : data.split) tags.push_back(static_cast<std::uint8_t>(s));
  write_raw<std::uint8_t>(dir / "split.u8", tags);

  json manifest = {{"format", "gblend-dataset"},
                   {"version", kDatasetFormatVersion},
                   {"rows", data.rows()},
                   {"class_count", data.class_count},
                   {"modalities", std::move(mods)},
                   {"labels", std::move(labels)},
                   {"split_file", "split.u8"},
                   {"split_sizes",
                    {{"train", data.indices(Split::train).size()},
                     {"holdout", data.indices(Split::holdout).size()},
                     {"test", data.indices(Split::test).size()},
                     {"unused", data.indices(Split::unused).size()}}}};
  if (manifest_extra.is_object()) {
    for (const auto& [k, v] : manifest_extra.items()) manifest[k] = v;
  }
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("no manifest.json in " + dir.string());
  const json m = json::parse(in);
  if (m.value("format", "") != "gblend-dataset") throw ArgumentError("not a gblend dataset");
  if (m.at("version").get<int>() != kDatasetFormatVersion) {
    throw ArgumentError("unsupported dataset version");
  }
  Dataset d;
  const auto rows = m.at("rows").get<std::size_t>();
  d.class_count = m.at("class_count").get<std::size_t>();
  for (const auto& mod : m.at("modalities")) {
    const auto dim = mod.at("dim").get<std::size_t>();
    d.modality_names.push_back(mod.at("name").get<std::string>());
    d.modalities.emplace_back(std::vector<std::size_t>{rows, dim},
                              read_raw<double>(dir / mod.at("file").get<std::string>(), rows * dim));
  }
  const auto& lab = m.at("labels");
  if (lab.at("kind") == "multi_hot") {
    d.labels = Labels::multi(Tensor({rows, d.class_count},
                                    read_raw<double>(dir / lab.at("file").get<std::string>(),
                                                     rows * d.class_count)));
  } else {
    auto y = read_raw<std::uint32_t>(dir / lab.at("file").get<std::string>(), rows);
    d.labels = Labels::single(std::vector<std::size_t>(y.begin(), y.end()));
  }
  for (std::uint8_t t : read_raw<std::uint8_t>(dir / m.at("split_file").get<std::string>(), rows)) {
    if (t > 3) throw ArgumentError("dataset: bad split tag");
    d.split.push_back(static_cast<Split>(t));
  }
  d.validate();
  return d;
}

}  // namespace gblend
