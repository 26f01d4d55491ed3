#include "qklab/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "qklab/rng.hpp"

namespace qklab {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  auto e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t row,
                  const std::string& column) {
  const std::string cell = trim(raw);
  double value = 0.0;
  auto [ptr, ec] =
      std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() ||
      !std::isfinite(value)) {
    throw std::runtime_error("load_csv: non-numeric or non-finite cell '" +
                             cell + "' at data row " + std::to_string(row) +
                             ", column '" + column + "'");
  }
  return value;
}

// Fisher-Yates with the library generator; used by every split routine.
template <typename T>
void shuffle_inplace(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.next_below(i);
    std::swap(v[i - 1], v[j]);
  }
}

std::map<int, std::vector<Eigen::Index>> indices_by_class(
    const SpectralDataset& ds) {
  std::map<int, std::vector<Eigen::Index>> by_class;
  for (Eigen::Index i = 0; i < ds.n_samples(); ++i)
    by_class[ds.labels[static_cast<std::size_t>(i)]].push_back(i);
  return by_class;
}

}  // namespace

std::vector<int> SpectralDataset::distinct_labels() const {
  std::set<int> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

void SpectralDataset::validate(bool require_two_classes) const {
  if (static_cast<Eigen::Index>(labels.size()) != n_samples())
    throw std::runtime_error("SpectralDataset: labels length != sample count");
  if (!samples.allFinite())
    throw std::runtime_error("SpectralDataset: non-finite sample value");
  if (!feature_names.empty() &&
      static_cast<Eigen::Index>(feature_names.size()) != n_features())
    throw std::runtime_error("SpectralDataset: feature_names length mismatch");
  for (int label : labels)
    if (label < 0)
      throw std::runtime_error("SpectralDataset: negative class label");
  if (require_two_classes && distinct_labels().size() < 2)
    throw std::runtime_error("SpectralDataset: need at least 2 classes");
}

SpectralDataset load_csv(const std::string& path,
                         const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_csv: empty file '" + path + "'");

  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);

  Eigen::Index label_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == label_column) label_col = static_cast<Eigen::Index>(c);
  if (label_col < 0)
    throw std::runtime_error("load_csv: label column '" + label_column +
                             "' not found in '" + path + "'");

  const Eigen::Index n_cols = static_cast<Eigen::Index>(header.size());
  const Eigen::Index d = n_cols - 1;
  if (d < 1)
    throw std::runtime_error("load_csv: no feature columns in '" + path + "'");

  std::vector<std::string> feature_names;
  for (Eigen::Index c = 0; c < n_cols; ++c)
    if (c != label_col) feature_names.push_back(header[static_cast<std::size_t>(c)]);

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    std::vector<std::string> cells = split_line(line);
    if (static_cast<Eigen::Index>(cells.size()) != n_cols)
      throw std::runtime_error(
          "load_csv: ragged row " + std::to_string(row) + " in '" + path +
          "' (" + std::to_string(cells.size()) + " cells, expected " +
          std::to_string(n_cols) + ")");
    for (Eigen::Index c = 0; c < n_cols; ++c) {
      const std::string& name = header[static_cast<std::size_t>(c)];
      double v = parse_cell(cells[static_cast<std::size_t>(c)], row, name);
      if (c == label_col) {
        double integral = 0.0;
        if (std::modf(v, &integral) != 0.0 || v < 0.0)
          throw std::runtime_error(
              "load_csv: label at data row " + std::to_string(row) +
              " is not a non-negative integer");
        labels.push_back(static_cast<int>(integral));
      } else {
        values.push_back(v);
      }
    }
  }

  const Eigen::Index n = static_cast<Eigen::Index>(labels.size());
  SpectralDataset ds;
  ds.samples.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      ds.samples(i, j) = values[static_cast<std::size_t>(i * d + j)];
  ds.labels = std::move(labels);
  ds.feature_names = std::move(feature_names);
  ds.provenance = path;
  ds.validate();
  return ds;
}

std::string to_csv_string(const SpectralDataset& ds,
                          const std::string& label_column) {
  std::ostringstream out;
  out.precision(17);
  for (Eigen::Index j = 0; j < ds.n_features(); ++j) {
    if (ds.feature_names.empty())
      out << 'f' << j;
    else
      out << ds.feature_names[static_cast<std::size_t>(j)];
    out << ',';
  }
  out << label_column << '\n';
  for (Eigen::Index i = 0; i < ds.n_samples(); ++i) {
    for (Eigen::Index j = 0; j < ds.n_features(); ++j)
      out << ds.samples(i, j) << ',';
    out << ds.labels[static_cast<std::size_t>(i)] << '\n';
  }
  return out.str();
}

void save_csv(const SpectralDataset& ds, const std::string& path,
              const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open '" + path + "'");
  out << to_csv_string(ds, label_column);
}

std::vector<Eigen::Index> rank_features_by_variance(const SpectralDataset& ds) {
  const Eigen::Index n = ds.n_samples();
  if (n < 2)
    throw std::runtime_error(
        "rank_features_by_variance: need at least 2 samples");
  Eigen::VectorXd mean = ds.samples.colwise().mean();
  Eigen::VectorXd var =
      (ds.samples.rowwise() - mean.transpose()).colwise().squaredNorm() /
      static_cast<double>(n - 1);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(ds.n_features()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     if (var[a] != var[b]) return var[a] > var[b];
                     return a < b;
                   });
  return order;
}

SpectralDataset select_top_features(const SpectralDataset& ds,
                                    const std::vector<Eigen::Index>& ranking,
                                    Eigen::Index n) {
  if (n < 1 || n > ds.n_features())
    throw std::runtime_error("select_top_features: n out of range");
  if (static_cast<Eigen::Index>(ranking.size()) != ds.n_features())
    throw std::runtime_error("select_top_features: ranking size mismatch");
  SpectralDataset out;
  out.samples.resize(ds.n_samples(), n);
  for (Eigen::Index j = 0; j < n; ++j)
    out.samples.col(j) = ds.samples.col(ranking[static_cast<std::size_t>(j)]);
  out.labels = ds.labels;
  if (!ds.feature_names.empty()) {
    for (Eigen::Index j = 0; j < n; ++j)
      out.feature_names.push_back(
          ds.feature_names[static_cast<std::size_t>(ranking[static_cast<std::size_t>(j)])]);
  }
  out.provenance = ds.provenance;
  return out;
}

std::pair<SpectralDataset, FeatureScaling> normalize_minmax(
    const SpectralDataset& ds, std::span<const Eigen::Index> train_idx) {
  const Eigen::Index d = ds.n_features();
  FeatureScaling scaling;
  scaling.min.resize(d);
  scaling.max.resize(d);

  if (train_idx.empty()) {
    scaling.min = ds.samples.colwise().minCoeff();
    scaling.max = ds.samples.colwise().maxCoeff();
  } else {
    scaling.min.setConstant(std::numeric_limits<double>::infinity());
    scaling.max.setConstant(-std::numeric_limits<double>::infinity());
    for (Eigen::Index i : train_idx) {
      if (i < 0 || i >= ds.n_samples())
        throw std::runtime_error("normalize_minmax: train index out of range");
      scaling.min = scaling.min.cwiseMin(ds.samples.row(i).transpose());
      scaling.max = scaling.max.cwiseMax(ds.samples.row(i).transpose());
    }
  }

  SpectralDataset out = ds;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double range = scaling.max[j] - scaling.min[j];
    if (range == 0.0) {
      out.samples.col(j).setZero();
    } else {
      out.samples.col(j) =
          (ds.samples.col(j).array() - scaling.min[j]) / range;
    }
  }
  return {std::move(out), std::move(scaling)};
}

DatasetSplit make_balanced_split(const SpectralDataset& ds, SplitCounts counts,
                                 const std::vector<int>& classes,
                                 std::uint64_t seed) {
  if (classes.empty())
    throw std::runtime_error("make_balanced_split: empty class set");
  const auto k = static_cast<Eigen::Index>(classes.size());
  if (counts.n_train % k || counts.n_val % k || counts.n_test % k)
    throw std::runtime_error(
        "make_balanced_split: each count must be divisible by the class count");

  const Eigen::Index per_train = counts.n_train / k;
  const Eigen::Index per_val = counts.n_val / k;
  const Eigen::Index per_test = counts.n_test / k;
  const Eigen::Index per_class = per_train + per_val + per_test;

  auto by_class = indices_by_class(ds);
  Rng root = Rng(seed).stream("balanced_split");

  DatasetSplit split;
  split.seed = seed;
  for (int cls : classes) {
    auto it = by_class.find(cls);
    if (it == by_class.end() ||
        static_cast<Eigen::Index>(it->second.size()) < per_class)
      throw std::runtime_error("make_balanced_split: class " +
                               std::to_string(cls) +
                               " has insufficient samples");
    std::vector<Eigen::Index> pool = it->second;
    Rng rng = root.stream(static_cast<std::uint64_t>(cls));
    shuffle_inplace(pool, rng);
    split.train_idx.insert(split.train_idx.end(), pool.begin(),
                           pool.begin() + per_train);
    split.val_idx.insert(split.val_idx.end(), pool.begin() + per_train,
                         pool.begin() + per_train + per_val);
    split.test_idx.insert(split.test_idx.end(),
                          pool.begin() + per_train + per_val,
                          pool.begin() + per_class);
  }
  return split;
}

std::vector<DatasetSplit> kfold_splits(const SpectralDataset& ds, int k,
                                       std::array<int, 3> ratio,
                                       std::uint64_t seed) {
  if (k < 2) throw std::runtime_error("kfold_splits: k must be >= 2");
  const auto [t, v, s] = ratio;
  if (t < 1 || v < 1 || s < 1)
    throw std::runtime_error("kfold_splits: ratio parts must be positive");

  auto by_class = indices_by_class(ds);
  const auto n_classes = static_cast<Eigen::Index>(by_class.size());
  if (n_classes < 1) throw std::runtime_error("kfold_splits: empty dataset");
  const Eigen::Index per_class =
      static_cast<Eigen::Index>(by_class.begin()->second.size());
  for (const auto& [cls, idx] : by_class)
    if (static_cast<Eigen::Index>(idx.size()) != per_class)
      throw std::runtime_error("kfold_splits: dataset is not class-balanced");
  if (per_class < k)
    throw std::runtime_error("kfold_splits: k exceeds per-class sample count");

  const Eigen::Index n = ds.n_samples();
  const double parts = static_cast<double>(t + v + s);
  // Global sizes first, then per-class distribution. Every sample is used,
  // so per-class consumption always equals the class pool.
  const Eigen::Index n_val = static_cast<Eigen::Index>(
      std::llround(static_cast<double>(n) * static_cast<double>(v) / parts));
  const Eigen::Index n_train = ((n - n_val) * t) / (t + s);
  const Eigen::Index n_test = n - n_val - n_train;
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw std::runtime_error("kfold_splits: dataset too small for the ratio");

  std::vector<int> class_ids;
  for (const auto& [cls, idx] : by_class) class_ids.push_back(cls);

  Rng root = Rng(seed).stream("kfold");
  std::vector<DatasetSplit> folds;
  for (int fold = 0; fold < k; ++fold) {
    // Per-class counts: base share plus extras rotated across classes and
    // staggered between the val and train sets so no class receives two.
    std::vector<Eigen::Index> val_c(static_cast<std::size_t>(n_classes),
                                    n_val / n_classes);
    std::vector<Eigen::Index> train_c(static_cast<std::size_t>(n_classes),
                                      n_train / n_classes);
    const Eigen::Index val_extra = n_val % n_classes;
    const Eigen::Index train_extra = n_train % n_classes;
    for (Eigen::Index e = 0; e < val_extra; ++e)
      ++val_c[static_cast<std::size_t>((fold + e) % n_classes)];
    for (Eigen::Index e = 0; e < train_extra; ++e)
      ++train_c[static_cast<std::size_t>((fold + val_extra + e) % n_classes)];

    DatasetSplit split;
    split.seed = seed;
    for (Eigen::Index ci = 0; ci < n_classes; ++ci) {
      const int cls = class_ids[static_cast<std::size_t>(ci)];
      std::vector<Eigen::Index> pool = by_class[cls];
      Rng rng = root.stream(static_cast<std::uint64_t>(fold))
                    .stream(static_cast<std::uint64_t>(cls));
      shuffle_inplace(pool, rng);
      const Eigen::Index tc = train_c[static_cast<std::size_t>(ci)];
      const Eigen::Index vc = val_c[static_cast<std::size_t>(ci)];
      const Eigen::Index sc = per_class - tc - vc;
      if (sc < 0)
        throw std::runtime_error("kfold_splits: ratio incompatible with class size");
      split.train_idx.insert(split.train_idx.end(), pool.begin(),
                             pool.begin() + tc);
      split.val_idx.insert(split.val_idx.end(), pool.begin() + tc,
                           pool.begin() + tc + vc);
      split.test_idx.insert(split.test_idx.end(), pool.begin() + tc + vc,
                            pool.end());
    }
    folds.push_back(std::move(split));
  }
  return folds;
}

SynthTask synth_task_from_name(const std::string& name) {
  if (name == "two-blob") return SynthTask::TwoBlob;
  if (name == "ring") return SynthTask::Ring;
  if (name == "random") return SynthTask::Random;
  throw std::runtime_error("unknown synth task '" + name + "'");
}

std::string to_string(SynthTask task) {
  switch (task) {
    case SynthTask::TwoBlob: return "two-blob";
    case SynthTask::Ring: return "ring";
    case SynthTask::Random: return "random";
  }
  return "?";
}

SpectralDataset synth_dataset(Eigen::Index n_samples, Eigen::Index d,
                              SynthTask task, std::uint64_t seed) {
  if (n_samples < 2 || d < 1)
    throw std::runtime_error("synth_dataset: need n_samples >= 2, d >= 1");

  SpectralDataset ds;
  ds.samples.resize(n_samples, d);
  ds.labels.resize(static_cast<std::size_t>(n_samples));
  for (Eigen::Index j = 0; j < d; ++j)
    ds.feature_names.push_back("f" + std::to_string(j));

  // Balanced labels in shuffled order, independent of the feature draw.
  std::vector<int> labels(static_cast<std::size_t>(n_samples));
  for (Eigen::Index i = 0; i < n_samples; ++i)
    labels[static_cast<std::size_t>(i)] = (i < (n_samples + 1) / 2) ? 0 : 1;
  Rng label_rng = Rng(seed).stream("synth_labels");
  shuffle_inplace(labels, label_rng);

  Rng rng = Rng(seed).stream("synth_features").stream(to_string(task));
  switch (task) {
    case SynthTask::TwoBlob: {
      // Centers 0.3 and 0.7 on every coordinate; noise truncated at +-0.15,
      // which guarantees linear separability along the diagonal.
      for (Eigen::Index i = 0; i < n_samples; ++i) {
        const double center = labels[static_cast<std::size_t>(i)] ? 0.7 : 0.3;
        for (Eigen::Index j = 0; j < d; ++j) {
          double noise = 0.06 * rng.next_normal();
          noise = std::clamp(noise, -0.15, 0.15);
          ds.samples(i, j) = center + noise;
        }
      }
      break;
    }
    case SynthTask::Ring: {
      // Class 0 inner disk, class 1 annulus in the first two coordinates
      // (one coordinate when d == 1); remaining coordinates uniform.
      for (Eigen::Index i = 0; i < n_samples; ++i) {
        const bool outer = labels[static_cast<std::size_t>(i)] == 1;
        const double radius = outer ? 0.30 + 0.12 * rng.next_double()
                                    : 0.05 + 0.10 * rng.next_double();
        const double angle = 2.0 * std::numbers::pi * rng.next_double();
        ds.samples(i, 0) = 0.5 + radius * std::cos(angle);
        if (d > 1) ds.samples(i, 1) = 0.5 + radius * std::sin(angle);
        for (Eigen::Index j = 2; j < d; ++j)
          ds.samples(i, j) = rng.next_double();
      }
      break;
    }
    case SynthTask::Random: {
      for (Eigen::Index i = 0; i < n_samples; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
          ds.samples(i, j) = rng.next_double();
      break;
    }
  }

  ds.labels = labels;
  ds.provenance = "synth:" + to_string(task) + ":n=" +
                  std::to_string(n_samples) + ":d=" + std::to_string(d) +
                  ":seed=" + std::to_string(seed);
  ds.validate();
  return ds;
}

}  // namespace qklab
