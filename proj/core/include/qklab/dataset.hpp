#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qklab {

/// Labeled pixel spectra: N samples of d dimensionless reflectance values.
struct SpectralDataset {
  Eigen::MatrixXd samples;                 // N x d
  std::vector<int> labels;                 // size N, small non-negative ids
  std::vector<std::string> feature_names;  // size d or empty
  std::string provenance;

  Eigen::Index n_samples() const { return samples.rows(); }
  Eigen::Index n_features() const { return samples.cols(); }

  /// Distinct labels, ascending.
  std::vector<int> distinct_labels() const;

  /// Throws unless every value is finite, labels match N, and (when
  /// require_two_classes) at least two classes are present.
  void validate(bool require_two_classes = false) const;
};

/// Disjoint train/val/test index sets into one SpectralDataset.
struct DatasetSplit {
  std::vector<Eigen::Index> train_idx;
  std::vector<Eigen::Index> val_idx;
  std::vector<Eigen::Index> test_idx;
  std::uint64_t seed = 0;
};

/// Per-feature affine normalization statistics (train-set min/max).
struct FeatureScaling {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
};

/// Parse a UTF-8 comma-separated file with a header row. Every non-label cell
/// must be a finite decimal or scientific literal; errors name the offending
/// row and column. Row order is preserved.
SpectralDataset load_csv(const std::string& path, const std::string& label_column);

/// Serialize in the same CSV dialect load_csv accepts, 17 significant
/// digits (round-trip exact for doubles).
std::string to_csv_string(const SpectralDataset& ds,
                          const std::string& label_column = "label");

/// Write a dataset back out in the same CSV dialect load_csv accepts.
void save_csv(const SpectralDataset& ds, const std::string& path,
              const std::string& label_column = "label");

/// Feature indices ordered by descending unbiased sample variance, ties
/// broken by ascending original index. Requires N >= 2.
std::vector<Eigen::Index> rank_features_by_variance(const SpectralDataset& ds);

/// Keep the first n features of `ranking`, in ranking order.
SpectralDataset select_top_features(const SpectralDataset& ds,
                                    const std::vector<Eigen::Index>& ranking,
                                    Eigen::Index n);

/// Min-max normalization to [0,1]. Statistics come from `train_idx` rows when
/// non-empty, otherwise from all rows; they are then applied to every row, so
/// val/test values may fall outside [0,1] (no clipping). A feature constant
/// on the statistics rows maps to 0 everywhere.
std::pair<SpectralDataset, FeatureScaling> normalize_minmax(
    const SpectralDataset& ds, std::span<const Eigen::Index> train_idx = {});

struct SplitCounts {
  Eigen::Index n_train = 0;
  Eigen::Index n_val = 0;
  Eigen::Index n_test = 0;
};

/// Class-balanced train/val/test sampling restricted to `classes`. Each count
/// must be divisible by the class count and each class must have enough
/// samples. Deterministic per seed.
DatasetSplit make_balanced_split(const SpectralDataset& ds, SplitCounts counts,
                                 const std::vector<int>& classes,
                                 std::uint64_t seed);

/// k stratified splits of a class-balanced dataset at a fixed
/// train:val:test ratio, every sample used once per fold.
///
/// Sizing: n_val = round(N * v/(t+v+s)) half-up, the remainder is split
/// t:s with integer division so test takes the extra on odd remainders
/// (178 samples at 2:1:2 -> 71/36/71; 8 samples -> 3/2/3).
std::vector<DatasetSplit> kfold_splits(const SpectralDataset& ds, int k,
                                       std::array<int, 3> ratio,
                                       std::uint64_t seed);

enum class SynthTask { TwoBlob, Ring, Random };

SynthTask synth_task_from_name(const std::string& name);
std::string to_string(SynthTask task);

/// Deterministic synthetic datasets in [0,1]^d with balanced binary labels.
/// TwoBlob is linearly separable by construction (truncated noise), Random
/// has labels independent of the features.
SpectralDataset synth_dataset(Eigen::Index n_samples, Eigen::Index d,
                              SynthTask task, std::uint64_t seed);

}  // namespace qklab
