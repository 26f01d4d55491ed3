#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "qklab/dataset.hpp"
#include "qklab/kernel_matrix.hpp"
#include "qklab/rng.hpp"
#include "qklab/svm.hpp"

using namespace qklab;

namespace {

KernelMatrix wrap(const Eigen::MatrixXd& values) {
  KernelMatrix k;
  k.values = values;
  k.kind = KernelKind::Rbf;
  k.bandwidth_or_gamma = 1.0;
  return k;
}

// Random PSD kernel with unit diagonal via normalized Gram of random vectors.
KernelMatrix random_kernel(Rng& rng, int n) {
  Eigen::MatrixXd v(n, n + 2);
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index j = 0; j < v.cols(); ++j) v(i, j) = rng.next_normal();
  Eigen::MatrixXd gram = v * v.transpose();
  Eigen::VectorXd d = gram.diagonal().cwiseSqrt();
  for (Eigen::Index i = 0; i < gram.rows(); ++i)
    for (Eigen::Index j = 0; j < gram.cols(); ++j)
      gram(i, j) /= d[i] * d[j];
  return wrap(gram);
}

}  // namespace

TEST_CASE("analytic 2-point problem: K = I, y = (+1,-1)") {
  const KernelMatrix k = wrap(Eigen::MatrixXd::Identity(2, 2));
  const std::vector<int> y{1, -1};

  SUBCASE("C = 1 gives alpha = (1,1), b = 0") {
    const SvmModel m = train_binary(k, y, 1.0);
    CHECK(m.alphas[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(m.alphas[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(m.bias == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(m.support_idx.size() == 2);
  }
  SUBCASE("C = 0.5 clips both at the bound, b = 0 by midpoint") {
    const SvmModel m = train_binary(k, y, 0.5);
    CHECK(m.alphas[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(m.alphas[1] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(m.bias == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("duplicated point with opposite labels: both alphas at the bound") {
  Eigen::MatrixXd values(2, 2);
  values << 1.0, 1.0, 1.0, 1.0;  // identical training points
  const KernelMatrix k = wrap(values);
  const std::vector<int> y{1, -1};
  const SvmModel m = train_binary(k, y, 1.0, {.tol = 1e-9});
  CHECK(m.alphas[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(m.alphas[1] == doctest::Approx(1.0).epsilon(1e-7));
  const double smo_obj = dual_objective(m.alphas, y, k.values);
  const double grid_obj = oracles::grid_qp_best_objective(k.values, y, 1.0);
  CHECK(smo_obj == doctest::Approx(grid_obj).epsilon(1e-6));
}

TEST_CASE("decision values follow the dual expansion") {
  const KernelMatrix k_train = wrap(Eigen::MatrixXd::Identity(2, 2));
  const std::vector<int> y{1, -1};
  const SvmModel m = train_binary(k_train, y, 1.0);

  SUBCASE("hand-built cross column gives k1 - k2") {
    Eigen::MatrixXd cross(2, 1);
    cross << 0.8, 0.3;
    const Eigen::VectorXd values = decision_values(m, wrap(cross));
    CHECK(values[0] == doctest::Approx(0.5).epsilon(1e-9));
  }
  SUBCASE("training kernel as cross reproduces (+1, -1)") {
    const Eigen::VectorXd values = decision_values(m, k_train);
    CHECK(values[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(values[1] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(predict_binary(m, k_train) == std::vector<int>{1, -1});
  }
  SUBCASE("all-zero alphas give the constant bias") {
    SvmModel zero = m;
    zero.alphas.setZero();
    zero.bias = 0.25;
    const Eigen::VectorXd values = decision_values(zero, k_train);
    CHECK(values[0] == doctest::Approx(0.25));
    CHECK(values[1] == doctest::Approx(0.25));
  }
  SUBCASE("shape mismatch throws") {
    Eigen::MatrixXd bad(3, 1);
    bad.setZero();
    CHECK_THROWS(decision_values(m, wrap(bad)));
  }
}

TEST_CASE("zero decision value maps to +1") {
  const KernelMatrix k = wrap(Eigen::MatrixXd::Identity(2, 2));
  const std::vector<int> y{1, -1};
  SvmModel m = train_binary(k, y, 1.0);
  m.alphas.setZero();
  m.bias = 0.0;
  const std::vector<int> pred = predict_binary(m, k);
  CHECK(pred == std::vector<int>{1, 1});
}

TEST_CASE("train_binary input validation") {
  const KernelMatrix k = wrap(Eigen::MatrixXd::Identity(2, 2));
  CHECK_THROWS(train_binary(k, {1, 1}, 1.0));   // single class
  CHECK_THROWS(train_binary(k, {1, 0}, 1.0));   // labels not +-1
  CHECK_THROWS(train_binary(k, {1, -1}, 0.0));  // C <= 0
  Eigen::MatrixXd rect(2, 3);
  rect.setZero();
  CHECK_THROWS(train_binary(wrap(rect), {1, -1}, 1.0));
  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3, -1
  CHECK_THROWS(train_binary(wrap(indefinite), {1, -1}, 1.0));
}

TEST_CASE("SMO matches the grid oracle on random small problems") {
  Rng rng(101);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3 + static_cast<int>(rng.next_below(4));  // 3..6
    KernelMatrix k = random_kernel(rng, n);
    std::vector<int> y(static_cast<std::size_t>(n));
    bool pos = false, neg = false;
    for (auto& label : y) {
      label = rng.next_below(2) ? 1 : -1;
      (label == 1 ? pos : neg) = true;
    }
    if (!pos || !neg) {
      y[0] = 1;
      y[1] = -1;
    }
    const double C = 0.25 + 1.5 * rng.next_double();
    const SvmModel m = train_binary(k, y, C, {.tol = 1e-9});
    const double smo_obj = dual_objective(m.alphas, y, k.values);
    const double grid_obj = oracles::grid_qp_best_objective(k.values, y, C);
    CHECK(smo_obj == doctest::Approx(grid_obj).epsilon(1e-6));
    CHECK(kkt_violation(m, k) < 1e-8);
  }
}

TEST_CASE("SMO dominates a 1e6-point random search on tiny problems") {
  Rng rng(55);
  for (int trial = 0; trial < 3; ++trial) {
    const int n = 4 + static_cast<int>(rng.next_below(3));
    KernelMatrix k = random_kernel(rng, n);
    std::vector<int> y(static_cast<std::size_t>(n), 1);
    for (std::size_t i = 0; i < y.size() / 2; ++i) y[i] = -1;
    const double C = 1.0;
    const SvmModel m = train_binary(k, y, C, {.tol = 1e-9});
    const double smo_obj = dual_objective(m.alphas, y, k.values);
    const double rs_obj =
        oracles::random_search_dual(k.values, y, C, 1000000, 7 + trial);
    CHECK(smo_obj >= rs_obj - 1e-9);
  }
}

TEST_CASE("dual constraint sum alpha_i y_i = 0 holds after training") {
  Rng rng(42);
  KernelMatrix k = random_kernel(rng, 6);
  const std::vector<int> y{1, 1, -1, 1, -1, -1};
  const SvmModel m = train_binary(k, y, 0.7);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < m.alphas.size(); ++i)
    sum += m.alphas[i] * y[static_cast<std::size_t>(i)];
  CHECK(std::abs(sum) < 1e-8);
  for (Eigen::Index i = 0; i < m.alphas.size(); ++i) {
    CHECK(m.alphas[i] >= 0.0);
    CHECK(m.alphas[i] <= 0.7 + 1e-12);
  }
}

TEST_CASE("separable 2-point problem trains to accuracy 1 as C grows") {
  Eigen::MatrixXd values(2, 2);
  values << 1.0, 0.2, 0.2, 1.0;
  const KernelMatrix k = wrap(values);
  const std::vector<int> y{1, -1};
  const SvmModel m = train_binary(k, y, 1e6);
  CHECK(predict_binary(m, k) == y);
}

TEST_CASE("one-vs-rest on 2 classes reduces to the binary model") {
  const SpectralDataset data = synth_dataset(24, 3, SynthTask::TwoBlob, 2);
  const KernelMatrix k = rbf_matrix(data.samples, 2.0, 1);
  std::vector<int> y = data.labels;  // {0,1}

  const OvrModel ovr = train_ovr(k, y, 1.0);
  REQUIRE(ovr.class_ids == std::vector<int>{0, 1});
  const std::vector<int> multi_pred = predict_ovr(ovr, k);

  std::vector<int> y_bin(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) y_bin[i] = y[i] == 0 ? 1 : -1;
  const SvmModel bin = train_binary(k, y_bin, 1.0);
  const std::vector<int> bin_pred = predict_binary(bin, k);
  for (std::size_t i = 0; i < y.size(); ++i)
    CHECK(multi_pred[i] == (bin_pred[i] > 0 ? 0 : 1));
}

TEST_CASE("one-vs-rest ties go to the lowest class id") {
  // Constructed models: classes 0 and 1 produce the same decision value.
  const KernelMatrix k = wrap(Eigen::MatrixXd::Identity(2, 2));
  OvrModel ovr;
  ovr.class_ids = {0, 1, 2};
  for (int c = 0; c < 3; ++c) {
    SvmModel m;
    m.alphas = Eigen::VectorXd::Zero(2);
    m.labels = {1, -1};
    m.C = 1.0;
    m.bias = c == 2 ? -1.0 : 0.5;
    ovr.models.push_back(m);
  }
  const std::vector<int> pred = predict_ovr(ovr, k);
  CHECK(pred == std::vector<int>{0, 0});
}

TEST_CASE("4-class OVR matches independently trained binary models") {
  SpectralDataset data = synth_dataset(40, 2, SynthTask::Random, 20);
  for (std::size_t i = 0; i < data.labels.size(); ++i)
    data.labels[i] = static_cast<int>(i % 4);
  const KernelMatrix k = rbf_matrix(data.samples, 1.0, 1);

  const OvrModel ovr = train_ovr(k, data.labels, 2.0);
  const std::vector<int> pred = predict_ovr(ovr, k);

  // Compositional oracle: train each one-vs-rest binary model separately
  // and take the argmax by hand.
  std::vector<Eigen::VectorXd> scores;
  for (int cls = 0; cls < 4; ++cls) {
    std::vector<int> y_bin(data.labels.size());
    for (std::size_t i = 0; i < data.labels.size(); ++i)
      y_bin[i] = data.labels[i] == cls ? 1 : -1;
    SmoOptions opts;
    opts.check_psd = false;
    scores.push_back(decision_values(train_binary(k, y_bin, 2.0, opts), k));
  }
  for (Eigen::Index j = 0; j < 40; ++j) {
    int best = 0;
    for (int c = 1; c < 4; ++c)
      if (scores[static_cast<std::size_t>(c)][j] >
          scores[static_cast<std::size_t>(best)][j])
        best = c;
    CHECK(pred[static_cast<std::size_t>(j)] == best);
  }
  CHECK_THROWS(train_ovr(k, std::vector<int>(40, 3), 1.0));  // single class
}

TEST_CASE("model JSON round-trip") {
  const KernelMatrix k = wrap(Eigen::MatrixXd::Identity(2, 2));
  const SvmModel m = train_binary(k, {1, -1}, 1.0);
  const SvmModel back = svm_from_json(svm_to_json(m));
  CHECK(back.alphas == m.alphas);
  CHECK(back.bias == m.bias);
  CHECK(back.labels == m.labels);
  CHECK(back.support_idx == m.support_idx);
  CHECK(back.C == m.C);
}
