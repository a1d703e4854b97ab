#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "fmim/common.hpp"
#include "fmim/eval.hpp"

using namespace fmim;

using V = std::vector<std::size_t>;

TEST_CASE("accuracy: examples") {
  CHECK(accuracy(V{0, 1, 1, 0}, V{0, 1, 0, 0}) == 0.75);
  CHECK(accuracy(V{2}, V{2}) == 1.0);
  CHECK(accuracy(V{1, 1}, V{0, 0}) == 0.0);
  CHECK_THROWS_AS(accuracy(V{}, V{}), ContractViolation);
  CHECK_THROWS_AS(accuracy(V{0}, V{0, 1}), ContractViolation);
}

TEST_CASE("confusion matrix") {
  const auto cm = confusion_matrix(V{0, 1, 1, 2, 0}, V{0, 1, 0, 2, 2}, 3);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(2, 0) == 1);
  CHECK(cm.at(2, 2) == 1);
  CHECK(cm.total() == 5);
  CHECK(cm.trace() == 3);
  CHECK_THROWS_AS(confusion_matrix(V{3}, V{0}, 3), ContractViolation);
}

TEST_CASE("f1: examples") {
  const auto r = f1_per_class(V{1, 0, 0}, V{1, 1, 0}, 2);
  // class 1: TP 1, FN 1 -> 2/3; class 0: TP 1, FP 1 -> 2/3
  CHECK(r.per_class[1] == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_class[0] == doctest::Approx(2.0 / 3.0));
  CHECK(r.macro == doctest::Approx(2.0 / 3.0));

  const auto perfect = f1_per_class(V{0, 1, 2}, V{0, 1, 2}, 3);
  CHECK(perfect.macro == 1.0);

  const auto absent = f1_per_class(V{0, 0}, V{0, 0}, 3);
  CHECK(absent.absent == std::vector<bool>{false, true, true});
  CHECK(absent.per_class[1] == 1.0);
  CHECK(absent.macro == 1.0);

  const auto wrong = f1_per_class(V{1, 1}, V{0, 0}, 2);
  CHECK(wrong.per_class == std::vector<double>{0.0, 0.0});
}

TEST_CASE("f1: macro average is invariant under class relabeling") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t classes = 2 + rng.below(6), n = 1 + rng.below(80);
    V preds(n), labels(n), perm(classes);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = rng.below(classes);
      labels[i] = rng.below(classes);
    }
    for (std::size_t j = 0; j < classes; ++j) perm[j] = j;
    rng.shuffle(std::span<std::size_t>(perm));
    V pp(n), pl(n);
    for (std::size_t i = 0; i < n; ++i) {
      pp[i] = perm[preds[i]];
      pl[i] = perm[labels[i]];
    }
    CHECK(f1_per_class(preds, labels, classes).macro ==
          doctest::Approx(f1_per_class(pp, pl, classes).macro).epsilon(1e-12));
  }
}

TEST_CASE("heterogeneity report") {
  Dataset ds;
  ds.shape = {1, 1, 1};
  ds.classes = 5;
  const float px = 0.0f;
  for (std::size_t j = 0; j < 5; ++j)
    for (int i = 0; i < 10; ++i) ds.push_back(std::span<const float>(&px, 1), j);

  Partition one;
  one.clients.resize(1);
  for (std::size_t i = 0; i < ds.size(); ++i) one.clients[0].push_back(i);
  CHECK(heterogeneity_report(one, ds).skew == 1.0);

  const auto balanced = iid_partition(ds, 5, 1);
  const auto report = heterogeneity_report(balanced, ds);
  CHECK(report.skew == doctest::Approx(0.2));

  const auto part = dirichlet_partition(ds, {4, 0.3, 2, false});
  const auto r = heterogeneity_report(part, ds);
  for (std::size_t j = 0; j < 5; ++j) {
    std::size_t sum = 0;
    for (std::size_t k = 0; k < 4; ++k) sum += r.counts[k][j];
    CHECK(sum == 10);
  }

  std::ostringstream out;
  write_heterogeneity_csv(out, r);
  const auto text = out.str();
  CHECK(text.rfind("client_id,class_id,count\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 4 * 5);
}
