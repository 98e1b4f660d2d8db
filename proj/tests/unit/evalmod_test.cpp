#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "aurecon/common/error.hpp"
#include "aurecon/evalmod/metrics.hpp"

namespace aurecon::eval {
namespace {

ConfusionCounts single(double p, int y, double t = 0.5) {
  ConfusionCounts c(1);
  const double probs[] = {p};
  const int labels[] = {y};
  c.update(probs, labels, t);
  return c;
}

TEST(Update, BoundaryPolicy) {
  EXPECT_EQ(single(0.7, 1).at(0), (AuCounts{1, 0, 0, 0}));
  EXPECT_EQ(single(0.5, 0).at(0), (AuCounts{0, 1, 0, 0}));
  EXPECT_EQ(single(0.2, 0).at(0), (AuCounts{0, 0, 1, 0}));
  EXPECT_EQ(single(0.49, 1).at(0), (AuCounts{0, 0, 0, 1}));
  EXPECT_THROW(single(0.5, 1, 0.0), Error);
  EXPECT_THROW(single(0.5, 1, 1.0), Error);
  ConfusionCounts c(2);
  const double p[] = {0.1};
  const int y[] = {0};
  EXPECT_THROW(c.update(p, y), ShapeError);
}

TEST(Metrics, HandValues) {
  EXPECT_NEAR(f1({2, 1, 0, 1}), 4.0 / 6.0, 1e-15);
  EXPECT_EQ(f1({3, 0, 5, 0}), 1.0);
  EXPECT_EQ(f1({0, 0, 7, 0}), 0.0);
  EXPECT_EQ(accuracy({3, 0, 5, 0}), 1.0);
  EXPECT_EQ(accuracy({1, 1, 1, 1}), 0.5);
  EXPECT_THROW(accuracy({}), Error);
}

TEST(Report, AveragesAndStableText) {
  ConfusionCounts c(6);
  auto r = report(c);
  r.f1 = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  double m = 0;
  for (double v : r.f1) m += v;
  EXPECT_NEAR(m / 6, 0.35, 1e-15);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 40; ++i) {
    double p[6];
    int y[6];
    for (int k = 0; k < 6; ++k) {
      p[k] = u(rng);
      y[k] = u(rng) < 0.4;
    }
    c.update(p, y);
  }
  auto rep = report(c);
  double mean = 0;
  for (std::size_t k = 0; k < 6; ++k) mean += f1(c.at(k));
  EXPECT_NEAR(rep.mean_f1, mean / 6, 1e-15);
  EXPECT_EQ(rep.to_text(), report(c).to_text());
  EXPECT_EQ(rep.to_tsv(), report(c).to_tsv());
  EXPECT_NE(rep.to_text().find("Avg."), std::string::npos);
  EXPECT_EQ(rep.au_names[5], "AU6");

  ConfusionCounts one(1);
  const double p[] = {0.8};
  const int y[] = {1};
  one.update(p, y);
  auto r1 = report(one, {"AU12"});
  EXPECT_EQ(r1.mean_f1, r1.f1[0]);
  EXPECT_EQ(r1.mean_accuracy, r1.accuracy[0]);
  EXPECT_EQ(r1.to_tsv(), "au\tf1\taccuracy\nAU12\t1\t1\navg\t1\t1\n");
}

// Recount directly from stored (prediction, label) lists.
struct Recount {
  double f1, acc;
};
Recount brute_force(const std::vector<double>& probs, const std::vector<int>& labels, std::size_t k, std::size_t n_au,
                    double t) {
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0, total = 0;
  for (std::size_t i = k; i < probs.size(); i += n_au) {
    const bool pred = probs[i] >= t, truth = labels[i] == 1;
    tp += pred && truth;
    fp += pred && !truth;
    fn += !pred && truth;
    correct += pred == truth;
    ++total;
  }
  const double f = (2 * tp + fp + fn) == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
  return {f, static_cast<double>(correct) / static_cast<double>(total)};
}

TEST(Metrics, MatchBruteForceRecountOnThousandSets) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 1);
  for (int set = 0; set < 1000; ++set) {
    const std::size_t n_au = 1 + rng() % 6, n = 1 + rng() % 40;
    const double t = 0.2 + 0.6 * u(rng);
    std::vector<double> probs(n * n_au);
    std::vector<int> labels(n * n_au);
    for (auto& p : probs) p = (rng() % 10 == 0) ? t : u(rng);  // exercise the boundary
    for (auto& y : labels) y = u(rng) < 0.3;
    ConfusionCounts c(n_au);
    for (std::size_t i = 0; i < n; ++i) {
      c.update(std::span(probs).subspan(i * n_au, n_au), std::span(labels).subspan(i * n_au, n_au), t);
    }
    for (std::size_t k = 0; k < n_au; ++k) {
      const auto oracle = brute_force(probs, labels, k, n_au, t);
      ASSERT_EQ(f1(c.at(k)), oracle.f1) << "set " << set;
      ASSERT_EQ(accuracy(c.at(k)), oracle.acc) << "set " << set;
      ASSERT_EQ(c.at(k).total(), n);
    }
  }
}

TEST(Metrics, OrderInvariantAndShardMergeable) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  const std::size_t n = 50, n_au = 4;
  std::vector<std::vector<double>> probs(n, std::vector<double>(n_au));
  std::vector<std::vector<int>> labels(n, std::vector<int>(n_au));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n_au; ++k) {
      probs[i][k] = u(rng);
      labels[i][k] = u(rng) < 0.5;
    }
  }
  ConfusionCounts seq(n_au);
  for (std::size_t i = 0; i < n; ++i) seq.update(probs[i], labels[i]);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  ConfusionCounts shuffled(n_au), a(n_au), b(n_au), c(n_au);
  for (std::size_t i : order) shuffled.update(probs[i], labels[i]);
  for (std::size_t i = 0; i < n; ++i) (i % 3 == 0 ? a : i % 3 == 1 ? b : c).update(probs[i], labels[i]);
  c.merge(a);
  c.merge(b);
  EXPECT_EQ(shuffled, seq);
  EXPECT_EQ(c, seq);
  EXPECT_EQ(report(c).to_text(), report(seq).to_text());
}

TEST(Update, BatchedTensorMatchesRows) {
  auto probs = diff::Tensor::from({2, 3}, {0.9, 0.1, 0.5, 0.2, 0.6, 0.4});
  auto labels = diff::Tensor::from({2, 3}, {1, 0, 0, 1, 1, 0});
  ConfusionCounts batched(3), rows(3);
  batched.update(probs, labels);
  rows.update(std::vector<double>{0.9, 0.1, 0.5}, std::vector<int>{1, 0, 0});
  rows.update(std::vector<double>{0.2, 0.6, 0.4}, std::vector<int>{1, 1, 0});
  EXPECT_EQ(batched, rows);
  EXPECT_EQ(batched.samples(), 2u);
}

}  // namespace
}  // namespace aurecon::eval
