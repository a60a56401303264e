#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ruad/baselines.hpp"
#include "ruad/error.hpp"
#include "support.hpp"

using namespace ruad;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = rows[i][j];
  return m;
}

// Per-point silhouette written straight from the definition.
double silhouette_oracle(const Matrix& x, const std::vector<int>& c) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    std::map<int, std::pair<double, int>> acc;
    for (std::size_t j = 0; j < x.rows; ++j) {
      if (i == j) continue;
      double d = 0;
      for (std::size_t f = 0; f < x.cols; ++f) d += (x(i, f) - x(j, f)) * (x(i, f) - x(j, f));
      acc[c[j]].first += std::sqrt(d);
      acc[c[j]].second += 1;
    }
    if (acc.find(c[i]) == acc.end()) continue;  // singleton
    const double a = acc[c[i]].first / acc[c[i]].second;
    double b = std::numeric_limits<double>::infinity();
    for (auto& [id, s] : acc)
      if (id != c[i]) b = std::min(b, s.first / s.second);
    const double m = std::max(a, b);
    total += m > 0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(x.rows);
}

double wcss_of(const Matrix& x, const std::vector<int>& c, std::size_t k) {
  std::vector<std::vector<double>> sum(k, std::vector<double>(x.cols, 0.0));
  std::vector<int> n(k, 0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    n[c[i]] += 1;
    for (std::size_t f = 0; f < x.cols; ++f) sum[c[i]][f] += x(i, f);
  }
  double w = 0;
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t f = 0; f < x.cols; ++f) {
      const double d = x(i, f) - sum[c[i]][f] / n[c[i]];
      w += d * d;
    }
  return w;
}

Matrix blobs(const std::vector<std::vector<double>>& centers, std::size_t per, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, spread);
  Matrix m(centers.size() * per, centers[0].size());
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (std::size_t i = 0; i < per; ++i)
      for (std::size_t f = 0; f < m.cols; ++f) m(c * per + i, f) = centers[c][f] + g(rng);
  return m;
}

}  // namespace

TEST_CASE("exponential smoothing") {
  auto constant = test::make_dataset({0, 900, 1800}, {0, 0, 0}, {{1, 1}, {1, 1}, {1, 1}});
  for (const auto& e : exp_smoothing_scores(constant, {}).entries) CHECK(e.probability == 0.0);

  // alpha = 1 collapses the estimate to the previous value.
  auto d = test::make_dataset({0, 900, 1800, 2700}, {0, 1, 0, 0}, {{0.0}, {0.5}, {0.1}, {0.9}});
  auto s = exp_smoothing_scores(d, {1.0});
  REQUIRE(s.entries.size() == 4);
  CHECK(s.entries[0].probability == 0.0);
  CHECK(s.entries[1].probability == doctest::Approx(0.5 / 0.8));
  CHECK(s.entries[2].probability == doctest::Approx(0.4 / 0.8));
  CHECK(s.entries[3].probability == 1.0);
  CHECK(s.entries[1].label == 1);

  // Hand recursion with alpha 0.1 on [0, 1, 0.5]: estimates 0 then 0.1.
  auto h = test::make_dataset({0, 900, 1800}, {0, 0, 0}, {{0.0}, {1.0}, {0.5}});
  s = exp_smoothing_scores(h, {0.1});
  CHECK(s.entries[1].probability == 1.0);
  CHECK(s.entries[2].probability == doctest::Approx(0.4).epsilon(1e-14));

  // A gap restarts the estimate and the first point of the new segment scores 0.
  auto g = test::make_dataset({0, 900, 9000, 9900}, {0, 0, 0, 0}, {{0.0}, {1.0}, {5.0}, {5.5}});
  s = exp_smoothing_scores(g, {0.1});
  CHECK(s.entries[2].probability == 0.0);
  CHECK(s.entries[1].probability == 1.0);
  CHECK(s.entries[3].probability == doctest::Approx(0.5));

  CHECK(exp_smoothing_scores(NodeDataset{}, {}).entries.empty());
  CHECK_THROWS_AS(exp_smoothing_scores(d, {0.0}), ConfigError);
}

TEST_CASE("silhouette") {
  const auto x = from_rows({{0.0}, {0.1}, {10.0}, {10.1}});
  const std::vector<int> c{0, 0, 1, 1};
  // Per point: (10.05 - 0.1) / 10.05 for the outer points and (9.95 - 0.1) / 9.95 for the inner ones.
  const double frozen = 0.98999974999374980;
  CHECK(silhouette(x, c) == doctest::Approx(frozen).epsilon(1e-14));
  CHECK(silhouette_oracle(x, c) == doctest::Approx(frozen).epsilon(1e-14));

  const auto dup = from_rows({{0.0}, {0.0}, {5.0}, {5.0}});
  CHECK(silhouette(dup, c) == 1.0);
  const auto same = from_rows({{2.0}, {2.0}, {2.0}, {2.0}});
  CHECK(silhouette(same, c) == 0.0);
  CHECK_THROWS_AS(silhouette(x, std::vector<int>{0, 0, 0, 0}), DataError);

  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 40; ++rep) {
    Matrix m(5 + rng() % 30, 3);
    for (auto& v : m.data) v = u(rng);
    std::vector<int> a(m.rows);
    for (auto& v : a) v = static_cast<int>(rng() % 4);
    a[0] = 0;
    a[1] = 1;
    const double s = silhouette(m, a);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
    CHECK(s == doctest::Approx(silhouette_oracle(m, a)).epsilon(1e-12));
    std::vector<int> p(a);
    for (auto& v : p) v = 3 - v;
    CHECK(silhouette(m, p) == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("k-means against exhaustive 2-partitions") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const auto x = blobs({{0.0}, {4.0}}, 4 + rep % 2, 0.5, rng());
    const std::size_t n = x.rows;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << n); ++mask) {
      std::vector<int> c(n);
      for (std::size_t i = 0; i < n; ++i) c[i] = (mask >> i) & 1;
      best = std::min(best, wcss_of(x, c, 2));
    }
    const auto fit = kmeans_fit(x, 2, {10, 300, rng()});
    CHECK(fit.wcss == doctest::Approx(best).epsilon(1e-10));
    for (std::size_t i = 1; i < fit.wcss_trace.size(); ++i) CHECK(fit.wcss_trace[i] <= fit.wcss_trace[i - 1] + 1e-12);
  }
}

TEST_CASE("k-means edge cases") {
  const auto x = from_rows({{1, 2}, {3, 4}, {5, 9}});
  const auto one = kmeans_fit(x, 1, {});
  CHECK(one.centroids(0, 0) == doctest::Approx(3.0));
  CHECK(one.centroids(0, 1) == doctest::Approx(5.0));

  const auto dup = from_rows({{0}, {0}, {0}, {1}, {1}, {7}, {7}, {7}});
  CHECK(distinct_rows(dup) == 3);
  CHECK(kmeans_fit(dup, 3, {}).wcss == 0.0);
  CHECK_THROWS_AS(kmeans_fit(dup, 4, {}), DataError);

  const auto b = blobs({{0, 0}, {3, 3}, {0, 4}}, 30, 0.3, 5);
  const auto f1 = kmeans_fit(b, 3, {10, 300, 99});
  const auto f2 = kmeans_fit(b, 3, {10, 300, 99});
  CHECK(f1.centroids.data == f2.centroids.data);
  CHECK(f1.assignment == f2.assignment);
}

TEST_CASE("k selection by silhouette") {
  const auto two = blobs({{0, 0}, {5, 5}}, 40, 0.3, 1);
  CHECK(select_k(two, 2, 5, {10, 300, 1}).k == 2);
  const auto three = blobs({{0, 0}, {5, 5}, {0, 6}}, 40, 0.3, 2);
  const auto r = select_k(three, 2, 6, {10, 300, 2});
  CHECK(r.k == 3);
  for (const auto& [k, s] : r.silhouettes) CHECK(s <= r.silhouettes[1].second);

  // Two distinct values only: k=2 is the only feasible choice.
  const auto dup = from_rows({{0}, {0}, {1}, {1}});
  CHECK(select_k(dup, 2, 10, {}).k == 2);
  CHECK_THROWS_AS(select_k(from_rows({{1}, {1}}), 2, 5, {}), DataError);

  // Large inputs are subsampled; the result stays deterministic.
  const auto big = blobs({{0, 0}, {5, 5}}, 1500, 0.3, 3);
  const auto a = select_k(big, 2, 3, {2, 100, 7}, 500);
  const auto c = select_k(big, 2, 3, {2, 100, 7}, 500);
  CHECK(a.k == 2);
  CHECK(a.silhouettes == c.silhouettes);
}

TEST_CASE("cluster anomaly probabilities and scoring") {
  const std::vector<int> assign{0, 0, 0, 0, 1, 2};
  const std::vector<int> labels{0, 0, 1, 1, 0, 1};
  const auto p = cluster_anomaly_probabilities(assign, labels, 4);
  CHECK(p == std::vector<double>{0.5, 0.0, 1.0, 0.0});
  const auto zero = cluster_anomaly_probabilities(assign, std::vector<int>(6, 0), 3);
  CHECK(zero == std::vector<double>{0, 0, 0});

  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<int> a(100), l(100);
    double rate = 0;
    for (int i = 0; i < 100; ++i) {
      a[i] = static_cast<int>(rng() % 5);
      l[i] = rng() % 7 == 0;
      rate += l[i];
    }
    const auto q = cluster_anomaly_probabilities(a, l, 5);
    double weighted = 0;
    for (int c = 0; c < 5; ++c) weighted += q[c] * static_cast<double>(std::count(a.begin(), a.end(), c));
    CHECK(weighted == doctest::Approx(rate));
  }

  KMeansModel m;
  m.k = 3;
  m.centroids = from_rows({{0, 0}, {2, 0}, {10, 10}});
  m.cluster_anomaly_prob = {0.2, 0.7, 0.9};
  CHECK(kmeans_score(m, std::vector<double>{0, 0}) == 0.2);
  CHECK(kmeans_score(m, std::vector<double>{1, 0}) == 0.2);
  CHECK(kmeans_score(m, std::vector<double>{1.5, 0}) == 0.7);
  CHECK(kmeans_score(m, std::vector<double>{100, -200}) == 0.7);  // 222.7 vs 223.6 and 228.5
  CHECK(kmeans_score(m, std::vector<double>{40, 40}) == 0.9);
  for (int rep = 0; rep < 100; ++rep) {
    const std::vector<double> r{static_cast<double>(rng() % 40) - 20, static_cast<double>(rng() % 40) - 20};
    const double s = kmeans_score(m, r);
    CHECK((s == 0.2 || s == 0.7 || s == 0.9));
  }

  nlohmann::json j = m;
  const auto back = j.get<KMeansModel>();
  CHECK(back.centroids.data == m.centroids.data);
  CHECK(back.cluster_anomaly_prob == m.cluster_anomaly_prob);
}

TEST_CASE("dummy scores") {
  CHECK(dummy_scores(0, 1).empty());
  CHECK(dummy_scores(50, 4) == dummy_scores(50, 4));
  std::mt19937_64 rng(23);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto s = dummy_scores(2000, rng());
    std::vector<int> y(s.size());
    for (auto& v : y) v = static_cast<int>(rng() % 2);
    worst = std::max(worst, std::abs(test::mann_whitney(s, y) - 0.5));
    for (double v : s) CHECK((v >= 0.0 && v <= 1.0));
  }
  CHECK(worst < 0.05);
}
