#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "oracles.hpp"
#include "wi/config.hpp"
#include "wi/error.hpp"
#include "wi/pca.hpp"
#include "wi/pipeline.hpp"
#include "wi/retrieval.hpp"

using namespace wi;

namespace {

EmbeddingMatrix matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return EmbeddingMatrix{rows, cols, std::move(data), ""};
}

EmbeddingMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& gen) {
  return matrix(rows, cols, test::random_vector(rows * cols, gen));
}

/// Distance matrix from an explicit ranking of each row.
DistanceMatrix from_rows(const std::vector<std::vector<double>>& d) {
  DistanceMatrix m{d.size(), {}};
  for (const auto& r : d) m.values.insert(m.values.end(), r.begin(), r.end());
  return m;
}

}  // namespace

TEST(MeanPool, IdenticalRows) {
  const auto f = mean_pool(matrix(3, 2, {0.5, -1, 0.5, -1, 0.5, -1}));
  EXPECT_EQ(f.values, (std::vector<double>{0.5, -1}));
}

TEST(MeanPool, TwoRows) {
  EXPECT_EQ(mean_pool(matrix(2, 2, {0, 2, 2, 0})).values, (std::vector<double>{1, 1}));
}

TEST(MeanPool, MatchesLoop) {
  std::mt19937_64 gen(1);
  for (int t = 0; t < 20; ++t) {
    const auto m = random_matrix(1 + gen() % 30, 1 + gen() % 10, gen);
    const auto f = mean_pool(m);
    for (std::size_t c = 0; c < m.cols; ++c) {
      double s = 0;
      for (std::size_t r = 0; r < m.rows; ++r) s += m.data[r * m.cols + c];
      EXPECT_NEAR(f.values[c], s / m.rows, 1e-12);
    }
  }
}

TEST(MeanPool, EmptyIsError) { EXPECT_THROW(mean_pool(matrix(0, 3, {})), DataError); }

TEST(Pca, LineYEqualsX) {
  std::vector<double> d;
  for (int i = 0; i < 20; ++i) d.insert(d.end(), {0.3 * i - 1, 0.3 * i - 1});
  const PcaModel m = pca_fit(matrix(20, 2, d), 2);
  EXPECT_GE(m.explained_ratio[0], 0.99999);
  EXPECT_NEAR(m.components[0], 1 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(m.components[1], 1 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(m.explained_variance[1], 0.0, 1e-12);
}

TEST(Pca, FullDimensionPreservesDistances) {
  std::mt19937_64 gen(2);
  const auto data = random_matrix(40, 6, gen);
  const auto proj = pca_project(pca_fit(data, 6), data);
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = i + 1; j < 40; ++j) {
      double a = 0, b = 0;
      for (std::size_t k = 0; k < 6; ++k) {
        a += std::pow(data.data[i * 6 + k] - data.data[j * 6 + k], 2);
        b += std::pow(proj.data[i * 6 + k] - proj.data[j * 6 + k], 2);
      }
      EXPECT_NEAR(std::sqrt(a), std::sqrt(b), 1e-8);
    }
}

TEST(Pca, ComponentsOrthonormalAndSorted) {
  std::mt19937_64 gen(3);
  const auto data = random_matrix(30, 8, gen);
  const PcaModel m = pca_fit(data, 5);
  for (std::size_t a = 0; a < 5; ++a) {
    double largest = 0;
    for (std::size_t k = 0; k < 8; ++k)
      if (std::abs(m.components[a * 8 + k]) > std::abs(largest)) largest = m.components[a * 8 + k];
    EXPECT_GT(largest, 0.0);
    for (std::size_t b = 0; b < 5; ++b) {
      double d = 0;
      for (std::size_t k = 0; k < 8; ++k) d += m.components[a * 8 + k] * m.components[b * 8 + k];
      EXPECT_NEAR(d, a == b ? 1.0 : 0.0, 1e-10);
    }
    if (a > 0) EXPECT_GE(m.explained_variance[a - 1], m.explained_variance[a]);
  }
}

TEST(Pca, ConstantDataset) {
  const PcaModel m = pca_fit(matrix(5, 3, std::vector<double>(15, 0.7)), 2);
  for (double v : m.explained_variance) EXPECT_EQ(v, 0.0);
  for (double v : pca_project(m, matrix(5, 3, std::vector<double>(15, 0.7))).data) EXPECT_EQ(v, 0.0);
}

TEST(Pca, TooManyDimsIsError) {
  std::mt19937_64 gen(4);
  EXPECT_THROW(pca_fit(random_matrix(4, 10, gen), 4), ConfigError);
  EXPECT_THROW(pca_fit(random_matrix(40, 3, gen), 4), ConfigError);
  EXPECT_THROW(pca_fit(random_matrix(1, 3, gen), 1), DataError);
}

TEST(SymmetricEigen, ReconstructsMatrix) {
  std::mt19937_64 gen(5);
  const std::size_t n = 7;
  auto r = test::random_vector(n * n, gen);
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = r[i * n + j] + r[j * n + i];
  std::vector<double> vals, vecs;
  symmetric_eigen(a, n, vals, vecs);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < n; ++k) s += vecs[k * n + i] * vals[k] * vecs[k * n + j];
      EXPECT_NEAR(s, a[i * n + j], 1e-10);
    }
}

TEST(DistanceMatrix, DuplicatesAndSymmetry) {
  std::mt19937_64 gen(6);
  std::vector<FeatureVector> docs;
  for (int i = 0; i < 5; ++i) docs.push_back({test::random_vector(4, gen)});
  docs.push_back(docs[2]);
  for (auto metric : {DistanceMetric::euclidean, DistanceMetric::cosine}) {
    const auto d = distance_matrix(docs, metric);
    EXPECT_EQ(d.at(2, 5), 0.0);
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_EQ(d.at(i, i), 0.0);
      for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(d.at(i, j), d.at(j, i));
    }
  }
}

TEST(DistanceMatrix, OrthogonalCosineIsOne) {
  const auto d = distance_matrix({{{1, 0, 0}}, {{0, 2, 0}}}, DistanceMetric::cosine);
  EXPECT_NEAR(d.at(0, 1), 1.0, 1e-15);
}

TEST(DistanceMatrix, MatchesPairwiseLoop) {
  std::mt19937_64 gen(7);
  std::vector<FeatureVector> docs;
  for (int i = 0; i < 12; ++i) docs.push_back({test::random_vector(9, gen)});
  const auto de = distance_matrix(docs, DistanceMetric::euclidean);
  const auto dc = distance_matrix(docs, DistanceMetric::cosine);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 12; ++j) {
      double s = 0, ab = 0, aa = 0, bb = 0;
      for (std::size_t k = 0; k < 9; ++k) {
        const double a = docs[i].values[k], b = docs[j].values[k];
        s += (a - b) * (a - b);
        ab += a * b, aa += a * a, bb += b * b;
      }
      EXPECT_NEAR(de.at(i, j), std::sqrt(s), 1e-12);
      if (i != j) EXPECT_NEAR(dc.at(i, j), 1 - ab / std::sqrt(aa * bb), 1e-12);
    }
}

TEST(DistanceMatrix, Errors) {
  EXPECT_THROW(distance_matrix({{{0, 0}}, {{1, 0}}}, DistanceMetric::cosine), NumericError);
  EXPECT_THROW(distance_matrix({{{1, 0}}}, DistanceMetric::euclidean), DataError);
  EXPECT_THROW(distance_matrix({{{1, 0}}, {{1}}}, DistanceMetric::euclidean), DataError);
}

TEST(Retrieval, RelevantAtRanksOneAndThree) {
  // Query 0 of writer a; the other a documents sit at ranks 1 and 3.
  const auto d = from_rows({{0, 1, 2, 3, 4},
                            {1, 0, 1, 1, 1},
                            {2, 1, 0, 1, 1},
                            {3, 1, 1, 0, 1},
                            {4, 1, 1, 1, 0}});
  const auto rep = leave_one_out_retrieval(d, {"a", "a", "b", "a", "c"});
  EXPECT_NEAR(rep.average_precision[0], 5.0 / 6.0, 1e-15);
  const auto brute = test::brute_retrieval({{0, 1, 2, 3, 4}, {1, 0, 1, 1, 1}, {2, 1, 0, 1, 1}, {3, 1, 1, 0, 1},
                                            {4, 1, 1, 1, 0}},
                                           {"a", "a", "b", "a", "c"});
  EXPECT_EQ(brute.p_at_2[0], 0.5);
  EXPECT_TRUE(rep.excluded[2]);
  EXPECT_TRUE(rep.excluded[4]);
  EXPECT_EQ(rep.evaluated_queries, 3u);
}

TEST(Retrieval, PerfectRanking) {
  std::vector<std::vector<double>> rows(6, std::vector<double>(6, 10.0));
  const std::vector<std::string> labels{"a", "a", "a", "b", "b", "b"};
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      if (i == j) rows[i][j] = 0;
      else if (labels[i] == labels[j]) rows[i][j] = 1;
  const auto rep = leave_one_out_retrieval(from_rows(rows), labels);
  EXPECT_EQ(rep.top1(), 1.0);
  EXPECT_EQ(rep.precision_at.at(2), 1.0);
  EXPECT_EQ(rep.mean_average_precision, 1.0);
}

TEST(Retrieval, OnlyMatchSecondOfFive) {
  std::vector<std::vector<double>> rows(6, std::vector<double>(6, 5.0));
  for (int i = 0; i < 6; ++i) rows[i][i] = 0;
  rows[0] = {0, 2, 1, 3, 4, 5};
  rows[1] = {2, 0, 1, 3, 4, 5};
  for (int j = 2; j < 6; ++j) rows[j][0] = rows[0][j], rows[j][1] = rows[1][j];
  const auto rep = leave_one_out_retrieval(from_rows(rows), {"q", "q", "x", "y", "z", "w"});
  EXPECT_EQ(rep.rankings[0], (std::vector<std::size_t>{2, 1, 3, 4, 5}));
  EXPECT_EQ(rep.evaluated_queries, 2u);
  EXPECT_EQ(rep.top1(), 0.0);
  EXPECT_EQ(rep.top_k.at(5), 1.0);
  EXPECT_EQ(rep.average_precision[0], 0.5);
  EXPECT_EQ(rep.mean_average_precision, 0.5);
}

TEST(Retrieval, MatchesBruteForceOracle) {
  std::mt19937_64 gen(8);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 2 + gen() % 12;
    const int writers = 1 + static_cast<int>(gen() % 5);
    const bool ties = t % 3 == 0;
    std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = ties ? static_cast<double>(gen() % 4) : std::uniform_real_distribution<double>(0, 1)(gen);
        rows[i][j] = rows[j][i] = v;
      }
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(gen() % writers));
    const auto rep = leave_one_out_retrieval(from_rows(rows), labels);
    const auto brute = test::brute_retrieval(rows, labels);
    for (std::size_t q = 0; q < n; ++q) {
      ASSERT_EQ(rep.excluded[q], brute.excluded[q]);
      ASSERT_NEAR(rep.average_precision[q], brute.ap[q], 1e-12);
    }
    ASSERT_NEAR(rep.top1(), brute.top1, 1e-12) << t;
    ASSERT_NEAR(rep.top_k.at(5), brute.top5, 1e-12) << t;
    ASSERT_NEAR(rep.precision_at.at(2), brute.p2, 1e-12) << t;
    ASSERT_NEAR(rep.mean_average_precision, brute.map, 1e-12) << t;
  }
}

TEST(EvaluateEmbeddings, DuplicateDocumentsArePerfect) {
  std::mt19937_64 gen(9);
  std::vector<EmbeddingMatrix> docs;
  std::vector<std::string> labels;
  for (int w = 0; w < 4; ++w) {
    const auto m = random_matrix(5, 3, gen);
    docs.push_back(m);
    docs.push_back(m);
    labels.insert(labels.end(), 2, "w" + std::to_string(w));
  }
  const auto ev = evaluate_embeddings(docs, labels, PostprocConfig{}, 0);
  EXPECT_EQ(ev.retrieval.top1(), 1.0);
  EXPECT_EQ(ev.retrieval.mean_average_precision, 1.0);
}

TEST(EvaluateEmbeddings, FullDimensionPcaKeepsTopOne) {
  std::mt19937_64 gen(10);
  std::vector<EmbeddingMatrix> docs;
  std::vector<std::string> labels;
  for (int i = 0; i < 12; ++i) {
    docs.push_back(random_matrix(6, 4, gen));
    labels.push_back("w" + std::to_string(i % 4));
  }
  const auto plain = evaluate_embeddings(docs, labels, PostprocConfig{}, 0);
  const auto pca = evaluate_embeddings(docs, labels, PostprocConfig{}, 4);
  EXPECT_EQ(plain.retrieval.top1(), pca.retrieval.top1());
  EXPECT_EQ(plain.retrieval.rankings, pca.retrieval.rankings);
  ASSERT_TRUE(pca.pca.has_value());
  EXPECT_EQ(pca.pca_dims, 4u);
}

TEST(Report, EchoesConfigAndMetrics) {
  std::mt19937_64 gen(11);
  std::vector<EmbeddingMatrix> docs;
  std::vector<std::string> labels;
  for (int i = 0; i < 6; ++i) {
    docs.push_back(random_matrix(3, 4, gen));
    docs.back().document_id = "d" + std::to_string(i);
    labels.push_back("w" + std::to_string(i % 3));
  }
  PipelineConfig cfg;
  cfg.seed = 99;
  const auto ev = evaluate_embeddings(docs, labels, cfg.postproc, 0);
  const auto j = nlohmann::json::parse(report_to_json(ev, cfg));
  EXPECT_EQ(j.at("config"), nlohmann::json::parse(config_to_json(cfg)));
  EXPECT_EQ(j.at("config_hash"), config_hash(cfg));
  EXPECT_EQ(j.at("metrics").at("top1").get<double>(), ev.retrieval.top1());
  EXPECT_EQ(j.at("queries").size(), 6u);
  int histogram_total = 0;
  for (int c : j.at("ap_histogram").at("counts")) histogram_total += c;
  EXPECT_EQ(histogram_total, static_cast<int>(ev.retrieval.evaluated_queries));
  EXPECT_EQ(report_to_json(ev, cfg), report_to_json(ev, cfg));
  const std::string csv = summary_csv(ev, cfg);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "config_hash,top1,top5,p@2,map");
}
