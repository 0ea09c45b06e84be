#include <gtest/gtest.h>

#include <map>
#include <random>

#include <abdo/clustering.hpp>
#include <abdo/error.hpp>

#include "support.hpp"

namespace {

using abdo::ClusteringConfig;
using abdo::Geometry;
using abdo::LabelMap;
using abdo::ScalarVolume;

struct Scene {
  LabelMap labels;
  ScalarVolume ct;
};

// Background plus `n_fg` slab labels, each with a few intensity plateaus.
Scene make_scene(int n_fg, std::uint64_t seed, abdo::Shape shape = {16, 12, 10}) {
  Scene s{LabelMap(Geometry(shape, {1.5, 1.5, 2.0}), 0), ScalarVolume(Geometry(shape, {1.5, 1.5, 2.0}), 0.0f)};
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> jitter(0.0f, 2.0f);
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    const auto c = s.labels.coordinates(i);
    const auto label = static_cast<abdo::Label>(c[0] * (n_fg + 1) / shape[0]);
    s.labels[i] = label;
    const float plateau = static_cast<float>(100 * label + 30 * ((c[1] + c[2]) % 3));
    s.ct[i] = plateau + jitter(rng);
  }
  return s;
}

void expect_partition(const LabelMap& labels, const abdo::ClusteredLabels& c) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto parent = c.table.parent_of(c.fine[i]);
    ASSERT_TRUE(parent.has_value()) << "fine id " << c.fine[i];
    ASSERT_EQ(*parent, labels[i]);
  }
}

TEST(ClusteringConfig, Validation) {
  ClusteringConfig c;
  EXPECT_NO_THROW(c.validate());
  c.k_foreground_choices = {};
  EXPECT_THROW(c.validate(), abdo::InvalidArgument);
  c.k_foreground_choices = {1, 1};
  EXPECT_THROW(c.validate(), abdo::InvalidArgument);
  c.k_foreground_choices = {0};
  EXPECT_THROW(c.validate(), abdo::InvalidArgument);
  c = ClusteringConfig{};
  c.em_tolerance = 0;
  EXPECT_THROW(c.validate(), abdo::InvalidArgument);
  c = ClusteringConfig{};
  c.em_max_iters = 0;
  EXPECT_THROW(c.validate(), abdo::InvalidArgument);
}

TEST(Clustering, UniformIntensityK1IsRelabeling) {
  LabelMap labels(Geometry({6, 6, 6}), 0);
  ScalarVolume ct(labels.geometry(), 40.0f);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels.coordinates(i)[0] >= 3) labels[i] = 5;
  }
  ClusteringConfig cfg;
  cfg.k_foreground_choices = {1};
  cfg.k_background_choices = {1};
  const auto c = abdo::cluster_labelmap(ct, labels, cfg, 1);
  ASSERT_EQ(c.table.fine_label_count(), 2u);
  for (std::size_t i = 0; i < labels.size(); ++i) EXPECT_EQ(c.fine[i], labels[i] == 5 ? 2u : 1u);
}

TEST(Clustering, TwoPlateausSplitExactly) {
  LabelMap labels(Geometry({20, 10, 10}), 3);
  ScalarVolume ct(labels.geometry(), 0.0f);
  std::mt19937_64 rng(4);
  std::normal_distribution<float> noise(0.0f, 3.0f);
  for (std::size_t i = 0; i < ct.size(); ++i) ct[i] = (labels.coordinates(i)[0] < 8 ? 60.0f : 140.0f) + noise(rng);
  ClusteringConfig cfg;
  cfg.k_foreground_choices = {2};
  const auto c = abdo::cluster_labelmap(ct, labels, cfg, 9);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < ct.size(); ++i) {
    const bool low_plateau = labels.coordinates(i)[0] < 8;
    agree += (c.fine[i] == 1u) == low_plateau;
  }
  EXPECT_GE(static_cast<double>(agree) / static_cast<double>(ct.size()), 0.99);
}

TEST(Clustering, KReducedToVoxelCount) {
  LabelMap labels(Geometry({4, 4, 4}), 0);
  labels[0] = 2;
  labels[1] = 2;
  ScalarVolume ct(labels.geometry(), 0.0f);
  for (std::size_t i = 0; i < ct.size(); ++i) ct[i] = static_cast<float>(i);
  ClusteringConfig cfg;
  cfg.k_foreground_choices = {3};
  cfg.k_background_choices = {3};
  const auto c = abdo::cluster_labelmap(ct, labels, cfg, 0);
  EXPECT_EQ(c.table.parents.at(2).requested_k, 3);
  EXPECT_EQ(c.table.parents.at(2).k, 2);
  EXPECT_EQ(c.table.parents.at(2).fine.size(), 2u);
  expect_partition(labels, c);
}

TEST(Clustering, GeometryMismatch) {
  LabelMap labels(Geometry({4, 4, 4}), 0);
  ScalarVolume ct(Geometry({4, 4, 5}), 0.0f);
  EXPECT_THROW(abdo::cluster_labelmap(ct, labels, {}, 0), abdo::GeometryMismatch);
}

TEST(Clustering, SameSeedBitwiseIdentical) {
  const Scene s = make_scene(3, 1);
  const auto a = abdo::cluster_labelmap(s.ct, s.labels, {}, 42);
  const auto b = abdo::cluster_labelmap(s.ct, s.labels, {}, 42);
  EXPECT_EQ(a.fine, b.fine);
  EXPECT_EQ(abdo::cluster_table_to_json(a.table), abdo::cluster_table_to_json(b.table));
}

TEST(ClusteringProperty, FineLabelsPartitionParents) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene s = make_scene(1 + static_cast<int>(seed % 4), seed);
    const auto c = abdo::cluster_labelmap(s.ct, s.labels, {}, seed * 31);
    expect_partition(s.labels, c);
    std::size_t total = 0;
    for (const auto& [label, p] : c.table.parents) total += static_cast<std::size_t>(p.k);
    EXPECT_EQ(c.table.fine_label_count(), total);
  }
}

TEST(ClusterCache, DrawReproducesDirectClustering) {
  const Scene s = make_scene(3, 2);
  const auto cache = abdo::precompute_clusters(s.ct, s.labels, {});
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL, 123456789ULL}) {
    const auto direct = abdo::cluster_labelmap(s.ct, s.labels, {}, seed);
    const auto drawn = cache.draw(s.labels, seed);
    EXPECT_EQ(direct.fine, drawn.fine) << seed;
    EXPECT_EQ(abdo::cluster_table_to_json(direct.table), abdo::cluster_table_to_json(drawn.table));
  }
}

TEST(ClusterCache, KDrawsFollowChoiceSetsUniformly) {
  const Scene s = make_scene(5, 3);
  const auto cache = abdo::precompute_clusters(s.ct, s.labels, {});
  std::map<int, int> fg, bg;
  int fg_total = 0;
  for (std::uint64_t draw = 0; draw < 1000; ++draw) {
    const auto c = cache.draw(s.labels, draw);
    for (const auto& [label, p] : c.table.parents) {
      if (label == 0) {
        ++bg[p.requested_k];
      } else {
        ++fg[p.requested_k];
        ++fg_total;
      }
    }
  }
  for (const auto& [k, n] : fg) EXPECT_TRUE(k >= 1 && k <= 3) << k;
  for (const auto& [k, n] : bg) EXPECT_TRUE(k >= 3 && k <= 7) << k;
  ASSERT_EQ(fg.size(), 3u);
  ASSERT_EQ(bg.size(), 5u);
  for (const auto& [k, n] : fg) EXPECT_NEAR(static_cast<double>(n) / fg_total, 1.0 / 3, 0.03) << k;
  for (const auto& [k, n] : bg) EXPECT_NEAR(n / 1000.0, 0.2, 0.03) << k;
}

TEST(ClusterCache, SaveLoadRoundTrip) {
  testing_support::TempDir dir("cache");
  const Scene s = make_scene(2, 5);
  const auto cache = abdo::precompute_clusters(s.ct, s.labels, {});
  abdo::save_cluster_cache(cache, dir / "subject");
  EXPECT_TRUE(std::filesystem::exists(dir / "subject.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "subject_codes.nii.gz"));
  const auto loaded = abdo::load_cluster_cache(dir / "subject");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EXPECT_EQ(cache.draw(s.labels, seed).fine, loaded.draw(s.labels, seed).fine);
  }
}

TEST(ClusterTable, JsonRoundTrip) {
  const Scene s = make_scene(2, 6);
  const auto c = abdo::cluster_labelmap(s.ct, s.labels, {}, 3);
  const std::string text = abdo::cluster_table_to_json(c.table);
  const auto back = abdo::cluster_table_from_json(text);
  EXPECT_EQ(abdo::cluster_table_to_json(back), text);
  ASSERT_EQ(back.parents.size(), c.table.parents.size());
  for (const auto& [label, p] : c.table.parents) {
    const auto& q = back.parents.at(label);
    ASSERT_EQ(q.fine.size(), p.fine.size());
    for (std::size_t i = 0; i < p.fine.size(); ++i) {
      EXPECT_EQ(q.fine[i].id, p.fine[i].id);
      EXPECT_EQ(q.fine[i].component.mean, p.fine[i].component.mean);
      EXPECT_EQ(q.fine[i].component.variance, p.fine[i].component.variance);
      EXPECT_EQ(q.fine[i].component.weight, p.fine[i].component.weight);
    }
  }
  EXPECT_THROW(abdo::cluster_table_from_json("{not json"), abdo::ParseError);
}

}  // namespace
