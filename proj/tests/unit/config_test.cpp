#include <gtest/gtest.h>

#include <fstream>

#include <abdo/config.hpp>
#include <abdo/error.hpp>

#include "support.hpp"

namespace {

TEST(PipelineConfig, EmptyKeepsDefaults) {
  const auto c = abdo::parse_pipeline_config("");
  const abdo::GenerationConfig g;
  EXPECT_EQ(c.generation.target_shape, g.target_shape);
  EXPECT_DOUBLE_EQ(c.generation.arm_removal_probability, 0.5);
  EXPECT_EQ(c.clustering.k_foreground_choices, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(c.clustering.k_background_choices, (std::vector<int>{3, 4, 5, 6, 7}));
}

TEST(PipelineConfig, OverridesValues) {
  const auto c = abdo::parse_pipeline_config(R"(
[generation]
rotation_range = [-5, 5.5]
target_shape = [64, 64, 32]
target_spacing = 2.0
arm_labels = [4, 5]
arm_removal_probability = 0.25

[clustering]
k_foreground_choices = [2]
background_fit_min = -500.0
seed = 9
)");
  EXPECT_DOUBLE_EQ(c.generation.rotation_range.lo, -5.0);
  EXPECT_DOUBLE_EQ(c.generation.rotation_range.hi, 5.5);
  EXPECT_EQ(c.generation.target_shape, (abdo::Shape{64, 64, 32}));
  EXPECT_DOUBLE_EQ(c.generation.target_spacing, 2.0);
  EXPECT_EQ(c.generation.arm_labels, (std::vector<abdo::Label>{4, 5}));
  EXPECT_DOUBLE_EQ(c.generation.arm_removal_probability, 0.25);
  EXPECT_EQ(c.clustering.k_foreground_choices, (std::vector<int>{2}));
  ASSERT_TRUE(c.clustering.background_fit_min.has_value());
  EXPECT_DOUBLE_EQ(*c.clustering.background_fit_min, -500.0);
  EXPECT_EQ(c.clustering.seed, 9u);
}

TEST(PipelineConfig, Errors) {
  for (const char* text : {
           "[generation]\nrotation_angle = [1, 2]\n",
           "[other]\nx = 1\n",
           "generation = 3\n",
           "[generation]\nrotation_range = [1]\n",
           "[generation]\nrotation_range = [5, -5]\n",
           "[generation]\ndeformation_grid = 2.5\n",
           "[generation]\narm_labels = [-1]\n",
           "[clustering]\nk_foreground_choices = []\n",
           "[clustering]\nem_tolerance = \"small\"\n",
           "[generation\n",
       }) {
    EXPECT_THROW(abdo::parse_pipeline_config(text), abdo::InvalidArgument) << text;
  }
}

TEST(PipelineConfig, ErrorCitesLocation) {
  try {
    abdo::parse_pipeline_config("[generation]\n\nbogus = 1\n");
    FAIL();
  } catch (const abdo::InvalidArgument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("bogus"), std::string::npos);
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  }
}

TEST(PipelineConfig, LoadFromFile) {
  testing_support::TempDir dir("config");
  std::ofstream(dir / "c.toml") << "[generation]\nnoise_std_max = 0.01\n";
  EXPECT_DOUBLE_EQ(abdo::load_pipeline_config(dir / "c.toml").generation.noise_std_max, 0.01);
  EXPECT_THROW(abdo::load_pipeline_config(dir / "missing.toml"), abdo::IoError);
}

}  // namespace
