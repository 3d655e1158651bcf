#include <gtest/gtest.h>

#include "test_support.hpp"

namespace sandro {
namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

boost::property_tree::ptree ini(const std::string& text) {
  std::istringstream is(text);
  boost::property_tree::ptree tree;
  boost::property_tree::ini_parser::read_ini(is, tree);
  return tree;
}

TEST(RunConfig, DefaultsAndDerivedRadii) {
  const RunConfig c;
  EXPECT_DOUBLE_EQ(c.voxel, 0.05);
  EXPECT_DOUBLE_EQ(c.effective_normal_radius(), 0.1);
  EXPECT_DOUBLE_EQ(c.effective_feature_radius(), 0.25);
  EXPECT_EQ(c.split.num_splits, 4);
  EXPECT_FALSE(c.gnc.alpha0.has_value());
  EXPECT_DOUBLE_EQ(c.thresholds.rotation_deg, 10.0);
  EXPECT_DOUBLE_EQ(c.thresholds.translation_m, 1.0);
}

TEST(RunConfig, SetParsesEveryKey) {
  RunConfig c;
  c.set("voxel", "0.02");
  c.set("alpha0", "0.5");
  c.set("beta", "0.8");
  c.set("max_iters", "50");
  c.set("splits", "2");
  c.set("scheme", "spatial");
  c.set("selection", "full");
  c.set("seed", "9");
  EXPECT_DOUBLE_EQ(c.voxel, 0.02);
  EXPECT_DOUBLE_EQ(*c.gnc.alpha0, 0.5);
  EXPECT_EQ(c.split.scheme, PartitionScheme::kSpatial);
  EXPECT_EQ(c.split.selection, SelectionScope::kFullSetLoss);
  EXPECT_EQ(c.split.seed, 9u);
  c.set("alpha0", "auto");
  EXPECT_FALSE(c.gnc.alpha0.has_value());
  const nlohmann::json j = c.to_json();
  EXPECT_EQ(j["scheme"], "spatial");
  EXPECT_EQ(j["splits"], 2);
}

TEST(RunConfig, ErrorsNameTheField) {
  RunConfig c;
  EXPECT_NE(message_of([&] { c.set("beta", "fast"); }).find("'beta'"), std::string::npos);
  EXPECT_NE(message_of([&] { c.set("max_iters", "1.5"); }).find("'max_iters'"), std::string::npos);
  EXPECT_NE(message_of([&] { c.set("colour", "red"); }).find("'colour'"), std::string::npos);
  c.set("beta", "1.5");
  EXPECT_THROW(c.validate(), Error);
}

TEST(RunConfig, FromFile) {
  testing::TempDir dir("cfg");
  atomic_write(dir / "run.ini", "# comment\nvoxel = 0.03\nsplits = 1\nscheme = shuffled\n");
  const RunConfig c = RunConfig::from_file(dir / "run.ini");
  EXPECT_DOUBLE_EQ(c.voxel, 0.03);
  EXPECT_EQ(c.split.num_splits, 1);
  atomic_write(dir / "bad.ini", "voxel = 0.03\n[section]\nsplits = 1\n");
  EXPECT_THROW(RunConfig::from_file(dir / "bad.ini"), Error);
}

TEST(CampaignConfig, ParsesScenariosAndMethods) {
  const auto c = CampaignConfig::from_tree(ini(
      "rates = 0.2, 0.5\ntrials = 3\nseed = 4\ndecoy_fraction = 0.1\n"
      "[one]\nsplits = 1\n[four]\nsplits = 4\nscheme = shuffled\nsplit_seed = 2\n"));
  EXPECT_EQ(c.rates, (std::vector<double>{0.2, 0.5}));
  ASSERT_EQ(c.methods.size(), 2u);
  EXPECT_EQ(c.methods[1].name, "four");
  EXPECT_EQ(c.methods[1].split.scheme, PartitionScheme::kShuffled);
  PointCloud src;
  src.points = {Point3(1, 0, 0), Point3(0, 1, 0)};
  const auto sc = c.scenarios(src);
  ASSERT_EQ(sc.size(), 2u);
  EXPECT_TRUE(sc[0].decoy.has_value());
  EXPECT_NE(sc[0].seed, sc[1].seed);
}

TEST(CampaignConfig, ErrorsNameTheField) {
  EXPECT_NE(message_of([] { CampaignConfig::from_tree(ini("trials = many\n[m]\nsplits = 1\n")); }).find("'trials'"),
            std::string::npos);
  EXPECT_NE(message_of([] { CampaignConfig::from_tree(ini("rates = 0.5\n[m]\nbeta = x\n")); }).find("'m.beta'"),
            std::string::npos);
  EXPECT_NE(message_of([] { CampaignConfig::from_tree(ini("speed = 1\n[m]\nsplits = 1\n")); }).find("'speed'"),
            std::string::npos);
  EXPECT_THROW(CampaignConfig::from_tree(ini("rates = 1.0\n[m]\nsplits = 1\n")), Error);
  EXPECT_THROW(CampaignConfig::from_tree(ini("rates = 0.5\n")), Error);
}

TEST(Pipeline, SelfRegistrationIsIdentity) {
  const PointCloud src = make_standin_cloud();
  RunConfig cfg;
  cfg.voxel = 0.03;
  const RegistrationResult r = register_clouds(src, src, cfg);
  EXPECT_LT(rotation_error(r.transform, RigidTransform{}), 0.5);
  EXPECT_LT(r.transform.translation().norm(), 0.01);
  EXPECT_EQ(r.split_losses.size(), 4u);
}

TEST(Pipeline, InsufficientMatches) {
  PointCloud src;
  src.points = {Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0), Point3(0, 0, 1)};
  CorrespondenceSet two;
  two.push_back(0, 0);
  two.push_back(1, 1);
  RunConfig cfg;
  try {
    register_clouds(src, src, cfg, two);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kInsufficientCorrespondences);
    EXPECT_NE(std::string(e.what()).find("insufficient correspondences"), std::string::npos);
  }
}

}  // namespace
}  // namespace sandro
