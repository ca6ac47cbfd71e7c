#include <gtest/gtest.h>

#include "bicause/synthgen.hpp"
#include "bicause/tree_io.hpp"
#include "test_util.hpp"

using namespace bicause;
using nlohmann::json;

namespace {

Tree positivity_tree() {
  static const Tree tree = [] {
    FitConfig cfg;
    cfg.seed = 3;
    return fit(gen_positivity(20000, 0), cfg);
  }();
  return tree;
}

}  // namespace

TEST(TreeIo, RoundTripIsLossless) {
  const Tree tree = positivity_tree();
  const std::string text = tree_to_json_string(tree);
  const Tree back = tree_from_json(json::parse(text));
  EXPECT_EQ(tree_to_json_string(back), text);
  ASSERT_EQ(back.nodes.size(), tree.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& a = tree.nodes[i];
    const auto& b = back.nodes[i];
    EXPECT_EQ(a.is_violating, b.is_violating);
    EXPECT_EQ(a.n, b.n);
    if (a.split) {
      EXPECT_EQ(a.split->value, b.split->value);
      EXPECT_EQ(a.split->p_raw, b.split->p_raw);
      EXPECT_EQ(a.split->p_adjusted, b.split->p_adjusted);
    }
    if (a.leaf_estimate) {
      EXPECT_EQ(a.leaf_estimate->effect, b.leaf_estimate->effect);
      EXPECT_EQ(a.leaf_estimate->propensity_model.has_value(), b.leaf_estimate->propensity_model.has_value());
    }
  }
  EXPECT_EQ(back.cutoffs->lo, tree.cutoffs->lo);
  EXPECT_EQ(back.cutoffs->hi, tree.cutoffs->hi);
  EXPECT_EQ(back.config.seed, 3u);

  // predictions survive the trip
  const auto ds = gen_positivity(500, 9);
  EXPECT_EQ(assign_leaves(tree, ds), assign_leaves(back, ds));
}

TEST(TreeIo, FileRoundTrip) {
  const auto dir = testutil::scratch_dir("tree_io");
  const Tree tree = positivity_tree();
  const auto path = (dir / "tree.json").string();
  save_tree(tree, path);
  EXPECT_EQ(tree_to_json_string(load_tree(path)), tree_to_json_string(tree));
}

TEST(TreeIo, SchemaViolationsAreRejected) {
  const json good = tree_to_json(positivity_tree());

  auto expect_schema_error = [](json j) { EXPECT_THROW(tree_from_json(j), SchemaError) << j.dump().substr(0, 80); };

  json j = good;
  j["version"] = "bicause_tree_v0";
  expect_schema_error(j);

  j = good;
  j.erase("nodes");
  expect_schema_error(j);

  j = good;
  j["nodes"][0]["id"] = 5;
  expect_schema_error(j);

  j = good;
  j["nodes"][0]["children"] = json::array({1});
  expect_schema_error(j);

  j = good;
  j["nodes"][0]["children"] = json::array({1, 1});
  expect_schema_error(j);

  j = good;
  j["nodes"][0]["split"]["feature_index"] = 42;
  expect_schema_error(j);

  j = good;
  j["nodes"][0]["split"] = nullptr;
  expect_schema_error(j);

  j = good;
  j["config"]["max_depth"] = "deep";
  expect_schema_error(j);

  j = good;
  j["nodes"] = json::array();
  expect_schema_error(j);
}

TEST(TreeIo, MissingOrMalformedFiles) {
  const auto dir = testutil::scratch_dir("tree_io_bad");
  EXPECT_THROW(load_tree((dir / "absent.json").string()), IoError);
  EXPECT_THROW(load_tree(testutil::write_file(dir / "bad.json", "{not json")), SchemaError);
}

TEST(TreeIo, DotMarksViolatingLeaves) {
  const Tree tree = positivity_tree();
  const std::string dot = tree_to_dot(tree);
  EXPECT_EQ(dot.rfind("digraph", 0), 0u);
  std::size_t red = 0;
  for (auto pos = dot.find("fillcolor=red"); pos != std::string::npos; pos = dot.find("fillcolor=red", pos + 1)) ++red;
  EXPECT_EQ(red, tree.violating_leaf_ids().size());
  std::size_t edges = 0;
  for (auto pos = dot.find("->"); pos != std::string::npos; pos = dot.find("->", pos + 1)) ++edges;
  EXPECT_EQ(edges, tree.nodes.size() - 1);
}
