#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "bicause/dataset.hpp"
#include "bicause/synthgen.hpp"
#include "test_util.hpp"

using namespace bicause;

namespace {

Dataset tiny() {
  Eigen::MatrixXd x(4, 2);
  x << 1.5, -2, 0.1, 3, 1e-20, 7, 12345.678, 0;
  return Dataset(x, {"a", "b"}, {0, 1, 1, 0}, {0.5, 1.0, 0.0, 2.25});
}

}  // namespace

TEST(Dataset, ValidatesInvariants) {
  Eigen::MatrixXd x(2, 1);
  x << 1, 2;
  EXPECT_THROW(Dataset(x, {"a"}, {0, 2}, {0, 0}), DataError);
  EXPECT_THROW(Dataset(x, {"a"}, {0, 1}, {0}), DataError);
  EXPECT_THROW(Dataset(x, {"a", "b"}, {0, 1}, {0, 1}), DataError);
  EXPECT_THROW(Dataset(x, {"a"}, {0, 1}, {0, std::nan("")}), DataError);
  Eigen::MatrixXd x2(2, 2);
  x2 << 1, 2, 3, 4;
  EXPECT_THROW(Dataset(x2, {"a", "a"}, {0, 1}, {0, 1}), DataError);
  const Dataset ok(x, {"a"}, {0, 1}, {0, 1});
  EXPECT_EQ(ok.row_ids(), (std::vector<RowId>{0, 1}));
  EXPECT_EQ(ok.num_treated(), 1u);
}

TEST(Dataset, SubsetCarriesRowIds) {
  const auto ds = tiny();
  const std::vector<std::size_t> rows{3, 1};
  const auto sub = ds.subset(rows);
  EXPECT_EQ(sub.row_ids(), (std::vector<RowId>{3, 1}));
  EXPECT_EQ(sub.feature(0, 0), 12345.678);
  EXPECT_EQ(sub.treatment()[1], 1);
}

TEST(Csv, LoadsMinimalFile) {
  const auto dir = testutil::scratch_dir("csv_min");
  const auto path = testutil::write_file(dir / "d.csv", "T,Y,x1\n0,1.5,3\n1,0,4\n1,2,-1\n");
  const auto ds = load_csv(path, {});
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.num_features(), 1u);
  EXPECT_EQ(ds.feature_names(), (std::vector<std::string>{"x1"}));
  EXPECT_EQ(ds.outcome()[0], 1.5);
  EXPECT_EQ(ds.row_ids(), (std::vector<RowId>{0, 1, 2}));
  EXPECT_FALSE(ds.has_potential_outcomes());
}

TEST(Csv, HandlesBomQuotesCrlfAndExplicitSchema) {
  const auto dir = testutil::scratch_dir("csv_quirks");
  const auto path = testutil::write_file(dir / "d.csv", "\xEF\xBB\xBF\"x,1\",treat,out,z,p0,p1\r\n 1 ,1,0,9,0,1\r\n2,0,1,8,1,1\r\n");
  ColumnSchema schema;
  schema.treatment_column = "treat";
  schema.outcome_column = "out";
  schema.y0_column = "p0";
  schema.y1_column = "p1";
  schema.feature_columns = {"z", "x,1"};
  const auto ds = load_csv(path, schema);
  EXPECT_EQ(ds.feature_names(), (std::vector<std::string>{"z", "x,1"}));
  EXPECT_EQ(ds.feature(0, 1), 1.0);
  EXPECT_EQ(ds.feature(1, 0), 8.0);
  ASSERT_TRUE(ds.has_potential_outcomes());
  EXPECT_EQ(ds.potential_outcomes()->y1, (std::vector<double>{1, 1}));
}

TEST(Csv, ReportsErrors) {
  const auto dir = testutil::scratch_dir("csv_errors");
  EXPECT_THROW(load_csv((dir / "missing.csv").string(), {}), IoError);

  const auto bad_t = testutil::write_file(dir / "t.csv", "T,Y,x\n0,1,1\n2,1,1\n");
  try {
    load_csv(bad_t, {});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }

  const auto no_col = testutil::write_file(dir / "c.csv", "T,Z,x\n0,1,1\n");
  EXPECT_THROW(load_csv(no_col, {}), SchemaError);
  const auto bad_cell = testutil::write_file(dir / "n.csv", "T,Y,x\n0,1,abc\n");
  EXPECT_THROW(load_csv(bad_cell, {}), SchemaError);
  const auto short_row = testutil::write_file(dir / "s.csv", "T,Y,x\n0,1\n");
  EXPECT_THROW(load_csv(short_row, {}), SchemaError);
  const auto nan_cell = testutil::write_file(dir / "nan.csv", "T,Y,x\n0,1,nan\n");
  EXPECT_THROW(load_csv(nan_cell, {}), SchemaError);
}

TEST(Csv, WriteThenLoadIsIdentity) {
  const auto dir = testutil::scratch_dir("csv_roundtrip");
  const auto ds = gen_natural_experiment(500, 3);
  const auto path = (dir / "ne.csv").string();
  write_csv(ds, path);
  ColumnSchema schema;
  schema.y0_column = "y0";
  schema.y1_column = "y1";
  const auto back = load_csv(path, schema);
  EXPECT_EQ(back.feature_names(), ds.feature_names());
  EXPECT_EQ(back.features(), ds.features());  // shortest round-trip text is exact
  EXPECT_EQ(back.treatment(), ds.treatment());
  EXPECT_EQ(back.outcome(), ds.outcome());
  EXPECT_EQ(back.potential_outcomes()->y0, ds.potential_outcomes()->y0);

  const auto t = tiny();
  write_csv(t, (dir / "tiny.csv").string());
  EXPECT_EQ(load_csv((dir / "tiny.csv").string(), {}).features(), t.features());
}

TEST(Split, SizesFollowRounding) {
  auto a = split_indices(20000, 0.5, 1);
  EXPECT_EQ(a.train.size(), 10000u);
  EXPECT_EQ(a.test.size(), 10000u);
  auto b = split_indices(4802, 0.7, 1);
  EXPECT_EQ(b.train.size(), 3361u);
  EXPECT_EQ(b.test.size(), 1441u);
  EXPECT_THROW(split_indices(10, 0.0, 1), InvalidArgument);
  EXPECT_THROW(split_indices(10, 1.0, 1), InvalidArgument);
  EXPECT_THROW(split_indices(1, 0.5, 1), InvalidArgument);
}

TEST(Split, PartitionIsDisjointCompleteAndDeterministic) {
  const auto ds = gen_positivity(997, 4);
  for (std::uint64_t seed : {0ull, 1ull, 77ull}) {
    const auto [train, test] = split_train_test(ds, 0.3, seed);
    std::set<RowId> ids(train.row_ids().begin(), train.row_ids().end());
    for (const auto id : test.row_ids()) EXPECT_TRUE(ids.insert(id).second) << "overlap at " << id;
    EXPECT_EQ(ids.size(), ds.size());
    const auto again = split_indices(ds.size(), 0.3, seed);
    EXPECT_EQ(again.train, split_indices(ds.size(), 0.3, seed).train);
  }
  EXPECT_NE(split_indices(1000, 0.5, 1).train, split_indices(1000, 0.5, 2).train);
}
