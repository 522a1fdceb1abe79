#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "chromnet/error.hpp"
#include "chromnet/evaluation.hpp"
#include "chromnet/model.hpp"
#include "chromnet/training.hpp"

using namespace chromnet;

namespace {

SplitResult small_split(std::uint64_t seed, double noise = 0.2) {
  SyntheticSpec spec;
  spec.n_genes = 90;
  spec.n_f = 2;
  spec.bins = 8;
  spec.high_marks = {0};
  spec.low_marks = {1};
  spec.center_width = 2;
  spec.noise_sigma = noise;
  spec.seed = seed;
  return split_dataset(generate_synthetic(spec), SplitSpec{{1.0 / 3, 1.0 / 3, 1.0 / 3}, seed});
}

TrainConfig small_config(std::size_t epochs) {
  Hyperparams h = small_test_config();
  h.dropout_p = 0.2;
  h.lr = 0.05;
  h.epochs = epochs;
  h.seed = 3;
  return TrainConfig::from(h);
}

TrainedModel small_model() {
  const auto s = small_split(1);
  return train(s.train, s.validation, small_config(3)).model;
}

}  // namespace

TEST(Train, OneEpochRunsOneStepPerSample) {
  const auto s = small_split(2);
  const auto r = train(s.train, s.validation, small_config(1));
  EXPECT_EQ(r.sgd_steps, s.train.size());
  ASSERT_EQ(r.history.epochs.size(), 1u);
  EXPECT_EQ(r.history.epochs[0].epoch, 1u);
  EXPECT_EQ(r.model.selected_epoch, 1u);
}

TEST(Train, BatchDividesStepCount) {
  const auto s = small_split(2);
  TrainConfig c = small_config(2);
  c.hyper.batch = 4;
  const auto r = train(s.train, s.validation, c);
  EXPECT_EQ(r.sgd_steps, 2 * ((s.train.size() + 3) / 4));
}

TEST(Train, SameSeedSameHistory) {
  const auto s = small_split(3);
  const auto a = train(s.train, s.validation, small_config(4));
  const auto b = train(s.train, s.validation, small_config(4));
  ASSERT_EQ(a.history.epochs.size(), 4u);
  for (std::size_t e = 0; e < 4; ++e) {
    EXPECT_EQ(a.history.epochs[e].mean_train_loss, b.history.epochs[e].mean_train_loss);
    EXPECT_EQ(a.history.epochs[e].validation_auc, b.history.epochs[e].validation_auc);
  }
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(serialize_model(a.model), serialize_model(b.model));
}

TEST(Train, SelectedEpochHasBestValidationAuc) {
  const auto s = small_split(4, 0.6);
  const auto r = train(s.train, s.validation, small_config(6));
  double best = -1.0;
  for (const auto& e : r.history.epochs) best = std::max(best, e.validation_auc);
  ASSERT_GE(r.model.selected_epoch, 1u);
  EXPECT_EQ(r.history.epochs[r.model.selected_epoch - 1].validation_auc, best);
  EXPECT_DOUBLE_EQ(auc(predict_scores(r.model, s.validation)), best);
}

TEST(Train, RejectsBadInput) {
  const auto s = small_split(5);
  TrainConfig c = small_config(1);
  c.max_epochs = 0;
  EXPECT_THROW(train(s.train, s.validation, c), DomainError);
  Dataset unlabeled = s.train;
  unlabeled.samples[0].label.reset();
  EXPECT_THROW(train(unlabeled, s.validation, small_config(1)), DomainError);
  TrainConfig wide = small_config(1);
  wide.hyper.bins = 9;
  EXPECT_THROW(train(s.train, s.validation, wide), DimensionError);
}

TEST(Train, NoiselessSyntheticReachesHighAuc) {
  const Dataset data = generate_synthetic(SyntheticSpec{});
  const auto s = split_dataset(data, SplitSpec{{1.0 / 3, 1.0 / 3, 1.0 / 3}, 0});
  Hyperparams h;
  h.epochs = 20;
  const auto r = train(s.train, s.validation, TrainConfig::from(h));
  ASSERT_EQ(r.history.epochs.size(), 20u);
  EXPECT_GE(r.history.epochs.back().validation_auc, 0.99);

  const auto scores = predict_scores(r.model, s.test);
  double pos = 0.0, neg = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& rec : scores) {
    if (rec.label == Label::High) {
      pos += rec.score;
      ++n_pos;
    } else {
      neg += rec.score;
      ++n_neg;
    }
  }
  EXPECT_GT(pos / n_pos, neg / n_neg);
}

TEST(ModelFile, RoundTripPredictsIdentically) {
  const TrainedModel m = small_model();
  const auto path = std::filesystem::temp_directory_path() / "chromnet_roundtrip.bin";
  save_model(m, path);
  const TrainedModel back = load_model(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back, m);
  const auto s = small_split(6);
  Dataset ten = s.test;
  ten.samples.resize(10);
  const auto a = predict_scores(m, ten);
  const auto b = predict_scores(back, ten);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(a[i].score, b[i].score);
}

TEST(ModelFile, TransformSurvivesRoundTrip) {
  const auto s = small_split(7);
  TrainConfig c = small_config(1);
  c.log1p_input = true;
  c.standardize_input = true;
  const TrainedModel m = train(s.train, s.validation, c).model;
  EXPECT_TRUE(m.transform.standardize);
  EXPECT_EQ(deserialize_model(serialize_model(m)), m);
}

TEST(ModelFile, BumpedVersionIsFormatError) {
  std::string bytes = serialize_model(small_model());
  const std::string key = "format_version=1\n";
  const auto at = bytes.find(key);
  ASSERT_NE(at, std::string::npos);
  bytes.replace(at, key.size(), "format_version=2\n");
  EXPECT_THROW(deserialize_model(bytes), FormatError);
}

TEST(ModelFile, ForeignFileIsFormatError) {
  EXPECT_THROW(deserialize_model("gene_id,bin,a,expression\n"), FormatError);
}

TEST(ModelFile, CorruptFinalByteIsIntegrityError) {
  std::string bytes = serialize_model(small_model());
  bytes.back() = static_cast<char>(bytes.back() ^ 0x5a);
  EXPECT_THROW(deserialize_model(bytes), IntegrityError);
}

TEST(ModelFile, CorruptParameterByteIsIntegrityError) {
  std::string bytes = serialize_model(small_model());
  bytes[bytes.size() - 20] = static_cast<char>(bytes[bytes.size() - 20] ^ 0x01);
  EXPECT_THROW(deserialize_model(bytes), IntegrityError);
}

TEST(ModelFile, TruncationIsIntegrityError) {
  const std::string bytes = serialize_model(small_model());
  EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 9)), IntegrityError);
  EXPECT_THROW(deserialize_model(bytes.substr(0, 20)), IntegrityError);
}

TEST(ModelFile, MissingFileIsIoError) {
  EXPECT_THROW(load_model("/nonexistent/chromnet/model.bin"), IoError);
}

TEST(ModelFile, CompatibilityChecks) {
  const TrainedModel m = small_model();
  Dataset d = small_split(8).test;
  EXPECT_NO_THROW(m.check_compatible(d));
  Dataset renamed = d;
  renamed.mark_names = {"x", "y"};
  EXPECT_THROW(m.check_compatible(renamed), SchemaError);
  Dataset wider = d;
  wider.bin_count = 12;
  EXPECT_THROW(m.check_compatible(wider), DimensionError);
}
