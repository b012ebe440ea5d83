#include "test_support.hpp"

#include <filesystem>
#include <fstream>

#include "cecnet/checkpoint.hpp"

namespace cecnet {
namespace {

namespace fs = std::filesystem;

fs::path temp_path(const std::string& name) {
  auto dir = fs::temp_directory_path() / "cecnet_test_checkpoint";
  fs::create_directories(dir);
  return dir / name;
}

ModelSpec small_spec() {
  ModelSpec s;
  s.channels = 8;
  return s;
}

template <class T>
std::vector<std::vector<double>> all_values(TrainState<T>& s) {
  std::vector<std::vector<double>> out;
  for (auto& [name, t] : s.named_parameters()) {
    auto d = t->data();
    out.emplace_back(d.begin(), d.end());
  }
  for (std::size_t i = 0; i < s.optimizer.m.size(); ++i) {
    if (s.optimizer.m[i].empty()) continue;
    out.emplace_back(s.optimizer.m[i].begin(), s.optimizer.m[i].end());
    out.emplace_back(s.optimizer.v[i].begin(), s.optimizer.v[i].end());
  }
  return out;
}

TEST(Archive, RoundTripPreservesNamesShapesAndBits) {
  std::vector<NamedArray> in{{"a", Shape{2, 3}, {1, -2, 3.5, 1e-300, -0.0, 7}},
                             {"scalar", Shape{}, {0.1}},
                             {"empty", Shape{0}, {}}};
  const auto path = temp_path("archive.cec");
  write_archive(path, in);
  auto out = read_archive(path);
  ASSERT_EQ(out.size(), in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_EQ(out[i].name, in[i].name);
    EXPECT_EQ(out[i].shape, in[i].shape);
    EXPECT_EQ(out[i].data, in[i].data);
  }
  EXPECT_TRUE(std::signbit(out[0].data[4]));
}

TEST(Archive, SizeMismatchIsContractError) {
  EXPECT_THROW(write_archive(temp_path("bad.cec"), {{"x", Shape{3}, {1, 2}}}), ContractError);
}

TEST(Archive, BadMagicIsIoError) {
  const auto path = temp_path("magic.cec");
  std::ofstream(path, std::ios::binary) << "CEC2\0\0\0\0";
  EXPECT_THROW(read_archive(path), IoError);
  EXPECT_THROW(read_archive(temp_path("does_not_exist.cec")), IoError);
}

TEST(Archive, EveryTruncationIsIoError) {
  const auto path = temp_path("full.cec");
  write_archive(path, {{"weights", Shape{2, 2}, {1, 2, 3, 4}}, {"b", Shape{1}, {5}}});
  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});
  const auto cut = temp_path("cut.cec");
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    std::ofstream(cut, std::ios::binary | std::ios::trunc).write(bytes.data(), static_cast<std::streamsize>(n));
    EXPECT_THROW(read_archive(cut), IoError) << "length " << n;
  }
}

TEST(Checkpoint, FreshStateRoundTrip) {
  auto spec = small_spec();
  spec.use_cece = true;
  spec.fixed_weights = std::make_pair(0.5, 2.0);
  spec.cecm_mode = ClusterMode::MetaGCN;
  auto state = TrainState<double>::make(spec, 3);
  const auto path = temp_path("fresh.cec");
  save_checkpoint(path, state);
  auto loaded = load_checkpoint<double>(path);
  EXPECT_EQ(all_values(loaded), all_values(state));
  EXPECT_EQ(loaded.seed, 3u);
  EXPECT_EQ(loaded.step, 0u);
  EXPECT_EQ(loaded.spec.cecm_mode, ClusterMode::MetaGCN);
  EXPECT_TRUE(loaded.spec.use_cece);
  ASSERT_TRUE(loaded.spec.fixed_weights.has_value());
  EXPECT_EQ(loaded.spec.fixed_weights->second, 2.0);
  EXPECT_EQ(loaded.task.alpha_rotation.item(), state.task.alpha_rotation.item());
}

TEST(Checkpoint, ContinuationIsBitIdentical) {
  auto data = SyntheticDataset::base(7, 40);
  const EpisodeShape shape{5, 1, 1};
  auto straight = TrainState<double>::make(small_spec(), 21);
  train(straight, data, shape, 6);

  auto first = TrainState<double>::make(small_spec(), 21);
  train(first, data, shape, 3);
  const auto path = temp_path("mid.cec");
  save_checkpoint(path, first);
  auto resumed = load_checkpoint<double>(path);
  EXPECT_EQ(resumed.step, 3u);
  EXPECT_EQ(resumed.optimizer.t, 3u);
  train(resumed, data, shape, 3);

  EXPECT_EQ(resumed.step, straight.step);
  EXPECT_EQ(all_values(resumed), all_values(straight));
}

TEST(Checkpoint, FloatStateRoundTrip) {
  auto state = TrainState<float>::make(small_spec(), 4);
  train(state, SyntheticDataset::base(7, 40), {5, 1, 1}, 1);
  const auto path = temp_path("f32.cec");
  save_checkpoint(path, state);
  auto loaded = load_checkpoint<float>(path);
  EXPECT_EQ(all_values(loaded), all_values(state));
}

TEST(Checkpoint, MissingOrMisshapedEntryIsIoError) {
  auto state = TrainState<double>::make(small_spec(), 5);
  auto arrays = state_to_arrays(state);

  auto missing = arrays;
  missing.erase(missing.begin() + 5);
  EXPECT_THROW(state_from_arrays<double>(missing), IoError);

  auto misshaped = arrays;
  for (auto& a : misshaped)
    if (a.name == "encoder.block0.bias") {
      a.shape = Shape{a.data.size() - 1};
      a.data.pop_back();
    }
  EXPECT_THROW(state_from_arrays<double>(misshaped), IoError);

  auto bad_spec = arrays;
  bad_spec[0].data[0] = 7;
  EXPECT_THROW(state_from_arrays<double>(bad_spec), IoError);

  auto duplicate = arrays;
  duplicate.push_back(arrays.back());
  EXPECT_THROW(state_from_arrays<double>(duplicate), IoError);
}

TEST(Checkpoint, LargeCountersSurvive) {
  auto state = TrainState<double>::make(small_spec(), 0xfedcba9876543210ULL);
  state.step = (1ULL << 40) + 17;
  auto loaded = state_from_arrays<double>(state_to_arrays(state));
  EXPECT_EQ(loaded.seed, 0xfedcba9876543210ULL);
  EXPECT_EQ(loaded.step, (1ULL << 40) + 17);
}

}  // namespace
}  // namespace cecnet
