// Copyright 2026 The vstmimo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sstream>

#include <gtest/gtest.h>

#include "vstmimo/dataset.hpp"
#include "vstmimo/training.hpp"

using namespace vstmimo;

namespace {

struct Fixture {
  CodecConfig cfg = tiny_codec_config();
  CodecParams params = init_params(cfg, 4);
  SyntheticSpec spec;
  Image x;
  ChannelModel model = ChannelModel::reference_kronecker();
  ChannelRealization ch;
  FrozenDraws draws;
  LinkConfig link;

  explicit Fixture(std::uint64_t seed = 1) {
    spec.size = 8;
    spec.count = 8;
    x = synthetic_image(spec, 0);
    Rng rng(seed);
    ch = model.sample(rng, 0.1);
    draws = FrozenDraws::make(cfg, rng);
  }
};

TrainConfig tiny_train(int steps) {
  TrainConfig tc;
  tc.steps = steps;
  tc.batch = 4;
  return tc;
}

}  // namespace

TEST(Loss, AccountingIdentity) {
  Fixture f;
  for (double w : {0.0, 3.0}) {
    FrozenDraws d = f.draws;
    const auto l = compute_loss(f.x, f.params, f.ch, f.link, Objective{0.01, w}, d);
    EXPECT_NEAR(l.total, 0.01 * (l.k_y_tilde + l.k_z_tilde) + l.distortion + w * l.anchor, 1e-9);
    EXPECT_GT(l.k_y_tilde, 0.0);
    EXPECT_GT(l.k_z_tilde, 0.0);
  }
}

TEST(Loss, LambdaToZeroLeavesDistortion) {
  Fixture f;
  FrozenDraws d = f.draws;
  const auto l = compute_loss(f.x, f.params, f.ch, f.link, Objective{1e-12, 0.0}, d);
  EXPECT_NEAR(l.total, l.distortion, 1e-9);
}

TEST(Loss, FrozenDrawsMakeLossRepeatable) {
  Fixture f;
  FrozenDraws a = f.draws, b = f.draws;
  EXPECT_EQ(compute_loss(f.x, f.params, f.ch, f.link, Objective{}, a).total,
            compute_loss(f.x, f.params, f.ch, f.link, Objective{}, b).total);
}

TEST(Loss, NoSideInformationDropsKz) {
  Fixture f;
  f.link.transmit_side_info = false;
  FrozenDraws d = f.draws;
  EXPECT_EQ(compute_loss(f.x, f.params, f.ch, f.link, Objective{}, d).k_z_tilde, 0.0);
}

TEST(GradCheck, TinyConfigurationAllParameters) {
  for (bool side : {true, false}) {
    for (double anchor : {0.0, 3.0}) {
      Fixture f(side ? 2 : 3);
      f.link.transmit_side_info = side;
      const auto r = gradient_check(f.x, f.params, f.ch, f.link, Objective{0.01, anchor}, f.draws);
      EXPECT_EQ(r.checked, f.params.size());
      EXPECT_GE(r.pass_fraction(), 0.99) << "side " << side << " anchor " << anchor << " max " << r.max_rel_error;
    }
  }
}

TEST(GradCheck, RelativeErrorFloor) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(1e-10, 0.0), 1e-10 / 1e-8);
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  Fixture f;
  auto tc = tiny_train(5);
  tc.learning_rate = 0.0;
  const auto data = synthetic_dataset(f.spec);
  const auto r = train(tc, data, f.params, f.model, f.link);
  EXPECT_TRUE(r.params == f.params);
  EXPECT_EQ(r.trace.size(), 5u);
}

TEST(Train, DeterministicTraces) {
  Fixture f;
  const auto data = synthetic_dataset(f.spec);
  const auto a = train(tiny_train(10), data, f.params, f.model, f.link);
  const auto b = train(tiny_train(10), data, f.params, f.model, f.link);
  EXPECT_TRUE(a.params == b.params);
  std::ostringstream sa, sb;
  write_loss_csv(sa, a.trace);
  write_loss_csv(sb, b.trace);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str().substr(0, sa.str().find('\n')), "step,k_y_tilde,k_z_tilde,distortion,anchor,total");
}

TEST(Train, DivergenceReportsStep) {
  Fixture f;
  auto tc = tiny_train(20);
  tc.learning_rate = 1e300;
  const auto data = synthetic_dataset(f.spec);
  try {
    train(tc, data, f.params, f.model, f.link);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_GE(e.step(), 1);
  }
}

TEST(Train, ValidatesInputs) {
  Fixture f;
  EXPECT_THROW(train(tiny_train(1), {}, f.params, f.model, f.link), ValidationError);
  auto tc = tiny_train(1);
  tc.lambda = 0;
  EXPECT_THROW(tc.validate(), ValidationError);
  tc = tiny_train(1);
  tc.snr_low_db = 20;
  EXPECT_THROW(tc.validate(), ValidationError);
}

TEST(Train, ShortRunReducesLoss) {
  Fixture f;
  f.spec.count = 64;
  const auto data = synthetic_dataset(f.spec);
  auto tc = tiny_train(300);
  tc.learning_rate = 3e-3;
  const auto r = train(tc, data, f.params, f.model, f.link);
  const auto s = smoothed_loss(r.trace);
  EXPECT_LT(s.back(), s.front());
}

TEST(Train, SmoothedLossIsEma) {
  std::vector<LossRow> t(3);
  t[0].loss.total = 1;
  t[1].loss.total = 2;
  t[2].loss.total = 4;
  const auto s = smoothed_loss(t, 0.5);
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  EXPECT_DOUBLE_EQ(s[1], 1.5);
  EXPECT_DOUBLE_EQ(s[2], 2.75);
}

TEST(RdSweep, RepeatedLambdaGivesIdenticalRows) {
  Fixture f;
  f.spec.size = 16;  // MS-SSIM needs at least 11 px
  const auto data = synthetic_dataset(f.spec);
  auto tc = tiny_train(5);
  const auto t = rd_sweep({0.01, 0.01}, tc, data, data, f.params, f.model, f.link, 10.0, 3);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].summary.psnr.mean, t.rows[1].summary.psnr.mean);
  EXPECT_EQ(t.rows[0].summary.cbr.mean, t.rows[1].summary.cbr.mean);
  EXPECT_THROW(rd_sweep({0.01}, tc, data, data, f.params, f.model, f.link, 10.0, 3), ValidationError);
}
