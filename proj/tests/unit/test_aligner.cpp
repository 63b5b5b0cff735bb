// Copyright 2026 The slam-micro Authors
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

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "slam_micro/aligner.hpp"
#include "slam_micro/synth_corpus.hpp"
#include "test_util.hpp"

using namespace slam_micro;
using slam_micro::testing::MaxAbsDiff;
using slam_micro::testing::RandomMat;
using slam_micro::testing::ScratchDir;
using slam_micro::testing::ThrownKind;

namespace {

AlignerConfig SmallConfig() {
  AlignerConfig cfg;
  cfg.audio.frame.hidden = 16;
  cfg.audio.frame.heads = 2;
  cfg.audio.frame.layers = 1;
  cfg.audio.output_dim = 8;
  cfg.embed_dim = 8;
  cfg.text_width = 16;
  cfg.text_heads = 2;
  return cfg;
}

std::vector<std::pair<FeatureSeq, std::string>> Pairs(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<FeatureSeq, std::string>> out;
  for (int i = 0; i < n; ++i) {
    std::vector<int> events = {static_cast<int>(rng.UniformInt(kEventCount))};
    const int second = static_cast<int>(rng.UniformInt(kEventCount));
    if (second != events[0]) events.push_back(second);
    out.emplace_back(LogMel(SynthEventClip(events, 20.0, rng.NextU64())), EventCaption(events));
  }
  return out;
}

RowVec UnitRow(Rng& rng, Eigen::Index d) {
  RowVec v = RandomMat(1, d, rng);
  return v / v.norm();
}

Datastore RandomStore(Rng& rng, int n, Eigen::Index d) {
  Datastore ds;
  ds.embeddings.resize(n, d);
  for (int i = 0; i < n; ++i) {
    ds.captions.push_back("c" + std::to_string(i));
    ds.embeddings.row(i) = UnitRow(rng, d);
  }
  return ds;
}

}  // namespace

TEST_CASE("embeddings are unit norm and similarity is a cosine") {
  DualEncoder enc(SmallConfig(), 1);
  const auto pairs = Pairs(4, 2);
  for (const auto& [f, text] : pairs) {
    CHECK(std::abs(enc.EmbedAudio(f).norm() - 1.0) < 1e-6);
    CHECK(std::abs(enc.EmbedText(text).norm() - 1.0) < 1e-6);
  }
  const RowVec u = enc.EmbedText("dog bark");
  const RowVec v = enc.EmbedText("rain");
  CHECK(Similarity(u, u) == doctest::Approx(1.0));
  CHECK(Similarity(u, -u) == doctest::Approx(-1.0));
  CHECK(Similarity(u, v) == Similarity(v, u));
  CHECK(ThrownKind([&] { enc.EmbedText(""); }) == ErrorKind::kVocabulary);
  CHECK(ThrownKind([&] { enc.EmbedText("Dog"); }) == ErrorKind::kVocabulary);
  CHECK(enc.logit_scale() == doctest::Approx(1.0 / 0.07));
}

TEST_CASE("aligner training is deterministic and keeps unit norms") {
  const auto pairs = Pairs(8, 3);
  AlignerTrainOptions opts{.steps = 5, .batch_size = 4, .lr = 3e-3, .seed = 4};
  DualEncoder a(SmallConfig(), 5), b(SmallConfig(), 5);
  const auto ra = TrainAligner(a, pairs, opts);
  const auto rb = TrainAligner(b, pairs, opts);
  CHECK(ra.losses == rb.losses);
  CHECK(ra.losses.size() == 5);
  for (const auto& [f, text] : pairs) {
    CHECK(std::abs(a.EmbedAudio(f).norm() - 1.0) < 1e-6);
    CHECK(std::abs(a.EmbedText(text).norm() - 1.0) < 1e-6);
    CHECK(a.EmbedAudio(f) == b.EmbedAudio(f));
  }
  CHECK(ThrownKind([&] { TrainAligner(a, Pairs(1, 1), opts); }) == ErrorKind::kContract);
  AlignerTrainOptions one = opts;
  one.batch_size = 1;
  CHECK(ThrownKind([&] { TrainAligner(a, pairs, one); }) == ErrorKind::kContract);
}

TEST_CASE("aligner save and load round trip") {
  const auto dir = ScratchDir("aligner");
  DualEncoder enc(SmallConfig(), 6);
  TrainAligner(enc, Pairs(6, 7), {.steps = 2, .batch_size = 3, .seed = 1});
  SaveAligner(enc, dir / "aligner.slma");
  const DualEncoder back = LoadAligner(dir / "aligner.slma");
  const auto pairs = Pairs(3, 8);
  for (const auto& [f, text] : pairs) {
    CHECK(back.EmbedAudio(f) == enc.EmbedAudio(f));
    CHECK(back.EmbedText(text) == enc.EmbedText(text));
  }
  CHECK(back.logit_scale() == enc.logit_scale());
}

TEST_CASE("retrieval matches a brute-force sort") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.UniformInt(12));
    Datastore ds = RandomStore(rng, n, 4);
    // Duplicate rows create exact ties.
    if (n > 2) ds.embeddings.row(n - 1) = ds.embeddings.row(0);
    const RowVec q = UnitRow(rng, 4);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> sims(n);
    for (int i = 0; i < n; ++i) sims[i] = ds.embeddings.row(i).dot(q);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });
    const std::size_t k = rng.UniformInt(n + 1);
    const auto got = Retrieve(ds, q, k);
    REQUIRE(got.size() == k);
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(got[i].index == order[i]);
      CHECK(got[i].caption == ds.captions[order[i]]);
    }
  }
  Datastore ds = RandomStore(rng, 3, 4);
  CHECK(Retrieve(ds, ds.embeddings.row(2), 1)[0].index == 2);
  CHECK(Retrieve(ds, ds.embeddings.row(0), 0).empty());
  CHECK(ThrownKind([&] { Retrieve(ds, ds.embeddings.row(0), 4); }) == ErrorKind::kSize);
}

TEST_CASE("projection decoding limits") {
  Rng rng(10);
  Datastore one = RandomStore(rng, 1, 6);
  const RowVec q = UnitRow(rng, 6);
  CHECK(MaxAbsDiff(ProjectToTextSpace(q, one), one.embeddings.row(0)) < 1e-12);

  Datastore ds = RandomStore(rng, 5, 6);
  std::size_t nearest = 0;
  for (Eigen::Index i = 1; i < 5; ++i) {
    if (ds.embeddings.row(i).dot(q) > ds.embeddings.row(nearest).dot(q)) nearest = i;
  }
  CHECK(MaxAbsDiff(ProjectToTextSpace(q, ds, 1e-4), ds.embeddings.row(nearest)) < 1e-6);

  // A query orthogonal to every stored row sees uniform weights.
  Datastore flat;
  flat.embeddings = Mat::Zero(3, 4);
  flat.embeddings(0, 0) = flat.embeddings(1, 1) = flat.embeddings(2, 2) = 1.0;
  flat.captions = {"a", "b", "c"};
  RowVec orth = RowVec::Zero(4);
  orth(3) = 1.0;
  RowVec mean = flat.embeddings.colwise().mean();
  CHECK(MaxAbsDiff(ProjectToTextSpace(orth, flat), mean / mean.norm()) < 1e-12);

  CHECK(ThrownKind([&] { ProjectToTextSpace(q, Datastore{}); }) == ErrorKind::kContract);
  CHECK(ThrownKind([&] { ProjectToTextSpace(q, ds, 0.0); }) == ErrorKind::kContract);
}

TEST_CASE("projection stays in the cone of the datastore") {
  // With linearly independent rows, least squares has a unique solution and
  // equals the non-negative least-squares fit whenever it is non-negative.
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.UniformInt(6));
    Datastore ds = RandomStore(rng, n, 16);
    const RowVec y = ProjectToTextSpace(UnitRow(rng, 16), ds, 0.2 + rng.Uniform());
    CHECK(std::abs(y.norm() - 1.0) < 1e-12);
    const Mat a = ds.embeddings.transpose();
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(y.transpose());
    CHECK(c.minCoeff() >= -1e-10);
    CHECK((a * c - y.transpose()).norm() <= 1e-8);
  }
}

TEST_CASE("datastore persistence") {
  const auto dir = ScratchDir("datastore");
  DualEncoder enc(SmallConfig(), 12);
  const Datastore ds = BuildDatastore(enc, {"dog bark", "rain and wind", "siren"});
  CHECK(ds.size() == 3);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(std::abs(ds.embeddings.row(i).norm() - 1.0) < 1e-6);
  SaveDatastore(ds, dir);
  const Datastore back = LoadDatastore(dir);
  CHECK(back.captions == ds.captions);
  CHECK(MaxAbsDiff(back.embeddings, ds.embeddings) < 1e-6);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(std::abs(back.embeddings.row(i).norm() - 1.0) < 1e-12);
}
