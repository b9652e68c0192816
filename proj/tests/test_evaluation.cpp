// Copyright 2026 The evc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "error_code.hpp"
#include "evc/evaluation.hpp"
#include "reference_fixtures.hpp"
#include "temp_dir.hpp"

using namespace evc;
using namespace evc::testing;

namespace {

const DomainSet kDomains = DomainSet::defaults();

double row_sum_rounded(const ConfusionRow& r) {
  double s = 0.0;
  for (double p : r.percent) s += round_half_up(p, 1);
  return s;
}

void check_rows_sum_to_100(const ConfusionTable& t) {
  for (const auto& r : t.rows) {
    if (r.percent.empty()) continue;
    CHECK(std::abs(row_sum_rounded(r) - 100.0) <= 0.1 + 1e-9);
  }
}

}  // namespace

TEST_CASE("mcd oracles") {
  RowMatrix a = RowMatrix::Zero(2, 1), b = RowMatrix::Zero(2, 1);
  b(1, 0) = 1.0;
  CHECK(mcd(McSegment(a), McSegment(b)) == doctest::Approx(6.1419).epsilon(1e-5));
  CHECK(mcd(McSegment(a), McSegment(b)) == doctest::Approx(10.0 / std::log(10.0) * std::sqrt(2.0)).epsilon(1e-14));
  // c0 differences are ignored unless requested.
  RowMatrix c = a;
  c(0, 0) = 5.0;
  CHECK(mcd(McSegment(a), McSegment(c)) == 0.0);
  CHECK(mcd(McSegment(a), McSegment(c), false) == doctest::Approx(5.0 * 6.14190).epsilon(1e-5));
  // Mean over frames: a 3-4-5 frame and a zero frame.
  RowMatrix x = RowMatrix::Zero(3, 2), y = RowMatrix::Zero(3, 2);
  y(1, 0) = 3.0;
  y(2, 0) = 4.0;
  CHECK(mcd(McSegment(x), McSegment(y)) == doctest::Approx(2.5 * 10.0 / std::log(10.0) * std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("mcd is zero on identical input, symmetric and shape checked") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  RowMatrix a(36, 20), b(36, 20);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = nd(rng);
    b.data()[i] = nd(rng);
  }
  CHECK(mcd(McSegment(a), McSegment(a)) == 0.0);
  CHECK(mcd(McSegment(a), McSegment(b)) == mcd(McSegment(b), McSegment(a)));
  CHECK(mcd(McSegment(a), McSegment(b)) > 0.0);
  CHECK(error_code_of([&] { mcd(McSegment(a), McSegment(RowMatrix(36, 19))); }) == ErrorCode::kShape);
  CHECK(error_code_of([&] { mcd(McSegment(a), McSegment(RowMatrix(24, 20))); }) == ErrorCode::kShape);
}

TEST_CASE("half-up rounding") {
  CHECK(round_half_up(2.125, 2) == doctest::Approx(2.13));
  CHECK(round_half_up(1.875, 2) == doctest::Approx(1.88));
  CHECK(round_half_up(43.35, 1) == doctest::Approx(43.4));
  CHECK(round_half_up(0.05, 1) == doctest::Approx(0.1));
  CHECK(round_half_up(100.0 * 13 / 30, 1) == doctest::Approx(43.3));
  CHECK(round_half_up(4.7916666, 2) == doctest::Approx(4.79));
  CHECK(round_half_up(2.124999, 2) == doctest::Approx(2.12));
}

TEST_CASE("tasks and response records") {
  CHECK(parse_task("classify") == ResponseTask::kClassify);
  CHECK(parse_task("mos") == ResponseTask::kMos);
  CHECK(parse_task("ess") == ResponseTask::kEss);
  CHECK(error_code_of([] { parse_task("MOS"); }) == ErrorCode::kInvalidArgument);
  const ResponseRecord c{"p1", "s1", ResponseTask::kClassify, "sad", 0, "t"};
  const ResponseRecord m{"p1", "s1", ResponseTask::kMos, "", 4, "t"};
  CHECK(response_from_json(response_to_json(c)) == c);
  CHECK(response_from_json(response_to_json(m)) == m);
  CHECK(response_to_json(c).at("value") == "sad");
  CHECK(response_to_json(m).at("value") == 4);
  validate_response(c, kDomains);
  validate_response(m, kDomains);
  for (const ResponseRecord& bad :
       {ResponseRecord{"", "s1", ResponseTask::kClassify, "sad", 0, ""},
        ResponseRecord{"p", "", ResponseTask::kClassify, "sad", 0, ""},
        ResponseRecord{"p", "s", ResponseTask::kClassify, "bored", 0, ""},
        ResponseRecord{"p", "s", ResponseTask::kMos, "", 0, ""}, ResponseRecord{"p", "s", ResponseTask::kEss, "", 6, ""}}) {
    CHECK(error_code_of([&] { validate_response(bad, kDomains); }) == ErrorCode::kInvalidArgument);
  }
  CHECK(error_code_of([] {
          response_from_json({{"participant_id", "p"}, {"stimulus_id", "s"}, {"task", "mos"}, {"value", 2.5}});
        }) == ErrorCode::kInvalidArgument);
  CHECK(error_code_of([] {
          response_from_json({{"participant_id", "p"}, {"stimulus_id", "s"}, {"task", "classify"}, {"value", 2}});
        }) == ErrorCode::kInvalidArgument);
  CHECK(error_code_of([] { response_from_json({{"participant_id", "p"}}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("response log is append-only and reads back") {
  TempDir dir;
  const auto path = dir / "sub" / "responses.jsonl";
  CHECK(read_responses(path, kDomains).empty());
  const ResponseRecord a{"p1", "s1", ResponseTask::kClassify, "sad", 0, "t1"};
  const ResponseRecord b{"p2", "s1", ResponseTask::kEss, "", 5, "t2"};
  append_response(path, a);
  append_response(path, b);
  CHECK(read_responses(path, kDomains) == std::vector<ResponseRecord>{a, b});
  CHECK(error_code_of([&] { responses_from_jsonl(R"({"participant_id":"p","stimulus_id":"s","task":"classify","value":"bored"})", kDomains); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("neutral originals all labelled neutral give a 100.0 row") {
  const StimulusIndex idx = fixture_index();
  std::vector<ResponseRecord> responses;
  for (int p = 0; p < kClassifyParticipants; ++p) {
    for (const char* phrase : kTestPhrases) {
      responses.push_back({"p" + std::to_string(p), stimulus_id(phrase, "neutral", "neutral"), ResponseTask::kClassify,
                           "neutral", 0, ""});
    }
  }
  const auto t = aggregate_classification(responses, idx, kDomains);
  const ConfusionRow* row = t.original.find("neutral", "neutral");
  REQUIRE(row != nullptr);
  CHECK(row->total == 30);
  CHECK(row->percent == std::vector<double>{100.0, 0.0, 0.0, 0.0});
  CHECK(to_csv(t.original).find("neutral,100.0,0.0,0.0,0.0,30") != std::string::npos);
  CHECK(t.original.find("sad", "sad")->percent.empty());
  CHECK(to_markdown(t.original).find("| sad | -- | -- | -- | -- |") != std::string::npos);
}

TEST_CASE("published classification counts reproduce all three table layouts") {
  const auto t = aggregate_classification(fixture_classify_responses(), fixture_index(), kDomains);
  const auto labels = kDomains.labels();
  REQUIRE(t.original.rows.size() == 4);
  REQUIRE(t.converted.rows.size() == 12);
  REQUIRE(t.averaged.rows.size() == 4);
  for (std::size_t s = 0; s < 4; ++s) {
    CHECK(t.original.rows[s].total == 30);
    for (std::size_t c = 0; c < 4; ++c) CHECK(round_half_up(t.original.rows[s].percent[c], 1) == doctest::Approx(kOriginalPercent[s][c]));
  }
  for (std::size_t r = 0; r < 12; ++r) {
    CHECK(t.converted.rows[r].total == 30);
    for (std::size_t c = 0; c < 4; ++c) CHECK(round_half_up(t.converted.rows[r].percent[c], 1) == doctest::Approx(kConvertedPercent[r][c]));
  }
  for (std::size_t g = 0; g < 4; ++g) {
    CHECK(t.averaged.rows[g].target == labels[g]);
    CHECK(t.averaged.rows[g].total == 90);
    for (std::size_t c = 0; c < 4; ++c) CHECK(round_half_up(t.averaged.rows[g].percent[c], 1) == doctest::Approx(kAveragedPercent[g][c]));
  }
  check_rows_sum_to_100(t.original);
  check_rows_sum_to_100(t.converted);
  check_rows_sum_to_100(t.averaged);
  CHECK(to_markdown(t.averaged).find("| joyful | 25.6% | 32.2% | 21.1% | 21.1% |") != std::string::npos);
}

TEST_CASE("averaged rows are the mean of the contributing pair rows") {
  std::mt19937_64 rng(12);
  const StimulusIndex idx = fixture_index();
  const auto labels = kDomains.labels();
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ResponseRecord> responses;
    std::uniform_int_distribution<int> pick(0, static_cast<int>(idx.size()) - 1), lab(0, 3), keep(0, 4);
    for (int i = 0; i < 200; ++i) {
      const auto& e = idx[static_cast<std::size_t>(pick(rng))];
      responses.push_back({"p" + std::to_string(i), e.stimulus_id, ResponseTask::kClassify, labels[lab(rng)], 0, ""});
    }
    if (trial % 2) responses.erase(std::remove_if(responses.begin(), responses.end(), [&](auto&) { return keep(rng) == 0; }), responses.end());
    const auto t = aggregate_classification(responses, idx, kDomains);
    for (const auto& avg : t.averaged.rows) {
      std::vector<double> sum(4, 0.0);
      int n = 0;
      for (const auto& r : t.converted.rows) {
        if (r.target != avg.target || r.percent.empty()) continue;
        for (std::size_t c = 0; c < 4; ++c) sum[c] += r.percent[c];
        ++n;
      }
      if (n == 0) {
        CHECK(avg.percent.empty());
        continue;
      }
      for (std::size_t c = 0; c < 4; ++c) CHECK(avg.percent[c] == doctest::Approx(sum[c] / n).epsilon(1e-12));
    }
    check_rows_sum_to_100(t.converted);
    check_rows_sum_to_100(t.averaged);
  }
}

TEST_CASE("published score cells reproduce from 24 integer scores each") {
  const StimulusIndex idx = fixture_index();
  for (ResponseTask task : {ResponseTask::kMos, ResponseTask::kEss}) {
    const auto& ref = task == ResponseTask::kMos ? kMos : kEss;
    const auto responses = fixture_score_responses(task);
    CHECK(responses.size() == 16 * 24);
    const ScoreTable t = aggregate_scores(responses, idx, kDomains, task);
    for (std::size_t g = 0; g < 4; ++g) {
      CHECK(t.cells[g][g].count == 0);
      CHECK(!t.cells[g][g].mean.has_value());
      for (std::size_t s = 0; s < 4; ++s) {
        if (s == g) continue;
        CHECK(t.cells[g][s].count == 24);
        CHECK(round_half_up(*t.cells[g][s].mean, 2) == doctest::Approx(ref[g][s]));
      }
      CHECK(t.original[g].count == 24);
      CHECK(round_half_up(*t.original[g].mean, 2) == doctest::Approx(ref[g][4]));
    }
  }
  const ScoreTable mos = aggregate_scores(fixture_score_responses(ResponseTask::kMos), idx, kDomains, ResponseTask::kMos);
  CHECK(*mos.original[0].mean == doctest::Approx(115.0 / 24.0).epsilon(1e-14));
  CHECK(to_markdown(mos).find("| neutral | -- | 2.50 | 2.50 | 1.92 | 4.79 |") != std::string::npos);
  CHECK(to_markdown(mos).find("| joyful | 2.13 |") != std::string::npos);
  CHECK(to_csv(mos).find("angry,2.13,2.00,,1.58,4.46") != std::string::npos);
}

TEST_CASE("24 fives give 5.00 and an empty cell stays absent") {
  const StimulusIndex idx = fixture_index();
  std::vector<ResponseRecord> r;
  for (int p = 0; p < 8; ++p) {
    for (const char* phrase : kTestPhrases) {
      r.push_back({"p" + std::to_string(p), stimulus_id(phrase, "neutral", "sad"), ResponseTask::kMos, "", 5, ""});
    }
  }
  const ScoreTable t = aggregate_scores(r, idx, kDomains, ResponseTask::kMos);
  CHECK(t.cells[3][0].count == 24);
  CHECK(*t.cells[3][0].mean == 5.0);
  CHECK(!t.cells[1][0].mean.has_value());
  CHECK(!t.original[0].mean.has_value());
  CHECK(*t.converted_mean == 5.0);
  CHECK(!t.original_mean.has_value());
  CHECK(table_to_json(t)["rows"][1]["sources"]["neutral"]["mean"].is_null());
  CHECK(table_to_json(t)["rows"][3]["sources"]["neutral"]["mean"] == 5.0);
}

TEST_CASE("score means are bounded and respect the task") {
  const StimulusIndex idx = fixture_index();
  auto r = fixture_score_responses(ResponseTask::kEss);
  const auto mos = fixture_score_responses(ResponseTask::kMos);
  r.insert(r.end(), mos.begin(), mos.end());
  const ScoreTable ess = aggregate_scores(r, idx, kDomains, ResponseTask::kEss);
  CHECK(round_half_up(*ess.original[3].mean, 2) == doctest::Approx(4.92));
  for (const auto& row : ess.cells) {
    for (const auto& c : row) {
      if (c.mean) CHECK((*c.mean >= 1.0 && *c.mean <= 5.0));
    }
  }
  CHECK(error_code_of([&] { aggregate_scores(r, idx, kDomains, ResponseTask::kClassify); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("aggregation is invariant under response order") {
  const StimulusIndex idx = fixture_index();
  auto classify = fixture_classify_responses();
  auto mos = fixture_score_responses(ResponseTask::kMos);
  const auto c0 = aggregate_classification(classify, idx, kDomains);
  const auto m0 = aggregate_scores(mos, idx, kDomains, ResponseTask::kMos);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(classify.begin(), classify.end(), rng);
    std::shuffle(mos.begin(), mos.end(), rng);
    const auto c = aggregate_classification(classify, idx, kDomains);
    CHECK(table_to_json(c.original) == table_to_json(c0.original));
    CHECK(table_to_json(c.converted) == table_to_json(c0.converted));
    CHECK(table_to_json(c.averaged) == table_to_json(c0.averaged));
    CHECK(table_to_json(aggregate_scores(mos, idx, kDomains, ResponseTask::kMos)) == table_to_json(m0));
  }
}

TEST_CASE("empty and unknown inputs") {
  const StimulusIndex idx = fixture_index();
  CHECK(error_code_of([&] { aggregate_classification({}, idx, kDomains); }) == ErrorCode::kEmptyTable);
  CHECK(error_code_of([&] { aggregate_scores({}, idx, kDomains, ResponseTask::kMos); }) == ErrorCode::kEmptyTable);
  const auto mos_only = fixture_score_responses(ResponseTask::kMos);
  CHECK(error_code_of([&] { aggregate_classification(mos_only, idx, kDomains); }) == ErrorCode::kEmptyTable);
  CHECK(error_code_of([&] { aggregate_scores(mos_only, idx, kDomains, ResponseTask::kEss); }) == ErrorCode::kEmptyTable);
  const std::vector<ResponseRecord> stray = {{"p", "nope", ResponseTask::kClassify, "sad", 0, ""}};
  CHECK(error_code_of([&] { aggregate_classification(stray, idx, kDomains); }) == ErrorCode::kInvalidArgument);
  CHECK(error_code_of([] { target_accuracy({}); }) == ErrorCode::kEmptyTable);
}

TEST_CASE("objective confusion uses the 12-row pair layout") {
  const auto labels = kDomains.labels();
  std::vector<PredictedStimulus> always_target;
  for (const auto& s : labels) {
    for (const auto& t : labels) {
      if (s == t) continue;
      for (int i = 0; i < 3; ++i) always_target.push_back({s, t, t});
    }
  }
  REQUIRE(always_target.size() == 36);
  const ConfusionTable t = objective_confusion(always_target, kDomains);
  CHECK(t.layout == ConfusionTable::Layout::kSourceTarget);
  REQUIRE(t.rows.size() == 12);
  for (const auto& r : t.rows) {
    CHECK(r.total == 3);
    for (std::size_t c = 0; c < 4; ++c) CHECK(r.percent[c] == (labels[c] == r.target ? 100.0 : 0.0));
  }
  check_rows_sum_to_100(t);
  CHECK(target_accuracy(always_target) == 1.0);
  const ConfusionTable avg = average_over_sources(t);
  for (const auto& r : avg.rows) {
    for (std::size_t c = 0; c < 4; ++c) CHECK(r.percent[c] == (labels[c] == r.target ? 100.0 : 0.0));
  }
  std::vector<PredictedStimulus> always_neutral = always_target;
  for (auto& p : always_neutral) p.predicted = "neutral";
  CHECK(target_accuracy(always_neutral) == doctest::Approx(0.25));
  CHECK(error_code_of([&] { objective_confusion({{"sad", "sad", "sad"}}, kDomains); }) == ErrorCode::kInvalidArgument);
  CHECK(error_code_of([&] { objective_confusion({{"sad", "angry", "bored"}}, kDomains); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("table JSON carries rounded percentages and counts") {
  const auto t = aggregate_classification(fixture_classify_responses(), fixture_index(), kDomains);
  const auto j = table_to_json(t.averaged);
  CHECK(j["layout"] == "target");
  CHECK(j["labels"] == kDomains.labels());
  CHECK(j["rows"][0]["target"] == "neutral");
  CHECK(j["rows"][0]["percent"][0] == 55.6);
  CHECK(j["rows"][0]["n"] == 90);
  CHECK(!j["rows"][0].contains("source"));
  const auto p = table_to_json(t.converted);
  CHECK(p["rows"].size() == 12);
  CHECK(p["rows"][0]["source"] == "neutral");
  CHECK(p["rows"][0]["target"] == "joyful");
  CHECK(p["rows"][0]["counts"] == std::vector<int>{14, 9, 4, 3});
}
