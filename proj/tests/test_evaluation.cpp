#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "emgtl/evaluation.hpp"
#include "stat_oracles.hpp"

using namespace emgtl;
using namespace emgtl::test;

TEST_CASE("accuracy") {
  const std::vector<int> p{1, 2, 3, 4}, l{1, 2, 0, 4};
  CHECK(accuracy(p, l) == 0.75);
  const std::vector<int> none;
  CHECK_THROWS_AS(accuracy(none, none), UsageError);
  const std::vector<int> shorter{1};
  CHECK_THROWS_AS(accuracy(p, shorter), UsageError);
}

TEST_CASE("Wilcoxon exact p for differences 1..5") {
  const std::vector<double> a{1, 2, 3, 4, 5}, b(5, 0.0);
  const auto r = wilcoxon_signed_rank(a, b);
  CHECK(r.exact);
  CHECK(r.n == 5);
  CHECK(r.w_plus == 15.0);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 0.0625);
}

TEST_CASE("statistics match brute force on random small samples") {
  std::mt19937_64 rng(2024);
  std::size_t compared = 0;
  for (int rep = 0; rep < 400; ++rep) {
    const std::size_t n = 2 + rng() % 11;  // 2..12
    std::vector<double> a(n), b(n);
    const bool integer = rep % 2 == 0;  // integer draws create ties and zeros
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = integer ? double(int(rng() % 11) - 5) : std::normal_distribution<double>()(rng);
      b[i] = integer ? double(int(rng() % 11) - 5) : std::normal_distribution<double>()(rng);
    }
    const auto oracle = brute_wilcoxon(a, b);
    if (oracle.nonzero < 5) {
      CHECK_THROWS_AS(wilcoxon_signed_rank(a, b), DegenerateInput);
    } else {
      const auto r = wilcoxon_signed_rank(a, b);
      CHECK(r.exact);
      CHECK(r.n == oracle.nonzero);
      CHECK(std::abs(r.w_plus - oracle.w_plus) <= 1e-12);
      CHECK(std::abs(r.w_minus - oracle.w_minus) <= 1e-12);
      CHECK(std::abs(r.p_value - oracle.p) <= 1e-12);
      ++compared;
    }
    const auto dz = brute_dz(a, b);
    if (dz) {
      CHECK(std::abs(cohens_dz(a, b) - *dz) <= 1e-12 * std::max(1.0, std::abs(*dz)));
    } else {
      CHECK_THROWS_AS(cohens_dz(a, b), DegenerateInput);
    }
    const auto r = brute_pearson(a, b);
    if (r) {
      CHECK(std::abs(pearson_r(a, b) - *r) <= 1e-12);
    } else {
      CHECK_THROWS_AS(pearson_r(a, b), DegenerateInput);
    }
  }
  CHECK(compared > 100);
}

TEST_CASE("Wilcoxon normal approximation above the exact limit") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 26 + rng() % 30;
    std::vector<double> a(n), b(n, 0.0);
    for (auto& v : a) v = double(int(rng() % 21) - 8);
    const auto r = wilcoxon_signed_rank(a, b);
    CHECK_FALSE(r.exact);
    const auto o = normal_wilcoxon(a, b);
    CHECK(std::abs(r.p_value - o) <= 1e-12);
  }
}

TEST_CASE("Wilcoxon degenerate inputs") {
  const std::vector<double> a{1, 2, 3, 4}, b(4, 0.0);
  CHECK_THROWS_AS(wilcoxon_signed_rank(a, b), DegenerateInput);
  const std::vector<double> same{1, 2, 3, 4, 5, 6};
  CHECK_THROWS_AS(wilcoxon_signed_rank(same, same), DegenerateInput);
}

TEST_CASE("Cohen's dz: constant differences are degenerate") {
  const std::vector<double> a{1, 2, 3}, b{0, 1, 2};
  CHECK_THROWS_AS(cohens_dz(a, b), DegenerateInput);
}

TEST_CASE("transition trimming") {
  WindowSet w;
  w.channels = 1;
  w.length = 1;
  const float x[1] = {0};
  for (double t : {0.0, 0.5, 1.45, 1.5, 2.0}) {
    WindowContext c;
    c.time_since_cue_s = t;
    w.push(x, 0, c);
  }
  CHECK(trim_transitions(w, 1.5) == std::vector<std::size_t>{3, 4});
  CHECK(trim_transitions(w, 0.0).size() == 5);
}

TEST_CASE("intensity bins against direct counting") {
  std::mt19937_64 rng(1);
  std::vector<int> p(500), l(500);
  std::vector<double> ratio(500);
  for (std::size_t i = 0; i < 500; ++i) {
    l[i] = int(rng() % 3);
    p[i] = rng() % 4 == 0 ? int(rng() % 3) : l[i];
    ratio[i] = i == 7 ? std::nan("") : std::uniform_real_distribution<double>(0, 1.2)(rng);
  }
  const auto a = bin_by_intensity(p, l, ratio, 0.05, 1);
  std::size_t total = 0;
  for (const auto& b : a.bins) {
    std::size_t count = 0, correct = 0;
    for (std::size_t i = 0; i < 500; ++i) {
      if (ratio[i] >= b.lo0 && ratio[i] < b.hi0) {
        ++count;
        correct += p[i] == l[i];
      }
    }
    CHECK(b.count == count);
    CHECK(b.correct == correct);
    CHECK(b.hi0 - b.lo0 == doctest::Approx(0.05));
    total += count;
  }
  CHECK(total == 499);

  const auto strict = bin_by_intensity(p, l, ratio, 0.05, 30);
  for (const auto& b : strict.bins) CHECK(b.count >= 30);
  std::size_t kept = 0;
  for (const auto& b : strict.bins) kept += b.count;
  CHECK(kept + strict.suppressed_windows == 499);
}

TEST_CASE("orientation bins suppress sparse cells") {
  std::mt19937_64 rng(2);
  std::vector<int> p, l;
  std::vector<double> pitch, yaw;
  for (int i = 0; i < 1200; ++i) {
    p.push_back(i % 2);
    l.push_back(0);
    pitch.push_back(i < 600 ? 1.0 : std::uniform_real_distribution<double>(-45, 45)(rng));
    yaw.push_back(i < 600 ? 2.0 : std::uniform_real_distribution<double>(-70, 70)(rng));
  }
  const auto a = bin_by_orientation(p, l, pitch, yaw, 5.0, 500);
  REQUIRE(a.bins.size() == 1);
  CHECK(a.bins[0].lo0 == 0.0);
  CHECK(a.bins[0].lo1 == 0.0);
  CHECK(a.bins[0].count >= 600);
  CHECK(a.suppressed_windows + a.bins[0].count == 1200);
}

TEST_CASE("accuracy table averages seeds within a participant first") {
  AccuracyTable t;
  t.add({"recalibration", 2, "P01", 1, "offline", 90, 100});
  t.add({"recalibration", 2, "P01", 2, "offline", 70, 100});
  t.add({"recalibration", 2, "P02", 1, "offline", 50, 100});
  CHECK(*t.mean("recalibration", 2) == doctest::Approx((0.8 + 0.5) / 2));
  CHECK_FALSE(t.mean("tadann", 2).has_value());
  CHECK(t.paired("recalibration", 2).size() == 3);
  CHECK(t.sessions() == std::vector<int>{2});
  const std::string tsv = t.to_tsv();
  CHECK(tsv.rfind("scheme\tsession\tparticipant\tseed\tsplit\tcorrect\ttotal\taccuracy\n", 0) == 0);
  CHECK(tsv.find("recalibration\t2\tP01\t1\toffline\t90\t100\t0.900000\n") != std::string::npos);
}

TEST_CASE("fixed formatting") {
  CHECK(format_fixed(0.5) == "0.500000");
  CHECK(format_fixed(-0.0000001) == "0.000000");
  CHECK(format_fixed(std::nan("")) == "NA");
  CHECK(format_fixed(1.23456789, 3) == "1.235");
}

TEST_CASE("MAV/MSA day report") {
  SynthSpec spec;
  spec.gesture_seconds = 1.0;
  spec.num_sessions = 3;
  spec.num_participants = 2;
  spec.eval_trials = 5;
  spec.eval_trial_seconds = 2.0;
  std::vector<SessionWindows> sessions;
  for (const auto& d : synthesize(spec)) sessions.push_back(preprocess_session(d, {}));
  const MavMsaReport rep = mav_msa_day_report(sessions);
  CHECK(rep.days.size() == 6);
  for (const auto& d : rep.days) {
    CHECK(d.train_windows == 3 * 11 * 18);
    CHECK(d.train_mav_mean > 0.0);
    CHECK(d.eval_windows > 0);
  }
  REQUIRE(rep.comparisons.size() == 4);
  for (const auto& c : rep.comparisons) {
    CHECK(c.pairs == 2);
    CHECK(c.note == "insufficient pairs");
    CHECK_FALSE(c.test.has_value());
  }
  const std::vector<SessionWindows> one(sessions.begin(), sessions.begin() + 1);
  CHECK_THROWS_AS(mav_msa_day_report(one), UsageError);
}
