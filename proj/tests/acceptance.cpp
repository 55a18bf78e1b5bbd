// Acceptance runner: one PASS/FAIL line per criterion, with the measured
// numbers alongside. Usage: acceptance <scratch-dir> [--skip-ordering]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "emgtl/cli.hpp"
#include "emgtl/evaluation.hpp"
#include "emgtl/kernel.hpp"
#include "emgtl/model.hpp"
#include "emgtl/signal.hpp"
#include "emgtl/training.hpp"
#include "gradcheck.hpp"
#include "stat_oracles.hpp"

using namespace emgtl;
using namespace emgtl::test;
namespace k = emgtl::kernel;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;
};

// ---------------------------------------------------------------- gradients

Verdict gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t cases = 0;
  auto note = [&](const Tensor<double>& a, const Tensor<double>& b) {
    worst = std::max(worst, relative_error(a, b));
  };
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    {
      const std::size_t B = 1 + rng() % 3, Ci = 1 + rng() % 4, Co = 1 + rng() % 4, K = 1 + rng() % 4,
                        T = 4 + rng() % 12, dil = 1 + rng() % 3;
      auto x = random_tensor({B, Ci, T}, rng);
      auto w = random_tensor({Co, Ci, K}, rng);
      auto b = random_tensor({Co}, rng);
      const auto R = random_tensor({B, Co, T}, rng);
      auto loss = [&] { return weighted_sum(k::conv1d_causal_forward(x, w, b, dil), R); };
      Tensor<double> dw(w.shape()), db(b.shape());
      note(k::conv1d_causal_backward(x, w, dil, R, &dw, &db), numeric_gradient(x, loss));
      note(dw, numeric_gradient(w, loss));
      note(db, numeric_gradient(b, loss));
    }
    for (const auto mode : {k::BnMode::kTrainNoUpdate, k::BnMode::kInference}) {
      const std::size_t B = 2 + rng() % 3, C = 1 + rng() % 4, T = 2 + rng() % 6;
      auto x = random_tensor({B, C, T}, rng);
      auto gamma = random_tensor({C}, rng);
      auto beta = random_tensor({C}, rng);
      const auto R = random_tensor({B, C, T}, rng);
      k::DomainStats<double> stats(C);
      stats.add("a");
      for (std::size_t c = 0; c < C; ++c) {
        stats.at("a").mean[c] = uniform(rng);
        stats.at("a").var[c] = 0.5 + std::abs(uniform(rng));
      }
      auto loss = [&] { return weighted_sum(k::batch_norm_forward(x, gamma, beta, stats, "a", mode, {}, static_cast<k::BnCache<double>*>(nullptr)), R); };
      k::BnCache<double> cache;
      k::batch_norm_forward(x, gamma, beta, stats, "a", mode, {}, &cache);
      Tensor<double> dg(gamma.shape()), dbt(beta.shape());
      note(k::batch_norm_backward(cache, gamma, R, &dg, &dbt), numeric_gradient(x, loss));
      note(dg, numeric_gradient(gamma, loss));
      note(dbt, numeric_gradient(beta, loss));
    }
    {
      const std::size_t B = 1 + rng() % 3, C = 1 + rng() % 4, T = 1 + rng() % 8;
      auto x = random_tensor({B, C, T}, rng);
      for (auto& v : x.values()) {
        if (std::abs(v) < 1e-3) v = 0.5;
      }
      const auto R = random_tensor({B, C, T}, rng);
      auto relu_loss = [&] { return weighted_sum(k::leaky_relu_forward(x, 0.1), R); };
      note(k::leaky_relu_backward(x, 0.1, R), numeric_gradient(x, relu_loss));
      const auto Rp = random_tensor({B, C}, rng);
      auto pool_loss = [&] { return weighted_sum(k::global_avg_pool_forward(x), Rp); };
      note(k::global_avg_pool_backward(Rp, T), numeric_gradient(x, pool_loss));
      k::Rng drng(seed);
      Tensor<double> mask;
      k::dropout_forward(x, 0.5, true, &drng, &mask);
      auto drop_loss = [&] {
        k::Rng again(seed);
        return weighted_sum(k::dropout_forward(x, 0.5, true, &again, static_cast<Tensor<double>*>(nullptr)), R);
      };
      note(k::dropout_backward(mask, R), numeric_gradient(x, drop_loss));
    }
    {
      const std::size_t B = 1 + rng() % 4, In = 1 + rng() % 6, Out = 2 + rng() % 5;
      auto x = random_tensor({B, In}, rng);
      auto w = random_tensor({Out, In}, rng);
      auto b = random_tensor({Out}, rng);
      std::vector<int> labels(B);
      for (auto& l : labels) l = int(rng() % Out);
      auto loss = [&] { return k::softmax_cross_entropy(k::linear_forward(x, w, b), labels).loss; };
      const auto res = k::softmax_cross_entropy(k::linear_forward(x, w, b), labels);
      Tensor<double> dw(w.shape()), db(b.shape());
      note(k::linear_backward(x, w, res.d_logits, &dw, &db), numeric_gradient(x, loss));
      note(dw, numeric_gradient(w, loss));
      note(db, numeric_gradient(b, loss));
    }
    {
      const std::size_t n = 1 + rng() % 10;
      auto x = random_tensor({n}, rng);
      const auto R = random_tensor({n}, rng);
      const double lambda = 0.1 + std::abs(uniform(rng));
      // forward is the identity, so the numeric gradient of the loss through it is R
      auto id_loss = [&] { return weighted_sum(k::gradient_reversal_forward(x), R); };
      Tensor<double> neg = numeric_gradient(x, id_loss);
      for (auto& v : neg.values()) v *= -lambda;
      note(k::gradient_reversal_backward(R, lambda), neg);

      auto t = random_tensor({n}, rng);
      auto s = random_tensor({n}, rng);
      Tensor<double> alpha({1}, {0.3 + std::abs(uniform(rng))});
      auto loss = [&] { return weighted_sum(k::scaled_add_forward(t, s, alpha[0]), R); };
      double da = 0.0;
      note(k::scaled_add_backward(s, alpha[0], R, &da), numeric_gradient(s, loss));
      note(R, numeric_gradient(t, loss));
      note(Tensor<double>({1}, {da}), numeric_gradient(alpha, loss));
    }
    cases += 1;
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "ops=conv,bn-train,bn-infer,leaky-relu,pool,dropout,linear+ce,reversal,scaled-add cases/op=" << cases
    << " worst_rel_err=" << worst << " time=" << secs << "s";
  return {worst < 1e-4 && cases >= 20 && secs < 60.0, d.str()};
}

// ---------------------------------------------------------------- training fixtures

std::vector<SessionWindows> three_sessions(std::uint64_t seed) {
  SynthSpec spec;
  spec.gesture_seconds = 1.0;
  spec.num_sessions = 3;
  spec.eval_runs_per_session = 0;
  spec.seed = seed;
  std::vector<SessionWindows> out;
  for (const auto& d : synthesize(spec)) out.push_back(preprocess_session(d, {}));
  return out;
}

TcnConfig small_model() {
  TcnConfig c;
  c.channels = {8, 8};
  return c;
}

TrainSpec small_train(std::uint64_t seed) {
  TrainSpec s;
  s.lr = 0.01;
  s.batch_size = 64;
  s.max_epochs = 4;
  s.seed = seed;
  return s;
}

Verdict freeze_and_clamp() {
  std::size_t mismatched = 0, out_of_range = 0, steps = 0, frozen_checked = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto ss = three_sessions(seed);
    TcnModel<float> source(small_model(), stage_seed(seed, "adann", 3));
    for (int i = 0; i < 2; ++i) source.add_domain(session_key(i + 1));
    adann_pretrain(source, {{"s1", &ss[0].train}, {"s2", &ss[1].train}}, small_train(seed));
    TadannModel<float> t = build_tadann(source, small_model(), "s3", stage_seed(seed, "tadann", 3));

    std::vector<std::vector<float>> snapshot;
    for (const auto* p : t.source().parameters()) {
      if (p->name.find(".bn.") == std::string::npos) snapshot.emplace_back(p->value.values().begin(), p->value.values().end());
    }
    TrainHooks hooks;
    hooks.after_step = [&] {
      ++steps;
      for (const auto& a : t.coefficients()) out_of_range += !(a.value[0] >= 0.0f && a.value[0] <= 2.0f);
    };
    train_tadann(t, ss[2].train, small_train(seed), hooks);

    std::size_t i = 0;
    for (const auto* p : t.source().parameters()) {
      if (p->name.find(".bn.") != std::string::npos) continue;
      const std::vector<float> now(p->value.values().begin(), p->value.values().end());
      // bitwise comparison, so -0.0 vs 0.0 or NaN payloads would count as changes
      mismatched += now.size() != snapshot[i].size() ||
                    std::memcmp(now.data(), snapshot[i].data(), now.size() * sizeof(float)) != 0;
      ++i;
      ++frozen_checked;
    }
  }
  std::ostringstream d;
  d << "seeds=5 frozen_tensors_checked=" << frozen_checked << " changed=" << mismatched << " steps=" << steps
    << " coefficient_violations=" << out_of_range;
  return {mismatched == 0 && out_of_range == 0 && steps > 0 && frozen_checked > 0, d.str()};
}

Verdict bank_isolation() {
  const auto ss = three_sessions(11);
  TcnModel<float> m(small_model(), 3);
  const std::vector<DomainData> domains{{"s1", &ss[0].train}, {"s2", &ss[1].train}, {"s3", &ss[2].train}};
  for (const auto& d : domains) m.add_domain(d.key);
  std::vector<k::DomainStats<float>> before;
  std::string source;
  std::size_t steps = 0, foreign_changes = 0, comparisons = 0;
  TrainHooks hooks;
  hooks.on_adann_step = [&](const AdannStep& st) {
    before.clear();
    for (std::size_t b = 0; b < m.config().num_blocks(); ++b) before.push_back(m.bn_stats(b));
    source = st.source_key;
  };
  hooks.after_step = [&] {
    ++steps;
    for (std::size_t b = 0; b < m.config().num_blocks(); ++b) {
      for (const auto& key : m.bn_stats(b).keys()) {
        if (key == source) continue;
        ++comparisons;
        foreign_changes += !(m.bn_stats(b).at(key) == before[b].at(key));
      }
    }
  };
  TrainSpec spec = small_train(3);
  spec.max_epochs = 6;
  adann_pretrain(m, domains, spec, hooks);
  std::ostringstream d;
  d << "adann_steps=" << steps << " foreign_bank_comparisons=" << comparisons << " changed=" << foreign_changes;
  return {steps > 0 && comparisons > 0 && foreign_changes == 0, d.str()};
}

// ---------------------------------------------------------------- scheme ordering

// Benchmark configuration for the drift comparison. The generator settings
// keep the within-session task hard enough that the calibration schemes
// separate; see the README.
struct OrderingSetup {
  SynthSpec synth;
  TcnConfig model;
  TrainSpec train;
};

OrderingSetup ordering_setup(std::uint64_t seed) {
  OrderingSetup s;
  s.synth.num_sessions = 3;
  s.synth.gesture_seconds = 2.0;
  s.synth.eval_runs_per_session = 0;
  s.synth.shift_sd_channels = 0.3;
  s.synth.noise_level = 0.15;
  s.synth.seed = seed;
  s.model.channels = {16, 16, 16};
  s.train.lr = 0.01;
  s.train.batch_size = 64;
  s.train.max_epochs = 30;
  s.train.seed = seed;
  return s;
}

Verdict scheme_ordering() {
  const auto t0 = Clock::now();
  const std::vector<CalibrationScheme> schemes{CalibrationScheme::kNoCalibration, CalibrationScheme::kDelayedCalibration,
                                               CalibrationScheme::kRecalibration, CalibrationScheme::kTadann};
  std::map<CalibrationScheme, double> mean;
  int tadann_wins = 0;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const OrderingSetup s = ordering_setup(seed);
    SessionPlan plan;
    plan.participant = "P01";
    for (const auto& d : synthesize(s.synth)) plan.sessions.push_back(preprocess_session(d, {}));
    SchemeRunOptions opt;
    opt.model = s.model;
    opt.train = s.train;
    const auto out = run_schemes(plan, schemes, opt);
    std::map<CalibrationScheme, double> acc;
    for (const auto sc : schemes) {
      acc[sc] = out.at(sc).sessions.at(2).offline_accuracy;  // third session
      mean[sc] += acc[sc] / 5.0;
    }
    tadann_wins += acc[CalibrationScheme::kTadann] - acc[CalibrationScheme::kRecalibration] > 0;
    per_seed << " seed" << seed << "=" << format_fixed(acc[CalibrationScheme::kNoCalibration], 3) << "/"
             << format_fixed(acc[CalibrationScheme::kDelayedCalibration], 3) << "/"
             << format_fixed(acc[CalibrationScheme::kRecalibration], 3) << "/"
             << format_fixed(acc[CalibrationScheme::kTadann], 3);
  }
  const double secs = seconds_since(t0);
  const double no = mean[CalibrationScheme::kNoCalibration], de = mean[CalibrationScheme::kDelayedCalibration],
               re = mean[CalibrationScheme::kRecalibration], ta = mean[CalibrationScheme::kTadann];
  std::ostringstream d;
  d << "mean no/delayed/recal/tadann=" << format_fixed(no, 4) << "/" << format_fixed(de, 4) << "/"
    << format_fixed(re, 4) << "/" << format_fixed(ta, 4) << " tadann>recal in " << tadann_wins << "/5"
    << " time=" << format_fixed(secs, 0) << "s;" << per_seed.str();
  return {no < de && de < re && re <= ta && tadann_wins >= 4 && secs < 900.0, d.str()};
}

// ---------------------------------------------------------------- statistics

Verdict statistics() {
  std::mt19937_64 rng(77);
  std::size_t instances = 0, wilcoxon_compared = 0, failures = 0;
  double worst = 0.0;
  auto within = [&](double got, double want) {
    const double e = std::abs(got - want);
    worst = std::max(worst, e);
    failures += !(e <= 1e-12);
  };
  for (int rep = 0; rep < 2000; ++rep) {
    const std::size_t n = 2 + rng() % 11;
    std::vector<double> a(n), b(n);
    const bool integer = rep % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = integer ? double(int(rng() % 11) - 5) : std::normal_distribution<double>()(rng);
      b[i] = integer ? double(int(rng() % 11) - 5) : std::normal_distribution<double>()(rng);
    }
    ++instances;
    const auto ow = brute_wilcoxon(a, b);
    if (ow.nonzero >= 5) {
      const auto r = wilcoxon_signed_rank(a, b);
      failures += !r.exact;
      within(r.w_plus, ow.w_plus);
      within(r.w_minus, ow.w_minus);
      within(r.p_value, ow.p);
      ++wilcoxon_compared;
    } else {
      try {
        wilcoxon_signed_rank(a, b);
        ++failures;
      } catch (const DegenerateInput&) {
      }
    }
    if (const auto dz = brute_dz(a, b)) {
      within(cohens_dz(a, b) / std::max(1.0, std::abs(*dz)), *dz / std::max(1.0, std::abs(*dz)));
    }
    if (const auto r = brute_pearson(a, b)) within(pearson_r(a, b), *r);
  }
  const auto five = wilcoxon_signed_rank(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>(5, 0.0));
  std::ostringstream d;
  d << "instances=" << instances << " wilcoxon_compared=" << wilcoxon_compared << " worst_abs_err=" << worst
    << " p([1..5])=" << five.p_value;
  return {failures == 0 && five.p_value == 0.0625 && five.exact, d.str()};
}

// ---------------------------------------------------------------- filter

Verdict filter() {
  const FilterSpec spec;
  const auto c = design_bandpass(spec);
  const double g250 = magnitude_response(c, 250.0), g0 = magnitude_response(c, 0.0);
  // analytic Butterworth magnitude at the pre-warped frequency
  const double fs2 = 2.0 * spec.sample_rate_hz, pi = std::acos(-1.0);
  const double wl = fs2 * std::tan(pi * spec.low_cut_hz / spec.sample_rate_hz);
  const double wh = fs2 * std::tan(pi * spec.high_cut_hz / spec.sample_rate_hz);
  const double w = fs2 * std::tan(pi * 250.0 / spec.sample_rate_hz);
  const double x = (w * w - wl * wh) / ((wh - wl) * w);
  const double oracle = 1.0 / std::sqrt(1.0 + std::pow(x * x, spec.order));
  std::ostringstream d;
  d.precision(10);
  d << "gain(250Hz)=" << g250 << " analytic=" << oracle << " gain(0Hz)=" << g0;
  return {std::abs(g250 - 1.0) <= 0.01 && std::abs(oracle - 1.0) <= 0.01 && std::abs(g250 - oracle) <= 1e-7 &&
              g0 <= 1e-6,
          d.str()};
}

// ---------------------------------------------------------------- windowing

Verdict windowing() {
  const auto t0 = Clock::now();
  std::size_t triples = 0, mismatches = 0;
  std::vector<std::size_t> starts;
  for (std::size_t W = 1; W <= 200; ++W) {
    for (std::size_t S = 1; S <= W; ++S) {
      for (std::size_t T = 0; T <= 1000; ++T) {
        starts.clear();
        for (std::size_t t = 0; t + W <= T; t += S) starts.push_back(t);
        const auto w = segment_windows(T, W, S);
        bool ok = w.size() == starts.size() && window_count(T, W, S) == starts.size();
        for (std::size_t i = 0; ok && i < w.size(); ++i) ok = w[i].start == starts[i] && w[i].length == W;
        mismatches += !ok;
        ++triples;
      }
    }
  }
  const std::size_t five_s = segment_windows(RawSignal(10, 5000), WindowSpec{}).size();
  std::ostringstream d;
  d << "triples=" << triples << " mismatches=" << mismatches << " windows(5s,150ms,50ms)=" << five_s
    << " time=" << format_fixed(seconds_since(t0), 1) << "s";
  return {mismatches == 0 && five_s == 98, d.str()};
}

// ---------------------------------------------------------------- parameter count

Verdict parameters() {
  std::mt19937_64 rng(8);
  std::size_t bad = 0;
  for (int rep = 0; rep < 10; ++rep) {
    TcnConfig c;
    c.channels.assign(1 + rng() % 4, 1 + rng() % 64);
    c.kernel_size = 1 + rng() % 5;
    c.in_channels = 1 + rng() % 12;
    c.num_gestures = 2 + rng() % 12;
    TcnModel<float> m(c, 1);
    std::size_t n = 0;
    for (const auto* p : m.classifier_parameters()) n += p->value.size();
    bad += n != analytic_parameter_count(c);
  }
  const std::size_t def = analytic_parameter_count(TcnConfig{});
  const long delta = 104788L - long(def);
  std::ostringstream d;
  d << "random_configs=10 mismatches=" << bad << " default=" << def << " delta_vs_104788=" << delta;
  return {bad == 0 && def == 104715 && delta == 73, d.str()};
}

// ---------------------------------------------------------------- determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Verdict determinism(const fs::path& scratch) {
  const fs::path cfg = scratch / "determinism.json";
  std::ofstream(cfg) << R"({
  "dataset": {"synth": {"num_sessions": 3, "gesture_seconds": 1.0, "eval_trials": 6, "eval_trial_seconds": 3.0}},
  "seeds": [1, 2],
  "train": {"max_epochs": 2, "batch_size": 64},
  "model": {"channels": [4, 4]}
})";
  std::vector<std::map<std::string, std::string>> trees;
  for (const char* run : {"run_a", "run_b"}) {
    const fs::path out = scratch / run;
    const int code = cli::run({"benchmark", "--config", cfg.string(), "--out", out.string(), "--force"});
    if (code != 0) return {false, std::string("benchmark exited with ") + std::to_string(code)};
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(out)) {
      if (e.is_regular_file()) files[fs::relative(e.path(), out).generic_string()] = slurp(e.path());
    }
    trees.push_back(std::move(files));
  }
  std::size_t differing = 0;
  for (const auto& [name, body] : trees[0]) differing += !trees[1].count(name) || trees[1].at(name) != body;
  differing += trees[1].size() != trees[0].size();
  std::ostringstream d;
  d << "files=" << trees[0].size() << " differing=" << differing;
  return {differing == 0 && trees[0].count("summary.tsv") == 1, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path scratch = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "emgtl_acceptance";
  bool skip_ordering = false;
  for (int i = 2; i < argc; ++i) skip_ordering |= std::string(argv[i]) == "--skip-ordering";
  fs::create_directories(scratch);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"gradient correctness", gradients},
      {"source freeze and coefficient clamp", freeze_and_clamp},
      {"BN bank isolation", bank_isolation},
      {"scheme ordering", scheme_ordering},
      {"statistics oracles", statistics},
      {"filter fidelity", filter},
      {"windowing", windowing},
      {"parameter accounting", parameters},
      {"determinism", [&] { return determinism(scratch); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (i == 3 && skip_ordering) {
      std::printf("%zu %-36s SKIP\n", i + 1, criteria[i].first.c_str());
      continue;
    }
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%zu %-36s %s  %s\n", i + 1, criteria[i].first.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
