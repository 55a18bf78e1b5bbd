#include "emgtl/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace emgtl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename T>
void shuffle(std::vector<T>& v, kernel::Rng& rng) {
  // Fisher-Yates with an explicit draw so the order does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = std::size_t(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

std::vector<std::vector<std::size_t>> batches_of(const std::vector<std::size_t>& order,
                                                 std::size_t batch) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch) {
    out.emplace_back(order.begin() + std::ptrdiff_t(i),
                     order.begin() + std::ptrdiff_t(std::min(order.size(), i + batch)));
  }
  return out;
}

/// Early stopping with lr annealing around one epoch callback.
template <typename Real, typename EpochFn, typename ValidateFn, typename SaveFn, typename RestoreFn>
TrainHistory fit(const TrainSpec& spec, Adam<Real>& adam, EpochFn run_epoch, ValidateFn validate,
                 SaveFn save, RestoreFn restore) {
  TrainHistory history;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0, plateau = 0;
  for (int epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = adam.lr();
    rec.train_loss = run_epoch();
    rec.validation_loss = validate();
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.validation_loss)) {
      throw NumericalFault("training: non-finite loss at epoch " + std::to_string(epoch));
    }
    if (rec.validation_loss < best) {
      best = rec.validation_loss;
      history.best_epoch = epoch;
      since_best = 0;
      plateau = 0;
      rec.improved = true;
      save();
    } else {
      ++since_best;
      ++plateau;
    }
    if (plateau >= spec.anneal_patience) {
      adam.set_lr(adam.lr() / spec.anneal_factor);
      plateau = 0;
      rec.annealed = true;
    }
    history.epochs.push_back(rec);
    if (since_best >= spec.early_stop_patience) {
      history.early_stopped = true;
      break;
    }
  }
  history.best_validation_loss = best;
  restore();
  return history;
}

template <typename Real>
double loss_over(std::span<const std::size_t> indices, std::size_t chunk, const WindowSet& data,
                 const std::function<Tensor<Real>(const Tensor<Real>&)>& logits) {
  if (indices.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < indices.size(); i += chunk) {
    const auto part = indices.subspan(i, std::min(chunk, indices.size() - i));
    const Tensor<Real> x = make_batch<Real>(data, part);
    const auto labels = batch_labels(data, part);
    total += kernel::softmax_cross_entropy(logits(x), labels).loss * double(part.size());
  }
  return total / double(indices.size());
}

std::uint64_t resolve_split_seed(const TrainSpec& spec) {
  return spec.split_seed ? *spec.split_seed : spec.seed;
}

}  // namespace

void TrainSpec::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw UsageError("train spec: 'lr' must be positive");
  if (batch_size < 1) throw UsageError("train spec: 'batch_size' must be at least 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw UsageError("train spec: 'validation_fraction' must lie in (0, 1)");
  }
  if (early_stop_patience < 1) throw UsageError("train spec: 'early_stop_patience' must be >= 1");
  if (anneal_patience < 1) throw UsageError("train spec: 'anneal_patience' must be >= 1");
  if (!(anneal_factor >= 1.0)) throw UsageError("train spec: 'anneal_factor' must be >= 1");
  if (max_epochs < 1) throw UsageError("train spec: 'max_epochs' must be >= 1");
  if (!std::isfinite(lambda)) throw UsageError("train spec: 'lambda' must be finite");
  if (!(domain_loss_weight >= 0.0)) throw UsageError("train spec: 'domain_loss_weight' must be >= 0");
}

Split stratified_split(std::span<const int> labels, double fraction, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  kernel::Rng rng(seed);
  Split split;
  for (auto& [label, idx] : by_class) {
    shuffle(idx, rng);
    const auto n_val = std::size_t(std::llround(fraction * double(idx.size())));
    if (n_val >= idx.size()) {
      throw DataError("validation split leaves class " + std::to_string(label) +
                      " without training windows");
    }
    split.validation.insert(split.validation.end(), idx.begin(), idx.begin() + std::ptrdiff_t(n_val));
    split.train.insert(split.train.end(), idx.begin() + std::ptrdiff_t(n_val), idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

template <typename Real>
Tensor<Real> make_batch(const WindowSet& data, std::span<const std::size_t> indices) {
  Tensor<Real> x({indices.size(), data.channels, data.length});
  Real* out = x.data();
  for (std::size_t i : indices) {
    for (float v : data.window(i)) *out++ = Real(v);
  }
  return x;
}

std::vector<int> batch_labels(const WindowSet& data, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(data.labels.at(i));
  return out;
}

template <typename Real>
double evaluate_loss(const TcnModel<Real>& model, const WindowSet& data,
                     std::span<const std::size_t> indices, const std::string& key,
                     std::size_t chunk) {
  return loss_over<Real>(indices, chunk, data,
                         [&](const Tensor<Real>& x) { return model.logits(x, key); });
}

template <typename Real>
double supervised_accumulate(TcnModel<Real>& model, const Tensor<Real>& x,
                             std::span<const int> labels, const std::string& key,
                             kernel::Rng& rng) {
  FeatureTrace<Real> trace;
  const Tensor<Real> pooled = model.features(x, key, Phase::kTrain, &rng, &trace);
  const auto loss = kernel::softmax_cross_entropy(model.classify_logits(pooled), labels);
  const Tensor<Real> d_pooled = model.classify_backward(pooled, loss.d_logits);
  model.backward_features(trace, d_pooled);
  return loss.loss;
}

template <typename Real>
double adann_accumulate(TcnModel<Real>& model, const Tensor<Real>& xs, std::span<const int> ys,
                        const std::string& source_key, const Tensor<Real>& xt,
                        const std::string& target_key, double lambda, double domain_weight,
                        kernel::Rng& rng) {
  const double ns = double(xs.dim(0)), nt = double(xt.dim(0));
  // mean domain loss over both batches: each half weighted by its share
  const double ws = domain_weight * ns / (ns + nt), wt = domain_weight * nt / (ns + nt);

  FeatureTrace<Real> src;
  const Tensor<Real> ps = model.features(xs, source_key, Phase::kTrain, &rng, &src);
  const auto cls = kernel::softmax_cross_entropy(model.classify_logits(ps), ys);
  Tensor<Real> d_ps = model.classify_backward(ps, cls.d_logits);
  const std::vector<int> zeros(xs.dim(0), 0);
  auto dom_s = kernel::softmax_cross_entropy(model.domain_logits(ps), zeros);
  for (auto& v : dom_s.d_logits.values()) v = Real(double(v) * ws);
  const Tensor<Real> d_rev_s = model.domain_backward(ps, dom_s.d_logits, lambda);
  for (std::size_t i = 0; i < d_ps.size(); ++i) d_ps[i] += d_rev_s[i];
  model.backward_features(src, d_ps);

  FeatureTrace<Real> tgt;
  const Tensor<Real> pt = model.features(xt, target_key, Phase::kTrainFrozenStats, &rng, &tgt);
  const std::vector<int> ones(xt.dim(0), 1);
  auto dom_t = kernel::softmax_cross_entropy(model.domain_logits(pt), ones);
  for (auto& v : dom_t.d_logits.values()) v = Real(double(v) * wt);
  const Tensor<Real> d_pt = model.domain_backward(pt, dom_t.d_logits, lambda);
  model.backward_features(tgt, d_pt);

  return cls.loss + ws * dom_s.loss + wt * dom_t.loss;
}

template <typename Real>
TrainHistory train_supervised(TcnModel<Real>& model, const WindowSet& data, const std::string& key,
                              const TrainSpec& spec, const TrainHooks& hooks) {
  spec.validate();
  if (data.empty()) throw DataError("train_supervised: no training windows");
  model.add_domain(key);
  const Split split = stratified_split(data.labels, spec.validation_fraction, resolve_split_seed(spec));
  kernel::Rng rng(spec.seed);
  Adam<Real> adam(AdamOptions{spec.lr});
  TcnModel<Real> best = model;
  auto epoch = [&] {
    std::vector<std::size_t> order = split.train;
    shuffle(order, rng);
    double total = 0.0;
    for (const auto& batch : batches_of(order, spec.batch_size)) {
      if (hooks.on_batch) hooks.on_batch(data, batch);
      const Tensor<Real> x = make_batch<Real>(data, batch);
      const auto labels = batch_labels(data, batch);
      model.zero_grad();
      total += supervised_accumulate(model, x, labels, key, rng) * double(batch.size());
      auto params = model.classifier_parameters();
      adam.step(params);
      if (hooks.after_step) hooks.after_step();
    }
    return total / double(order.size());
  };
  auto validate = [&] {
    return split.validation.empty() ? 0.0 : evaluate_loss(model, data, split.validation, key);
  };
  return fit(spec, adam, epoch, validate, [&] { best = model; }, [&] { model = best; });
}

template <typename Real>
TrainHistory adann_pretrain(TcnModel<Real>& model, const std::vector<DomainData>& sessions,
                            const TrainSpec& spec, const TrainHooks& hooks) {
  spec.validate();
  if (sessions.size() < 2) {
    throw UsageError("adann_pretrain: needs at least two pre-calibration sessions");
  }
  std::vector<Split> splits;
  std::size_t total_train = 0, total_val = 0;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    if (!sessions[s].windows || sessions[s].windows->empty()) {
      throw DataError("adann_pretrain: session '" + sessions[s].key + "' has no windows");
    }
    model.add_domain(sessions[s].key);
    splits.push_back(stratified_split(sessions[s].windows->labels, spec.validation_fraction,
                                      resolve_split_seed(spec) ^ splitmix64(s + 1)));
    total_train += splits.back().train.size();
    total_val += splits.back().validation.size();
  }
  kernel::Rng rng(spec.seed);
  Adam<Real> adam(AdamOptions{spec.lr});
  TcnModel<Real> best = model;
  const std::size_t steps = (total_train + spec.batch_size - 1) / spec.batch_size;
  std::size_t step_counter = 0;
  auto epoch = [&] {
    double total = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      const std::size_t s = std::size_t(rng() % sessions.size());
      std::size_t t = std::size_t(rng() % (sessions.size() - 1));
      if (t >= s) ++t;
      // source: distinct windows; target: drawn with replacement
      std::vector<std::size_t> pool = splits[s].train;
      const std::size_t b = std::min(spec.batch_size, pool.size());
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t j = i + std::size_t(rng() % (pool.size() - i));
        std::swap(pool[i], pool[j]);
      }
      pool.resize(b);
      std::vector<std::size_t> target(b);
      for (auto& v : target) v = splits[t].train[std::size_t(rng() % splits[t].train.size())];

      const WindowSet& ds = *sessions[s].windows;
      const WindowSet& dt = *sessions[t].windows;
      if (hooks.on_batch) {
        hooks.on_batch(ds, pool);
        hooks.on_batch(dt, target);
      }
      if (hooks.on_adann_step) {
        hooks.on_adann_step({step_counter, sessions[s].key, sessions[t].key, 0, 1, pool, target});
      }
      ++step_counter;
      const Tensor<Real> xs = make_batch<Real>(ds, pool);
      const Tensor<Real> xt = make_batch<Real>(dt, target);
      const auto ys = batch_labels(ds, pool);
      model.zero_grad();
      total += adann_accumulate(model, xs, ys, sessions[s].key, xt, sessions[t].key, spec.lambda,
                                spec.domain_loss_weight, rng);
      auto params = model.parameters();
      adam.step(params);
      if (hooks.after_step) hooks.after_step();
    }
    return total / double(steps);
  };
  auto validate = [&] {
    if (total_val == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t s = 0; s < sessions.size(); ++s) {
      sum += evaluate_loss(model, *sessions[s].windows, splits[s].validation, sessions[s].key) *
             double(splits[s].validation.size());
    }
    return sum / double(total_val);
  };
  return fit(spec, adam, epoch, validate, [&] { best = model; }, [&] { model = best; });
}

template <typename Real>
TrainHistory train_tadann(TadannModel<Real>& model, const WindowSet& data, const TrainSpec& spec,
                          const TrainHooks& hooks) {
  spec.validate();
  if (data.empty()) throw DataError("train_tadann: no training windows");
  const Split split = stratified_split(data.labels, spec.validation_fraction, resolve_split_seed(spec));
  kernel::Rng rng(spec.seed);
  Adam<Real> adam(AdamOptions{spec.lr});
  TadannModel<Real> best = model;
  auto epoch = [&] {
    std::vector<std::size_t> order = split.train;
    shuffle(order, rng);
    double total = 0.0;
    for (const auto& batch : batches_of(order, spec.batch_size)) {
      if (hooks.on_batch) hooks.on_batch(data, batch);
      const Tensor<Real> x = make_batch<Real>(data, batch);
      const auto labels = batch_labels(data, batch);
      model.zero_grad();
      TadannTrace<Real> trace;
      const Tensor<Real> logits = model.forward(x, Phase::kTrain, &rng, &trace);
      const auto loss = kernel::softmax_cross_entropy(logits, labels);
      model.backward(trace, loss.d_logits);
      auto params = model.parameters();
      adam.step(params);
      model.clamp_coefficients();
      if (hooks.after_step) hooks.after_step();
      total += loss.loss * double(batch.size());
    }
    return total / double(order.size());
  };
  auto validate = [&] {
    return loss_over<Real>(split.validation, 1024, data,
                           [&](const Tensor<Real>& x) { return model.logits(x); });
  };
  return fit(spec, adam, epoch, validate, [&] { best = model; }, [&] { model = best; });
}

// --- schemes -----------------------------------------------------------------

std::string scheme_name(CalibrationScheme scheme) {
  switch (scheme) {
    case CalibrationScheme::kNoCalibration: return "no_calibration";
    case CalibrationScheme::kRecalibration: return "recalibration";
    case CalibrationScheme::kDelayedCalibration: return "delayed_calibration";
    case CalibrationScheme::kTadann: return "tadann";
  }
  return "unknown";
}

CalibrationScheme parse_scheme(const std::string& name) {
  for (CalibrationScheme s : all_schemes()) {
    if (scheme_name(s) == name) return s;
  }
  throw UsageError("unknown scheme '" + name +
                   "' (expected no_calibration, recalibration, delayed_calibration or tadann)");
}

const std::vector<CalibrationScheme>& all_schemes() {
  static const std::vector<CalibrationScheme> all{
      CalibrationScheme::kNoCalibration, CalibrationScheme::kRecalibration,
      CalibrationScheme::kDelayedCalibration, CalibrationScheme::kTadann};
  return all;
}

void SessionPlan::validate() const {
  if (sessions.empty()) throw UsageError("session plan: no sessions");
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    if (i > 0 && sessions[i].session_index <= sessions[i - 1].session_index) {
      throw DataError("session plan: session indices must be strictly increasing");
    }
    if (sessions[i].train.empty()) {
      throw DataError("session plan: session " + std::to_string(sessions[i].session_index) +
                      " has no training windows");
    }
    for (const WindowSet* set : {&sessions[i].train, &sessions[i].test}) {
      for (const auto& ctx : set->context) {
        if (ctx.cycle == 2) throw DataError("session plan: cycle-2 window in a training or test set");
      }
    }
  }
}

std::string session_key(int session_index) { return "s" + std::to_string(session_index); }

std::uint64_t stage_seed(std::uint64_t base, const std::string& stage, int session_index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : stage) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(base) ^ h ^ splitmix64(std::uint64_t(session_index)));
}

std::vector<int> SessionModel::predict(const WindowSet& windows, std::size_t chunk) const {
  std::vector<int> out;
  out.reserve(windows.size());
  std::vector<std::size_t> idx(windows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < idx.size(); i += chunk) {
    const std::span<const std::size_t> part(idx.data() + i, std::min(chunk, idx.size() - i));
    const Tensor<float> x = make_batch<float>(windows, part);
    const Tensor<float> logits = tadann ? tadann->logits(x) : tcn.value().logits(x, key);
    const auto labels = argmax_rows(logits);
    out.insert(out.end(), labels.begin(), labels.end());
  }
  return out;
}

namespace {

double fraction_correct(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return double(correct) / double(labels.size());
}

TrainSpec stage_spec(const TrainSpec& base, const std::string& stage, int session) {
  TrainSpec s = base;
  s.seed = stage_seed(base.seed, stage, session);
  s.split_seed = stage_seed(base.seed, "split", session);
  return s;
}

}  // namespace

std::map<CalibrationScheme, SchemeOutcome> run_schemes(const SessionPlan& plan,
                                                       std::span<const CalibrationScheme> schemes,
                                                       const SchemeRunOptions& options) {
  plan.validate();
  options.model.validate();
  options.train.validate();
  const std::size_t n = plan.sessions.size();
  for (CalibrationScheme s : schemes) {
    if (s == CalibrationScheme::kDelayedCalibration && n < 3) {
      throw UsageError("delayed_calibration needs at least three sessions");
    }
    if (s == CalibrationScheme::kTadann && n < 2) {
      throw UsageError("tadann needs at least one pre-calibration session");
    }
  }
  auto wants = [&](CalibrationScheme s) {
    return std::find(schemes.begin(), schemes.end(), s) != schemes.end();
  };
  const auto& sessions = plan.sessions;
  std::map<std::string, TrainHistory> histories;

  // chain[i]: fine-tuned through session i (chain[0] is the session-1 model)
  std::vector<std::optional<TcnModel<float>>> chain(n);
  std::function<const TcnModel<float>&(std::size_t)> chained = [&](std::size_t i) -> const TcnModel<float>& {
    if (!chain[i]) {
      const int idx = sessions[i].session_index;
      TcnModel<float> m = i == 0 ? TcnModel<float>(options.model, stage_seed(options.train.seed, "init", idx))
                                 : chained(i - 1);
      const std::string stage = i == 0 ? "supervised" : "recalibration";
      histories[stage + "/" + session_key(idx)] = train_supervised(
          m, sessions[i].train, session_key(idx), stage_spec(options.train, stage, idx), options.hooks);
      chain[i] = std::move(m);
    }
    return *chain[i];
  };

  auto tadann_model = [&](std::size_t i) {
    const int idx = sessions[i].session_index;
    TcnModel<float> source;
    if (i == 1) {
      source = chained(0);
    } else {
      source = TcnModel<float>(options.model, stage_seed(options.train.seed, "adann_init", idx));
      std::vector<DomainData> pre;
      for (std::size_t j = 0; j < i; ++j) pre.push_back({session_key(sessions[j].session_index), &sessions[j].train});
      histories["adann/" + session_key(idx)] =
          adann_pretrain(source, pre, stage_spec(options.train, "adann", idx), options.hooks);
    }
    TadannModel<float> t = build_tadann(source, options.model, session_key(idx),
                                        stage_seed(options.train.seed, "tadann_init", idx));
    histories["tadann/" + session_key(idx)] =
        train_tadann(t, sessions[i].train, stage_spec(options.train, "tadann", idx), options.hooks);
    return t;
  };

  std::map<CalibrationScheme, SchemeOutcome> out;
  for (CalibrationScheme scheme : all_schemes()) {
    if (!wants(scheme)) continue;
    SchemeOutcome o;
    o.scheme = scheme;
    for (std::size_t i = 0; i < n; ++i) {
      SessionModel m;
      switch (scheme) {
        case CalibrationScheme::kNoCalibration:
          m.tcn = chained(0);
          m.key = session_key(sessions[0].session_index);
          break;
        case CalibrationScheme::kRecalibration:
          m.tcn = chained(i);
          m.key = session_key(sessions[i].session_index);
          break;
        case CalibrationScheme::kDelayedCalibration:
          if (i >= 2) {
            m.tcn = chained(i - 1);
            m.key = session_key(sessions[i - 1].session_index);
          }
          break;
        case CalibrationScheme::kTadann:
          if (i == 0) {
            m.tcn = chained(0);
            m.key = session_key(sessions[0].session_index);
          } else {
            m.tadann = tadann_model(i);
            m.key = session_key(sessions[i].session_index);
          }
          break;
      }
      SessionResult r;
      r.session_index = sessions[i].session_index;
      r.defined = m.tcn.has_value() || m.tadann.has_value();
      if (r.defined) {
        r.test_predictions = m.predict(sessions[i].test);
        r.evaluation_predictions = m.predict(sessions[i].evaluation);
        r.offline_accuracy = fraction_correct(r.test_predictions, sessions[i].test.labels);
      }
      o.sessions.push_back(std::move(r));
      o.models.push_back(std::move(m));
    }
    out[scheme] = std::move(o);
  }
  for (auto& [scheme, o] : out) {
    for (const auto& [stage, h] : histories) {
      const bool shared = stage.rfind("supervised", 0) == 0;
      const bool chain_stage = stage.rfind("recalibration", 0) == 0;
      const bool tadann_stage = stage.rfind("adann", 0) == 0 || stage.rfind("tadann", 0) == 0;
      const bool relevant =
          shared || (chain_stage && (scheme == CalibrationScheme::kRecalibration ||
                                     scheme == CalibrationScheme::kDelayedCalibration)) ||
          (tadann_stage && scheme == CalibrationScheme::kTadann);
      if (relevant) o.histories[stage] = h;
    }
  }
  return out;
}

SchemeOutcome run_calibration_scheme(const SessionPlan& plan, CalibrationScheme scheme,
                                     const SchemeRunOptions& options) {
  const CalibrationScheme one[] = {scheme};
  return std::move(run_schemes(plan, one, options).at(scheme));
}

#define EMGTL_INSTANTIATE(Real)                                                                   \
  template Tensor<Real> make_batch<Real>(const WindowSet&, std::span<const std::size_t>);        \
  template double evaluate_loss<Real>(const TcnModel<Real>&, const WindowSet&,                    \
                                      std::span<const std::size_t>, const std::string&,           \
                                      std::size_t);                                               \
  template double supervised_accumulate<Real>(TcnModel<Real>&, const Tensor<Real>&,               \
                                              std::span<const int>, const std::string&,           \
                                              kernel::Rng&);                                      \
  template double adann_accumulate<Real>(TcnModel<Real>&, const Tensor<Real>&,                    \
                                         std::span<const int>, const std::string&,                \
                                         const Tensor<Real>&, const std::string&, double, double, \
                                         kernel::Rng&);                                           \
  template TrainHistory train_supervised<Real>(TcnModel<Real>&, const WindowSet&,                 \
                                               const std::string&, const TrainSpec&,              \
                                               const TrainHooks&);                                \
  template TrainHistory adann_pretrain<Real>(TcnModel<Real>&, const std::vector<DomainData>&,     \
                                             const TrainSpec&, const TrainHooks&);                \
  template TrainHistory train_tadann<Real>(TadannModel<Real>&, const WindowSet&,                  \
                                           const TrainSpec&, const TrainHooks&);

EMGTL_INSTANTIATE(float)
EMGTL_INSTANTIATE(double)

}  // namespace emgtl
