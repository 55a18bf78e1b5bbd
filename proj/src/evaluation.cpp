#include "emgtl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

namespace emgtl {

namespace {

void check_pairs(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw UsageError(std::string(what) + ": inputs differ in length");
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double sd_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / double(v.size() - 1));
}

}  // namespace

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  check_pairs(predictions.size(), labels.size(), "accuracy");
  if (labels.empty()) throw UsageError("accuracy: no predictions");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return double(correct) / double(labels.size());
}

double cohens_dz(std::span<const double> a, std::span<const double> b) {
  check_pairs(a.size(), b.size(), "cohens_dz");
  if (a.size() < 2) throw UsageError("cohens_dz: need at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double sd = sd_of(d);
  if (!(sd > 0.0)) throw DegenerateInput("cohens_dz: degenerate pairs (zero variance of differences)");
  return mean_of(d) / sd;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  check_pairs(a.size(), b.size(), "wilcoxon");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] - b[i];
    if (x != 0.0) d.push_back(x);
  }
  if (d.empty()) throw DegenerateInput("wilcoxon: all differences are zero");
  if (d.size() < 5) {
    throw DegenerateInput("wilcoxon: fewer than 5 non-zero differences (" +
                          std::to_string(d.size()) + ")");
  }
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
  // doubled mid-ranks stay integral
  std::vector<long> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const long r2 = long(i + 1 + j + 1);  // 2 * mean of ranks i+1 .. j+1
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
    const double t = double(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  WilcoxonResult r;
  r.n = n;
  long wp2 = 0, wm2 = 0;
  for (std::size_t i = 0; i < n; ++i) (d[i] > 0 ? wp2 : wm2) += rank2[i];
  r.w_plus = double(wp2) / 2.0;
  r.w_minus = double(wm2) / 2.0;
  r.statistic = std::min(r.w_plus, r.w_minus);
  const long stat2 = std::min(wp2, wm2);

  if (n <= kWilcoxonExactLimit) {
    const long total2 = wp2 + wm2;
    std::vector<double> ways(std::size_t(total2) + 1, 0.0);
    ways[0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (long s = total2; s >= rank2[i]; --s) ways[std::size_t(s)] += ways[std::size_t(s - rank2[i])];
    }
    double tail = 0.0;
    for (long s = 0; s <= stat2; ++s) tail += ways[std::size_t(s)];
    r.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, int(n)));
    r.exact = true;
  } else {
    const double nn = double(n);
    const double mu = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (r.statistic - mu) / std::sqrt(var);
    r.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
    r.exact = false;
  }
  return r;
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
  check_pairs(x.size(), y.size(), "pearson_r");
  if (x.size() < 2) throw UsageError("pearson_r: need at least two points");
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw DegenerateInput("pearson_r: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<std::size_t> trim_transitions(const WindowSet& windows, double trim_s) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows.context[i].time_since_cue_s >= trim_s - 1e-9) keep.push_back(i);
  }
  return keep;
}

BinnedAnalysis bin_by_intensity(std::span<const int> predictions, std::span<const int> labels,
                                std::span<const double> ratios, double bin_width,
                                std::size_t min_count) {
  check_pairs(predictions.size(), labels.size(), "bin_by_intensity");
  check_pairs(ratios.size(), labels.size(), "bin_by_intensity");
  if (!(bin_width > 0.0)) throw UsageError("bin_by_intensity: bin width must be positive");
  std::map<long, Bin> bins;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (std::isnan(ratios[i])) continue;
    const long k = long(std::floor(ratios[i] / bin_width));
    Bin& b = bins[k];
    b.lo0 = double(k) * bin_width;
    b.hi0 = double(k + 1) * bin_width;
    ++b.count;
    b.correct += predictions[i] == labels[i];
  }
  BinnedAnalysis out;
  out.min_count = min_count;
  for (const auto& [k, b] : bins) {
    if (b.count < min_count) {
      ++out.suppressed_bins;
      out.suppressed_windows += b.count;
    } else {
      out.bins.push_back(b);
    }
  }
  return out;
}

BinnedAnalysis bin_by_orientation(std::span<const int> predictions, std::span<const int> labels,
                                  std::span<const double> pitch_deg,
                                  std::span<const double> yaw_deg, double grid_deg,
                                  std::size_t min_count) {
  check_pairs(predictions.size(), labels.size(), "bin_by_orientation");
  check_pairs(pitch_deg.size(), labels.size(), "bin_by_orientation");
  check_pairs(yaw_deg.size(), labels.size(), "bin_by_orientation");
  if (!(grid_deg > 0.0)) throw UsageError("bin_by_orientation: grid must be positive");
  std::map<std::pair<long, long>, Bin> bins;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const long kp = long(std::floor(pitch_deg[i] / grid_deg));
    const long ky = long(std::floor(yaw_deg[i] / grid_deg));
    Bin& b = bins[{kp, ky}];
    b.lo0 = double(kp) * grid_deg;
    b.hi0 = double(kp + 1) * grid_deg;
    b.lo1 = double(ky) * grid_deg;
    b.hi1 = double(ky + 1) * grid_deg;
    ++b.count;
    b.correct += predictions[i] == labels[i];
  }
  BinnedAnalysis out;
  out.min_count = min_count;
  for (const auto& [k, b] : bins) {
    if (b.count < min_count) {
      ++out.suppressed_bins;
      out.suppressed_windows += b.count;
    } else {
      out.bins.push_back(b);
    }
  }
  return out;
}

// --- MAV / MSA --------------------------------------------------------------------

namespace {

struct CloudStats {
  std::size_t windows = 0;
  double mav_mean = 0.0, mav_sd = 0.0;
  MsaResult msa;
};

CloudStats cloud_stats(const std::vector<const WindowSet*>& sets) {
  CloudStats out;
  std::vector<double> scalars, rows;
  std::size_t dims = 0;
  for (const WindowSet* set : sets) {
    for (std::size_t i = 0; i < set->size(); ++i) {
      if (set->context[i].cycle == 2) continue;
      const auto per_channel = mav(set->window(i), set->channels);
      dims = per_channel.size();
      rows.insert(rows.end(), per_channel.begin(), per_channel.end());
      scalars.push_back(std::accumulate(per_channel.begin(), per_channel.end(), 0.0) /
                        double(per_channel.size()));
    }
  }
  out.windows = scalars.size();
  if (scalars.empty()) return out;
  out.mav_mean = mean_of(scalars);
  out.mav_sd = sd_of(scalars);
  if (scalars.size() > dims) {
    out.msa = msa(rows, dims);
  } else {
    out.msa = {0.0, true};
  }
  return out;
}

DayComparison compare(const std::string& quantity, double first_day, double last_day,
                      const std::vector<double>& first, const std::vector<double>& last) {
  DayComparison c;
  c.quantity = quantity;
  c.first_day = first_day;
  c.last_day = last_day;
  c.pairs = first.size();
  if (std::equal(first.begin(), first.end(), last.begin(), last.end())) {
    c.note = "no change";
    return c;
  }
  try {
    c.test = wilcoxon_signed_rank(last, first);
  } catch (const DegenerateInput&) {
    c.note = "insufficient pairs";
  }
  return c;
}

}  // namespace

MavMsaReport mav_msa_day_report(const std::vector<SessionWindows>& sessions) {
  if (sessions.size() < 2) throw UsageError("mav_msa_day_report: need at least two sessions");
  MavMsaReport report;
  std::map<std::string, std::vector<std::size_t>> by_participant;
  for (const auto& s : sessions) {
    DaySummary d;
    d.participant = s.participant;
    d.session_index = s.session_index;
    d.day = s.day_offset;
    const CloudStats tr = cloud_stats({&s.train, &s.test});
    d.train_windows = tr.windows;
    d.train_mav_mean = tr.mav_mean;
    d.train_mav_sd = tr.mav_sd;
    d.train_msa = tr.msa.value;
    d.train_msa_degenerate = tr.msa.degenerate;
    const CloudStats ev = cloud_stats({&s.evaluation});
    d.eval_windows = ev.windows;
    d.eval_mav_mean = ev.mav_mean;
    d.eval_mav_sd = ev.mav_sd;
    d.eval_msa = ev.msa.value;
    d.eval_msa_degenerate = ev.msa.degenerate;
    by_participant[s.participant].push_back(report.days.size());
    report.days.push_back(d);
  }
  std::vector<double> first[4], last[4];
  double first_day = 0.0, last_day = 0.0;
  for (auto& [p, idx] : by_participant) {
    if (idx.size() < 2) continue;
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
      return report.days[i].session_index < report.days[j].session_index;
    });
    const DaySummary& f = report.days[idx.front()];
    const DaySummary& l = report.days[idx.back()];
    first_day = f.day;
    last_day = l.day;
    first[0].push_back(f.train_mav_mean);
    last[0].push_back(l.train_mav_mean);
    first[1].push_back(f.train_msa);
    last[1].push_back(l.train_msa);
    if (f.eval_windows && l.eval_windows) {
      first[2].push_back(f.eval_mav_mean);
      last[2].push_back(l.eval_mav_mean);
      first[3].push_back(f.eval_msa);
      last[3].push_back(l.eval_msa);
    }
  }
  const char* names[4] = {"train_mav", "train_msa", "eval_mav", "eval_msa"};
  for (int q = 0; q < 4; ++q) {
    if (first[q].empty()) continue;
    report.comparisons.push_back(compare(names[q], first_day, last_day, first[q], last[q]));
  }
  return report;
}

// --- accuracy table ----------------------------------------------------------------

void AccuracyTable::add(AccuracyRow row) {
  if (row.total == 0) throw UsageError("accuracy table: row with zero windows");
  rows_.push_back(std::move(row));
}

std::optional<double> AccuracyTable::mean(const std::string& scheme, int session,
                                          const std::string& split) const {
  std::map<std::string, std::vector<double>> per_participant;
  for (const auto& r : rows_) {
    if (r.scheme == scheme && r.session == session && r.split == split) {
      per_participant[r.participant].push_back(r.accuracy());
    }
  }
  if (per_participant.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& [p, v] : per_participant) sum += mean_of(v);
  return sum / double(per_participant.size());
}

std::vector<std::pair<std::string, double>> AccuracyTable::paired(const std::string& scheme,
                                                                  int session,
                                                                  const std::string& split) const {
  std::vector<std::tuple<std::string, std::uint64_t, double>> found;
  for (const auto& r : rows_) {
    if (r.scheme == scheme && r.session == session && r.split == split) {
      found.emplace_back(r.participant, r.seed, r.accuracy());
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [p, seed, acc] : found) out.emplace_back(p + "/" + std::to_string(seed), acc);
  return out;
}

std::vector<int> AccuracyTable::sessions() const {
  std::set<int> s;
  for (const auto& r : rows_) s.insert(r.session);
  return {s.begin(), s.end()};
}

std::string AccuracyTable::to_tsv() const {
  std::vector<const AccuracyRow*> sorted;
  for (const auto& r : rows_) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const AccuracyRow* a, const AccuracyRow* b) {
    return std::tie(a->scheme, a->session, a->participant, a->seed, a->split) <
           std::tie(b->scheme, b->session, b->participant, b->seed, b->split);
  });
  std::ostringstream os;
  os << "scheme\tsession\tparticipant\tseed\tsplit\tcorrect\ttotal\taccuracy\n";
  for (const AccuracyRow* r : sorted) {
    os << r->scheme << '\t' << r->session << '\t' << r->participant << '\t' << r->seed << '\t'
       << r->split << '\t' << r->correct << '\t' << r->total << '\t' << format_fixed(r->accuracy())
       << '\n';
  }
  return os.str();
}

std::string format_fixed(double value, int decimals) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);  // no "-0.000000"
  return s;
}

}  // namespace emgtl
