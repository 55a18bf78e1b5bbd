#include "emgtl/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "emgtl/checkpoint.hpp"
#include "emgtl/error.hpp"
#include "emgtl/evaluation.hpp"

namespace emgtl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string shortest(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// --- JSON helpers -----------------------------------------------------------------

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw UsageError("config: '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool ok = std::any_of(known.begin(), known.end(),
                                [&](const char* k) { return it.key() == k; });
    if (!ok) {
      throw UsageError("config: unknown key '" + (where.empty() ? "" : where + ".") + it.key() + "'");
    }
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError("config: '" + where + "." + key + "' has the wrong type");
  }
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

SynthSpec synth_from_json(const json& j) {
  reject_unknown(j, "synth",
                 {"num_participants", "num_sessions", "seed", "cycles", "gesture_seconds",
                  "eval_runs_per_session", "eval_trials", "eval_trial_seconds",
                  "days_between_sessions", "amplitude", "drift_per_day", "session_jitter",
                  "gain_drift_per_day", "shift_sd_channels", "session_shifts",
                  "natural_intensity_mean", "natural_intensity_sd", "vary_evaluation_intensity",
                  "noise_level", "noise_growth_per_day", "position_gain",
                  "yaw_depression_start_deg", "yaw_depression_shift", "templates"});
  SynthSpec s;
  const std::string w = "synth";
  read_field(j, "num_participants", s.num_participants, w);
  read_field(j, "num_sessions", s.num_sessions, w);
  read_field(j, "seed", s.seed, w);
  read_field(j, "cycles", s.cycles, w);
  read_field(j, "gesture_seconds", s.gesture_seconds, w);
  read_field(j, "eval_runs_per_session", s.eval_runs_per_session, w);
  read_field(j, "eval_trials", s.eval_trials, w);
  read_field(j, "eval_trial_seconds", s.eval_trial_seconds, w);
  read_field(j, "days_between_sessions", s.days_between_sessions, w);
  read_field(j, "amplitude", s.amplitude, w);
  read_field(j, "drift_per_day", s.drift_per_day, w);
  read_field(j, "session_jitter", s.session_jitter, w);
  read_field(j, "gain_drift_per_day", s.gain_drift_per_day, w);
  read_field(j, "shift_sd_channels", s.shift_sd_channels, w);
  read_field(j, "session_shifts", s.session_shifts, w);
  read_field(j, "natural_intensity_mean", s.natural_intensity_mean, w);
  read_field(j, "natural_intensity_sd", s.natural_intensity_sd, w);
  read_field(j, "vary_evaluation_intensity", s.vary_evaluation_intensity, w);
  read_field(j, "noise_level", s.noise_level, w);
  read_field(j, "noise_growth_per_day", s.noise_growth_per_day, w);
  read_field(j, "position_gain", s.position_gain, w);
  read_field(j, "yaw_depression_start_deg", s.yaw_depression_start_deg, w);
  read_field(j, "yaw_depression_shift", s.yaw_depression_shift, w);
  read_field(j, "templates", s.templates, w);
  return s;
}

json synth_to_json(const SynthSpec& s) {
  return json{{"num_participants", s.num_participants},
              {"num_sessions", s.num_sessions},
              {"seed", s.seed},
              {"cycles", s.cycles},
              {"gesture_seconds", s.gesture_seconds},
              {"eval_runs_per_session", s.eval_runs_per_session},
              {"eval_trials", s.eval_trials},
              {"eval_trial_seconds", s.eval_trial_seconds},
              {"days_between_sessions", s.days_between_sessions},
              {"amplitude", s.amplitude},
              {"drift_per_day", s.drift_per_day},
              {"session_jitter", s.session_jitter},
              {"gain_drift_per_day", s.gain_drift_per_day},
              {"shift_sd_channels", s.shift_sd_channels},
              {"session_shifts", s.session_shifts},
              {"natural_intensity_mean", s.natural_intensity_mean},
              {"natural_intensity_sd", s.natural_intensity_sd},
              {"vary_evaluation_intensity", s.vary_evaluation_intensity},
              {"noise_level", s.noise_level},
              {"noise_growth_per_day", s.noise_growth_per_day},
              {"position_gain", s.position_gain},
              {"yaw_depression_start_deg", s.yaw_depression_start_deg},
              {"yaw_depression_shift", s.yaw_depression_shift},
              {"templates", s.templates}};
}

// --- output directories ------------------------------------------------------------

bool non_empty_dir(const fs::path& p) {
  return fs::exists(p) && fs::is_directory(p) && fs::directory_iterator(p) != fs::directory_iterator();
}

/// Refuses a non-empty output unless forced; a forced run clears the directory
/// so stale files cannot leak into the new result.
void prepare_output(const fs::path& out, bool force) {
  if (out.empty()) throw UsageError("an output directory is required (--out)");
  if (fs::exists(out) && !fs::is_directory(out)) {
    throw UsageError("output " + out.string() + " exists and is not a directory");
  }
  if (non_empty_dir(out)) {
    if (!force) throw UsageError("output " + out.string() + " is not empty (use --force to replace it)");
    for (const auto& e : fs::directory_iterator(out)) fs::remove_all(e.path());
  }
  fs::create_directories(out);
}

int worker_count() {
  const char* v = std::getenv("EMGTL_WORKERS");
  if (!v || !*v) return 1;
  int n = 0;
  auto r = std::from_chars(v, v + std::strlen(v), n);
  if (r.ec != std::errc() || *r.ptr != '\0' || n < 1) {
    throw UsageError("EMGTL_WORKERS must be a positive integer");
  }
  return n;
}

std::vector<CalibrationScheme> parse_scheme_list(const std::vector<std::string>& names) {
  std::vector<CalibrationScheme> out;
  for (const auto& n : names) {
    const CalibrationScheme s = parse_scheme(n);
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// --- dataset access ----------------------------------------------------------------

struct DatasetSource {
  LoadedDataset data;
  std::string description;
};

/// Loads the dataset a config points at. A synthetic source is first written in
/// canonical form under <out>/dataset so later commands can reuse it.
DatasetSource obtain_dataset(const RunConfig& cfg, const fs::path& out) {
  if (cfg.dataset_path) {
    return {load_canonical(*cfg.dataset_path), cfg.dataset_path->generic_string()};
  }
  const fs::path root = out / "dataset";
  write_canonical(synthesize(*cfg.synth), root);
  return {load_canonical(root), "synth -> dataset"};
}

std::map<std::string, std::vector<const SessionDataset*>> by_participant(const LoadedDataset& d) {
  std::map<std::string, std::vector<const SessionDataset*>> out;
  for (const auto& s : d.sessions) out[s.participant].push_back(&s);
  for (auto& [p, v] : out) {
    std::sort(v.begin(), v.end(), [](auto* a, auto* b) { return a->session_index < b->session_index; });
  }
  return out;
}

/// Preprocessed sessions of one participant with evaluation windows annotated
/// against the first session's maximal-intensity cycle.
SessionPlan make_plan(const std::string& participant, const std::vector<const SessionDataset*>& sessions,
                      const PreprocessSpec& spec) {
  SessionPlan plan;
  plan.participant = participant;
  for (const auto* s : sessions) plan.sessions.push_back(preprocess_session(*s, spec));
  const IntensityReference ref = intensity_reference(plan.sessions.front());
  for (auto& s : plan.sessions) annotate_intensity(s.evaluation, ref);
  return plan;
}

// --- benchmark pieces -----------------------------------------------------------

struct TaskResult {
  std::string participant;
  std::uint64_t seed = 0;
  std::map<CalibrationScheme, SchemeOutcome> outcomes;
  std::vector<std::string> skipped;  // "participant\tscheme\treason"
  std::string error;
  int error_code = 0;
};

std::vector<CalibrationScheme> applicable(const std::vector<CalibrationScheme>& wanted, std::size_t n,
                                          const std::string& participant,
                                          std::vector<std::string>& skipped) {
  std::vector<CalibrationScheme> out;
  for (CalibrationScheme s : wanted) {
    std::string why;
    if (s == CalibrationScheme::kDelayedCalibration && n < 3) why = "needs at least 3 sessions";
    if (s == CalibrationScheme::kTadann && n < 2) why = "needs at least 2 sessions";
    if (why.empty()) {
      out.push_back(s);
    } else {
      skipped.push_back(participant + "\t" + scheme_name(s) + "\t" + why + " (has " +
                        std::to_string(n) + ")");
    }
  }
  return out;
}

Checkpoint session_checkpoint(const SessionModel& m, const std::map<std::string, std::string>& meta) {
  Checkpoint ckpt;
  if (m.tadann) {
    store_tadann(ckpt, *m.tadann);
  } else {
    store_model(ckpt, *m.tcn);
  }
  for (const auto& [k, v] : meta) ckpt.metadata[k] = v;
  ckpt.metadata["model_kind"] = m.tadann ? "tadann" : "tcn";
  ckpt.metadata["inference_key"] = m.key;
  return ckpt;
}

SessionModel model_from_checkpoint(const Checkpoint& ckpt) {
  SessionModel m;
  const std::string kind = ckpt.meta("model_kind");
  if (kind == "tadann") {
    m.tadann = load_tadann<float>(ckpt);
  } else if (kind == "tcn") {
    m.tcn = load_model<float>(ckpt);
  } else {
    throw DataError("checkpoint: unknown model_kind '" + kind + "'");
  }
  m.key = ckpt.meta("inference_key");
  return m;
}

std::size_t count_correct(std::span<const int> pred, std::span<const int> labels,
                          std::span<const std::size_t> idx) {
  std::size_t c = 0;
  for (std::size_t i : idx) c += pred[i] == labels[i];
  return c;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

// --- report files ----------------------------------------------------------------

std::string summary_tsv(const AccuracyTable& table, const std::vector<CalibrationScheme>& schemes) {
  std::ostringstream out;
  out << "scheme\tsession\tsplit\tmean_accuracy\tparticipants\n";
  for (CalibrationScheme s : schemes) {
    for (int session : table.sessions()) {
      for (const char* split : {"offline", "evaluation"}) {
        const auto m = table.mean(scheme_name(s), session, split);
        if (!m) continue;
        std::set<std::string> parts;
        for (const auto& [p, a] : table.paired(scheme_name(s), session, split)) parts.insert(p);
        out << scheme_name(s) << '\t' << session << '\t' << split << '\t' << format_fixed(*m) << '\t'
            << parts.size() << '\n';
      }
    }
  }
  return out.str();
}

/// TADANN against Recalibration, per session after the first and per split.
/// Pairs are (participant, seed) units present under both schemes.
std::string comparisons_tsv(const AccuracyTable& table) {
  std::ostringstream out;
  out << "comparison\tsession\tsplit\tn\tmean_difference\tcohens_dz\twilcoxon_w\tp_value\texact\tnote\n";
  const auto sessions = table.sessions();
  if (sessions.empty()) return out.str();
  for (int session : sessions) {
    if (session == sessions.front()) continue;
    for (const char* split : {"offline", "evaluation"}) {
      const auto a = table.paired("tadann", session, split);
      const auto b = table.paired("recalibration", session, split);
      if (a.empty() || b.empty()) continue;
      std::map<std::string, double> bm(b.begin(), b.end());
      std::vector<double> xa, xb;
      for (const auto& [k, v] : a) {
        auto it = bm.find(k);
        if (it == bm.end()) continue;
        xa.push_back(v);
        xb.push_back(it->second);
      }
      double mean_diff = 0.0;
      for (std::size_t i = 0; i < xa.size(); ++i) mean_diff += xa[i] - xb[i];
      if (!xa.empty()) mean_diff /= double(xa.size());
      std::string dz = "NA", w = "NA", p = "NA", exact = "NA";
      std::vector<std::string> notes;
      if (xa.size() >= 2) {
        try {
          dz = format_fixed(cohens_dz(xa, xb));
        } catch (const DegenerateInput& e) {
          notes.push_back(e.what());
        }
      } else {
        notes.push_back("dz: fewer than 2 pairs");
      }
      try {
        const WilcoxonResult r = wilcoxon_signed_rank(xa, xb);
        w = format_fixed(r.statistic);
        p = format_fixed(r.p_value);
        exact = r.exact ? "yes" : "no";
      } catch (const DegenerateInput& e) {
        notes.push_back(e.what());
      }
      std::string note;
      for (const auto& n : notes) note += (note.empty() ? "" : "; ") + n;
      out << "tadann-recalibration\t" << session << '\t' << split << '\t' << xa.size() << '\t'
          << format_fixed(mean_diff) << '\t' << dz << '\t' << w << '\t' << p << '\t' << exact << '\t'
          << (note.empty() ? "-" : note) << '\n';
    }
  }
  return out.str();
}

std::string history_tsv(const std::vector<TaskResult>& tasks) {
  std::ostringstream out;
  out << "participant\tseed\tstage\tepoch\ttrain_loss\tvalidation_loss\tlr\timproved\tannealed\n";
  for (const auto& t : tasks) {
    std::map<std::string, const TrainHistory*> stages;
    for (const auto& [s, o] : t.outcomes) {
      for (const auto& [name, h] : o.histories) stages[name] = &h;
    }
    for (const auto& [name, h] : stages) {
      for (const auto& e : h->epochs) {
        out << t.participant << '\t' << t.seed << '\t' << name << '\t' << e.epoch << '\t'
            << format_fixed(e.train_loss) << '\t' << format_fixed(e.validation_loss) << '\t'
            << format_fixed(e.lr, 9) << '\t' << int(e.improved) << '\t' << int(e.annealed) << '\n';
      }
    }
  }
  return out.str();
}

void write_mav_msa(const fs::path& dir, const std::vector<SessionPlan>& plans) {
  std::vector<SessionWindows> all;
  std::size_t max_sessions = 0;
  for (const auto& p : plans) {
    max_sessions = std::max(max_sessions, p.sessions.size());
    all.insert(all.end(), p.sessions.begin(), p.sessions.end());
  }
  if (max_sessions < 2) return;
  const MavMsaReport rep = mav_msa_day_report(all);
  std::ostringstream days;
  days << "participant\tsession\tday\ttrain_windows\ttrain_mav_mean\ttrain_mav_sd\ttrain_msa\t"
          "eval_windows\teval_mav_mean\teval_mav_sd\teval_msa\n";
  for (const auto& d : rep.days) {
    days << d.participant << '\t' << d.session_index << '\t' << format_fixed(d.day) << '\t'
         << d.train_windows << '\t' << format_fixed(d.train_mav_mean) << '\t'
         << format_fixed(d.train_mav_sd) << '\t'
         << (d.train_msa_degenerate ? "NA" : format_fixed(d.train_msa)) << '\t' << d.eval_windows
         << '\t' << (d.eval_windows ? format_fixed(d.eval_mav_mean) : "NA") << '\t'
         << (d.eval_windows ? format_fixed(d.eval_mav_sd) : "NA") << '\t'
         << (d.eval_windows && !d.eval_msa_degenerate ? format_fixed(d.eval_msa) : "NA") << '\n';
  }
  write_file(dir / "mav_msa_days.tsv", days.str());

  std::ostringstream tests;
  tests << "quantity\tfirst_day_mean\tlast_day_mean\tpairs\twilcoxon_w\tp_value\tnote\n";
  for (const auto& c : rep.comparisons) {
    tests << c.quantity << '\t' << format_fixed(c.first_day) << '\t' << format_fixed(c.last_day)
          << '\t' << c.pairs << '\t' << (c.test ? format_fixed(c.test->statistic) : "NA") << '\t'
          << (c.test ? format_fixed(c.test->p_value) : "NA") << '\t'
          << (c.note.empty() ? "-" : c.note) << '\n';
  }
  write_file(dir / "mav_msa_tests.tsv", tests.str());

  // per-session means across participants, plot-ready
  std::map<int, std::vector<const DaySummary*>> per_session;
  for (const auto& d : rep.days) per_session[d.session_index].push_back(&d);
  auto curve = [&](const char* name, auto value, auto usable) {
    std::ostringstream o;
    o << "day\t" << name << '\n';
    for (const auto& [s, v] : per_session) {
      double day = 0, acc = 0;
      std::size_t n = 0;
      for (const auto* d : v) {
        if (!usable(*d)) continue;
        day += d->day;
        acc += value(*d);
        ++n;
      }
      if (n) o << format_fixed(day / double(n)) << '\t' << format_fixed(acc / double(n)) << '\n';
    }
    write_file(dir / "figures" / (std::string(name) + ".tsv"), o.str());
  };
  curve("train_mav", [](const DaySummary& d) { return d.train_mav_mean; },
        [](const DaySummary& d) { return d.train_windows > 0; });
  curve("train_msa", [](const DaySummary& d) { return d.train_msa; },
        [](const DaySummary& d) { return !d.train_msa_degenerate; });
  curve("eval_mav", [](const DaySummary& d) { return d.eval_mav_mean; },
        [](const DaySummary& d) { return d.eval_windows > 0; });
  curve("eval_msa", [](const DaySummary& d) { return d.eval_msa; },
        [](const DaySummary& d) { return d.eval_windows > 0 && !d.eval_msa_degenerate; });
}

std::string bins_tsv(const BinnedAnalysis& a, bool orientation) {
  std::ostringstream o;
  o << (orientation ? "pitch\tyaw\taccuracy\n" : "intensity\taccuracy\n");
  for (const auto& b : a.bins) {
    o << format_fixed(0.5 * (b.lo0 + b.hi0)) << '\t';
    if (orientation) o << format_fixed(0.5 * (b.lo1 + b.hi1)) << '\t';
    o << format_fixed(b.accuracy()) << '\n';
  }
  return o.str();
}

std::string bins_detail_tsv(const BinnedAnalysis& a, bool orientation) {
  std::ostringstream o;
  o << (orientation ? "pitch_lo\tpitch_hi\tyaw_lo\tyaw_hi\tcount\tcorrect\taccuracy\n"
                    : "intensity_lo\tintensity_hi\tcount\tcorrect\taccuracy\n");
  for (const auto& b : a.bins) {
    o << format_fixed(b.lo0) << '\t' << format_fixed(b.hi0) << '\t';
    if (orientation) o << format_fixed(b.lo1) << '\t' << format_fixed(b.hi1) << '\t';
    o << b.count << '\t' << b.correct << '\t' << format_fixed(b.accuracy()) << '\n';
  }
  o << "# suppressed_bins " << a.suppressed_bins << " suppressed_windows " << a.suppressed_windows
    << " min_count " << a.min_count << '\n';
  return o.str();
}

/// Predictions, labels, and per-window covariates pooled over evaluation windows.
struct Pool {
  std::vector<int> pred, labels;
  std::vector<double> ratio, pitch, yaw;

  void add(const WindowSet& w, std::span<const int> p, std::span<const std::size_t> idx) {
    for (std::size_t i : idx) {
      pred.push_back(p[i]);
      labels.push_back(w.labels[i]);
      ratio.push_back(w.context[i].intensity_ratio);
      pitch.push_back(w.context[i].pitch_deg);
      yaw.push_back(w.context[i].yaw_deg);
    }
  }
};

void write_binned(const fs::path& dir, const std::string& stem, const Pool& pool,
                  const EvaluationOptions& eo) {
  const auto by_i = bin_by_intensity(pool.pred, pool.labels, pool.ratio, eo.intensity_bin_width);
  const auto by_o = bin_by_orientation(pool.pred, pool.labels, pool.pitch, pool.yaw,
                                       eo.orientation_grid_deg, eo.orientation_min_count);
  write_file(dir / "figures" / ("intensity_" + stem + ".tsv"), bins_tsv(by_i, false));
  write_file(dir / "figures" / ("orientation_" + stem + ".tsv"), bins_tsv(by_o, true));
  write_file(dir / ("intensity_bins_" + stem + ".tsv"), bins_detail_tsv(by_i, false));
  write_file(dir / ("orientation_bins_" + stem + ".tsv"), bins_detail_tsv(by_o, true));
}

AccuracyTable parse_accuracy_tsv(const std::string& text) {
  AccuracyTable t;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line.rfind("scheme\tsession\tparticipant", 0) != 0) throw DataError("accuracy.tsv: bad header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    AccuracyRow r;
    std::string acc;
    if (!(ls >> r.scheme >> r.session >> r.participant >> r.seed >> r.split >> r.correct >> r.total >> acc)) {
      throw DataError("accuracy.tsv: malformed row '" + line + "'");
    }
    t.add(r);
  }
  return t;
}

// --- commands --------------------------------------------------------------------

struct Common {
  std::string config;
  std::string out;
  bool force = false;
};

struct Overrides {
  std::string data;
  std::vector<std::string> schemes;
  std::vector<std::uint64_t> seeds;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::optional<int> max_epochs;
  std::vector<std::size_t> channels;
  std::optional<double> trim;
  bool no_checkpoints = false;
};

RunConfig resolve(const Common& c, const Overrides& o) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (!o.data.empty()) {
    cfg.dataset_path = o.data;
    cfg.synth.reset();
  }
  if (!o.schemes.empty()) cfg.schemes = parse_scheme_list(o.schemes);
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (o.lr) cfg.train.lr = *o.lr;
  if (o.batch_size) cfg.train.batch_size = *o.batch_size;
  if (o.max_epochs) cfg.train.max_epochs = *o.max_epochs;
  if (!o.channels.empty()) cfg.model.channels = o.channels;
  if (o.trim) cfg.evaluation.trim_transitions_s = *o.trim;
  if (o.no_checkpoints) cfg.save_checkpoints = false;
  if (!c.out.empty()) cfg.output = c.out;
  cfg.validate();
  return cfg;
}

void add_run_flags(CLI::App* cmd, Common& c, Overrides& o) {
  cmd->add_option("-c,--config", c.config, "JSON run configuration");
  cmd->add_option("-o,--out", c.out, "Output directory (overrides config 'output')");
  cmd->add_flag("--force", c.force, "Replace a non-empty output directory");
  cmd->add_option("--data", o.data, "Canonical dataset directory (replaces the config's dataset)");
  cmd->add_option("--schemes", o.schemes,
                  "Comma list of no_calibration, recalibration, delayed_calibration, tadann")
      ->delimiter(',');
  cmd->add_option("--seeds", o.seeds, "Comma list of training seeds")->delimiter(',');
  cmd->add_option("--lr", o.lr, "Initial Adam learning rate");
  cmd->add_option("--batch-size", o.batch_size, "Mini-batch size");
  cmd->add_option("--max-epochs", o.max_epochs, "Epoch cap per training stage");
  cmd->add_option("--channels", o.channels, "Comma list of TCN block widths")->delimiter(',');
  cmd->add_option("--trim-transitions", o.trim,
                  "Evaluation windows starting less than this many seconds after their cue are dropped");
  cmd->add_flag("--no-checkpoints", o.no_checkpoints, "Do not write per-session checkpoints");
}

/// Runs the participant x seed grid; `full` adds comparisons, figures and MAV/MSA.
int run_grid(const RunConfig& cfg, bool force, bool full) {
  if (cfg.dataset_path && fs::exists(*cfg.dataset_path) && fs::exists(cfg.output)) {
    const fs::path d = fs::weakly_canonical(*cfg.dataset_path);
    const fs::path o = fs::weakly_canonical(cfg.output);
    const auto rel = d.lexically_relative(o);
    if (d == o || (!rel.empty() && *rel.begin() != "..")) {
      throw UsageError("output directory must not contain the input dataset");
    }
  }
  prepare_output(cfg.output, force);
  const fs::path out = cfg.output;
  const DatasetSource src = obtain_dataset(cfg, out);
  const auto groups = by_participant(src.data);
  if (groups.empty()) throw DataError("dataset has no sessions");

  std::vector<SessionPlan> plans;
  for (const auto& [p, sessions] : groups) plans.push_back(make_plan(p, sessions, cfg.preprocess));

  std::vector<TaskResult> tasks;
  for (const auto& plan : plans) {
    for (std::uint64_t seed : cfg.seeds) {
      TaskResult t;
      t.participant = plan.participant;
      t.seed = seed;
      tasks.push_back(std::move(t));
    }
  }
  const std::string ckpt_pre = preprocess_hash(cfg.preprocess);

  auto run_task = [&](std::size_t k) {
    TaskResult& t = tasks[k];
    const SessionPlan& plan = plans[k / cfg.seeds.size()];
    try {
      const auto schemes = applicable(cfg.schemes, plan.sessions.size(), plan.participant, t.skipped);
      if (schemes.empty()) return;
      SchemeRunOptions opt;
      opt.model = cfg.model;
      opt.train = cfg.train;
      opt.train.seed = t.seed;
      t.outcomes = run_schemes(plan, schemes, opt);
      if (!cfg.save_checkpoints) return;
      for (auto& [scheme, o] : t.outcomes) {
        for (std::size_t i = 0; i < o.sessions.size(); ++i) {
          if (!o.sessions[i].defined) continue;
          const int idx = o.sessions[i].session_index;
          const Checkpoint ckpt = session_checkpoint(
              o.models[i], {{"participant", plan.participant},
                            {"session_index", std::to_string(idx)},
                            {"scheme", scheme_name(scheme)},
                            {"seed", std::to_string(t.seed)},
                            {"dataset_checksum", src.data.checksum},
                            {"preprocess_hash", ckpt_pre}});
          const fs::path path = out / "checkpoints" / plan.participant /
                                ("seed_" + std::to_string(t.seed)) / scheme_name(scheme) /
                                ("session_" + std::to_string(idx) + ".ckpt");
          fs::create_directories(path.parent_path());
          ckpt.write(path);
        }
        o.models.clear();
      }
    } catch (const NumericalFault& e) {
      t.error = e.what();
      t.error_code = 3;
    } catch (const DataError& e) {
      t.error = e.what();
      t.error_code = 2;
    } catch (const UsageError& e) {
      t.error = e.what();
      t.error_code = 1;
    }
  };

  const int workers = std::min<int>(worker_count(), int(tasks.size()));
  std::mutex log_mutex;
  auto log_done = [&](std::size_t k) {
    std::lock_guard<std::mutex> lock(log_mutex);
    std::cerr << "[emgtl] " << tasks[k].participant << " seed " << tasks[k].seed
              << (tasks[k].error.empty() ? " done" : " failed: " + tasks[k].error) << '\n';
  };
  if (workers <= 1) {
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      run_task(k);
      log_done(k);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        omp_set_num_threads(1);
        for (std::size_t k = next++; k < tasks.size(); k = next++) {
          run_task(k);
          log_done(k);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  // Assembly walks tasks in grid order, so completion order never shows.
  AccuracyTable table;
  std::map<CalibrationScheme, Pool> pools;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const TaskResult& t = tasks[k];
    const SessionPlan& plan = plans[k / cfg.seeds.size()];
    for (const auto& [scheme, o] : t.outcomes) {
      for (std::size_t i = 0; i < o.sessions.size(); ++i) {
        const SessionResult& r = o.sessions[i];
        if (!r.defined) continue;
        const SessionWindows& sw = plan.sessions[i];
        const auto test_idx = all_indices(sw.test.size());
        table.add({scheme_name(scheme), r.session_index, t.participant, t.seed, "offline",
                   count_correct(r.test_predictions, sw.test.labels, test_idx), sw.test.size()});
        const auto eval_idx = trim_transitions(sw.evaluation, cfg.evaluation.trim_transitions_s);
        if (!eval_idx.empty()) {
          table.add({scheme_name(scheme), r.session_index, t.participant, t.seed, "evaluation",
                     count_correct(r.evaluation_predictions, sw.evaluation.labels, eval_idx),
                     eval_idx.size()});
          pools[scheme].add(sw.evaluation, r.evaluation_predictions, eval_idx);
        }
      }
    }
  }

  write_file(out / "accuracy.tsv", table.to_tsv());
  write_file(out / "summary.tsv", summary_tsv(table, cfg.schemes));
  write_file(out / "histories.tsv", history_tsv(tasks));
  if (full) {
    write_file(out / "comparisons.tsv", comparisons_tsv(table));
    for (CalibrationScheme s : cfg.schemes) {
      for (const char* split : {"offline", "evaluation"}) {
        std::ostringstream f;
        f << "session\taccuracy\n";
        bool any = false;
        for (int session : table.sessions()) {
          const auto m = table.mean(scheme_name(s), session, split);
          if (!m) continue;
          f << session << '\t' << format_fixed(*m) << '\n';
          any = true;
        }
        if (any) {
          write_file(out / "figures" / ("accuracy_" + std::string(split) + "_" + scheme_name(s) + ".tsv"),
                     f.str());
        }
      }
    }
    for (const auto& [s, pool] : pools) write_binned(out, scheme_name(s), pool, cfg.evaluation);
    write_mav_msa(out, plans);
  }

  int code = 0;
  std::ostringstream man;
  man << "command\t" << (full ? "benchmark" : "train") << '\n';
  man << "config_sha256\t" << sha256_hex(std::span<const std::uint8_t>(
                                  reinterpret_cast<const std::uint8_t*>(cfg.canonical_json().data()),
                                  cfg.canonical_json().size()))
      << '\n';
  man << "dataset\t" << src.description << '\n';
  man << "dataset_checksum\t" << src.data.checksum << '\n';
  man << "preprocess_sha256\t" << ckpt_pre << '\n';
  man << "participants\t" << plans.size() << '\n';
  man << "seeds";
  for (auto s : cfg.seeds) man << '\t' << s;
  man << "\nschemes";
  for (auto s : cfg.schemes) man << '\t' << scheme_name(s);
  man << '\n';
  std::set<std::string> skipped;
  for (const auto& t : tasks) skipped.insert(t.skipped.begin(), t.skipped.end());
  for (const auto& s : skipped) {
    man << "skipped\t" << s << '\n';
    std::cerr << "warning: skipped " << s << '\n';
  }
  for (const auto& t : tasks) {
    if (t.error.empty()) continue;
    man << "failed\t" << t.participant << '\t' << t.seed << '\t' << t.error << '\n';
    code = std::max(code, t.error_code);
  }
  man << "status\t" << (code == 0 ? "complete" : "incomplete") << '\n';
  man << "config\n" << cfg.canonical_json() << '\n';
  write_file(out / "manifest.txt", man.str());
  return code;
}

int cmd_synth(const Common& c, const std::optional<std::uint64_t>& seed, const std::optional<int>& participants,
              const std::optional<int>& sessions, const std::optional<double>& gesture_seconds,
              const std::optional<int>& eval_runs) {
  SynthSpec spec;
  if (!c.config.empty()) {
    const json j = parse_json(read_text(c.config));
    // Either a bare synth spec or a run config with dataset.synth.
    if (j.contains("dataset") && j["dataset"].is_object() && j["dataset"].contains("synth")) {
      spec = synth_from_json(j["dataset"]["synth"]);
    } else {
      spec = synth_from_json(j);
    }
  }
  if (seed) spec.seed = *seed;
  if (participants) spec.num_participants = *participants;
  if (sessions) spec.num_sessions = *sessions;
  if (gesture_seconds) spec.gesture_seconds = *gesture_seconds;
  if (eval_runs) spec.eval_runs_per_session = *eval_runs;
  spec.validate();
  prepare_output(c.out, c.force);
  const std::string sum = write_canonical(synthesize(spec), c.out);
  write_file(fs::path(c.out) / "synth_spec.json", synth_to_json(spec).dump(2) + "\n");
  std::cout << "dataset_checksum\t" << sum << '\n';
  return 0;
}

int cmd_import(const Common& c, const std::string& from, double gesture_seconds) {
  auto sessions = import_csv_tree(from, gesture_seconds);
  prepare_output(c.out, c.force);
  std::cout << "dataset_checksum\t" << write_canonical(sessions, c.out) << '\n';
  return 0;
}

int cmd_preprocess(const Common& c, const Overrides& o) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (!o.data.empty()) cfg.dataset_path = o.data;
  if (!cfg.dataset_path) throw UsageError("preprocess needs a canonical dataset (--data)");
  cfg.preprocess.filter.validate();
  cfg.preprocess.window.validate();
  const LoadedDataset data = load_canonical(*cfg.dataset_path);
  prepare_output(c.out, c.force);
  std::ostringstream summary;
  summary << "participant\tsession\tset\twindows";
  for (int g = 0; g < kNumGestures; ++g) summary << "\tg" << g;
  summary << '\n';
  for (const auto& [p, sessions] : by_participant(data)) {
    const SessionPlan plan = make_plan(p, sessions, cfg.preprocess);
    for (const auto& sw : plan.sessions) {
      const fs::path dir = fs::path(c.out) / p / ("session_" + std::to_string(sw.session_index));
      const std::pair<const char*, const WindowSet*> sets[] = {
          {"train", &sw.train}, {"test", &sw.test}, {"max_intensity", &sw.max_intensity},
          {"evaluation", &sw.evaluation}};
      for (const auto& [name, ws] : sets) {
        std::vector<std::size_t> counts(kNumGestures, 0);
        for (int l : ws->labels) ++counts[std::size_t(l)];
        summary << p << '\t' << sw.session_index << '\t' << name << '\t' << ws->size();
        for (auto n : counts) summary << '\t' << n;
        summary << '\n';
        // raw float32 LE, [windows, channels, length]
        std::string bytes(reinterpret_cast<const char*>(ws->samples.data()),
                          ws->samples.size() * sizeof(float));
        write_file(dir / (std::string(name) + ".f32"), bytes);
        std::ostringstream meta;
        meta << "label\tcycle\trun\ttrial\ttime_since_cue_s\tintensity_ratio\trequested_level\tpitch_deg\tyaw_deg\n";
        for (std::size_t i = 0; i < ws->size(); ++i) {
          const auto& x = ws->context[i];
          meta << ws->labels[i] << '\t' << x.cycle << '\t' << x.run << '\t' << x.trial << '\t'
               << format_fixed(x.time_since_cue_s) << '\t' << format_fixed(x.intensity_ratio) << '\t'
               << x.requested_level << '\t' << format_fixed(x.pitch_deg) << '\t'
               << format_fixed(x.yaw_deg) << '\n';
        }
        write_file(dir / (std::string(name) + ".tsv"), meta.str());
      }
    }
  }
  write_file(fs::path(c.out) / "windows.tsv", summary.str());
  write_file(fs::path(c.out) / "manifest.txt",
             "command\tpreprocess\ndataset\t" + cfg.dataset_path->generic_string() +
                 "\ndataset_checksum\t" + data.checksum + "\npreprocess_sha256\t" +
                 preprocess_hash(cfg.preprocess) + "\npreprocess\n" + preprocess_text(cfg.preprocess));
  return 0;
}

int cmd_evaluate(const Common& c, const Overrides& o, const std::string& checkpoint_path) {
  if (!fs::exists(checkpoint_path)) throw UsageError("checkpoint " + checkpoint_path + " does not exist");
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (!o.data.empty()) {
    cfg.dataset_path = o.data;
  } else if (!cfg.dataset_path && !cfg.output.empty() && fs::exists(cfg.output / "dataset")) {
    cfg.dataset_path = cfg.output / "dataset";
  }
  if (!cfg.dataset_path) throw UsageError("evaluate needs the dataset (--data)");
  if (o.trim) cfg.evaluation.trim_transitions_s = *o.trim;
  if (!(cfg.evaluation.trim_transitions_s >= 0.0)) throw UsageError("--trim-transitions must be >= 0");

  const Checkpoint ckpt = Checkpoint::read(checkpoint_path);
  const std::string want = preprocess_hash(cfg.preprocess);
  if (ckpt.meta("preprocess_hash") != want) {
    throw DataError("config hash mismatch: checkpoint preprocessing " + ckpt.meta("preprocess_hash") +
                    ", current " + want);
  }
  const LoadedDataset data = load_canonical(*cfg.dataset_path);
  if (ckpt.meta("dataset_checksum") != data.checksum) {
    throw DataError("dataset checksum mismatch: checkpoint " + ckpt.meta("dataset_checksum") +
                    ", dataset " + data.checksum);
  }
  const std::string participant = ckpt.meta("participant");
  const int session = std::stoi(ckpt.meta("session_index"));
  const auto groups = by_participant(data);
  auto it = groups.find(participant);
  if (it == groups.end()) throw DataError("participant " + participant + " not in dataset");
  const SessionPlan plan = make_plan(participant, it->second, cfg.preprocess);
  const SessionWindows* sw = nullptr;
  for (const auto& s : plan.sessions) {
    if (s.session_index == session) sw = &s;
  }
  if (!sw) throw DataError("session " + std::to_string(session) + " not in dataset");

  const SessionModel model = model_from_checkpoint(ckpt);
  const auto test_pred = model.predict(sw->test);
  const auto eval_pred = model.predict(sw->evaluation);
  const std::size_t test_correct = count_correct(test_pred, sw->test.labels, all_indices(sw->test.size()));
  const auto eval_idx = trim_transitions(sw->evaluation, cfg.evaluation.trim_transitions_s);
  const std::size_t eval_correct = count_correct(eval_pred, sw->evaluation.labels, eval_idx);

  std::ostringstream rep;
  rep << "participant\t" << participant << '\n'
      << "session\t" << session << '\n'
      << "scheme\t" << ckpt.meta("scheme") << '\n'
      << "seed\t" << ckpt.meta("seed") << '\n'
      << "offline_correct\t" << test_correct << '\n'
      << "offline_total\t" << sw->test.size() << '\n'
      << "offline_accuracy\t"
      << (sw->test.size() ? format_fixed(double(test_correct) / double(sw->test.size())) : "NA") << '\n'
      << "evaluation_windows_before_trim\t" << sw->evaluation.size() << '\n'
      << "trim_transitions_s\t" << format_fixed(cfg.evaluation.trim_transitions_s) << '\n'
      << "evaluation_correct\t" << eval_correct << '\n'
      << "evaluation_total\t" << eval_idx.size() << '\n'
      << "evaluation_accuracy\t"
      << (eval_idx.empty() ? "NA" : format_fixed(double(eval_correct) / double(eval_idx.size()))) << '\n';
  std::cout << rep.str();
  if (!c.out.empty()) {
    prepare_output(c.out, c.force);
    write_file(fs::path(c.out) / "evaluate.tsv", rep.str());
    if (!eval_idx.empty()) {
      Pool pool;
      pool.add(sw->evaluation, eval_pred, eval_idx);
      write_binned(c.out, "model", pool, cfg.evaluation);
    }
  }
  return 0;
}

int cmd_report(const Common& c, const std::string& data_dir, const std::string& bench_dir) {
  if (data_dir.empty() && bench_dir.empty()) throw UsageError("report needs --data and/or --bench");
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  prepare_output(c.out, c.force);
  if (!data_dir.empty()) {
    const LoadedDataset data = load_canonical(data_dir);
    std::vector<SessionPlan> plans;
    for (const auto& [p, sessions] : by_participant(data)) plans.push_back(make_plan(p, sessions, cfg.preprocess));
    write_mav_msa(c.out, plans);
  }
  if (!bench_dir.empty()) {
    const AccuracyTable t = parse_accuracy_tsv(read_text(fs::path(bench_dir) / "accuracy.tsv"));
    std::vector<CalibrationScheme> schemes;
    for (const auto& r : t.rows()) schemes.push_back(parse_scheme(r.scheme));
    std::sort(schemes.begin(), schemes.end());
    schemes.erase(std::unique(schemes.begin(), schemes.end()), schemes.end());
    write_file(fs::path(c.out) / "summary.tsv", summary_tsv(t, schemes));
    write_file(fs::path(c.out) / "comparisons.tsv", comparisons_tsv(t));
  }
  return 0;
}

}  // namespace

// --- RunConfig -----------------------------------------------------------------

void RunConfig::validate() const {
  if (dataset_path.has_value() == synth.has_value()) {
    throw UsageError("config: 'dataset' needs exactly one of 'path' or 'synth'");
  }
  if (synth) synth->validate();
  if (schemes.empty()) throw UsageError("config: 'schemes' must name at least one scheme");
  if (seeds.empty()) throw UsageError("config: 'seeds' must not be empty");
  if (output.empty()) throw UsageError("config: 'output' directory is required");
  train.validate();
  model.validate();
  preprocess.filter.validate();
  preprocess.window.validate();
  if (!(evaluation.trim_transitions_s >= 0.0)) throw UsageError("config: 'evaluation.trim_transitions_s' must be >= 0");
  if (!(evaluation.intensity_bin_width > 0.0)) throw UsageError("config: 'evaluation.intensity_bin_width' must be > 0");
  if (!(evaluation.orientation_grid_deg > 0.0)) throw UsageError("config: 'evaluation.orientation_grid_deg' must be > 0");
}

std::string RunConfig::canonical_json() const {
  json j;
  if (dataset_path) j["dataset"] = {{"path", dataset_path->generic_string()}};
  if (synth) j["dataset"] = {{"synth", synth_to_json(*synth)}};
  json names = json::array();
  for (auto s : schemes) names.push_back(scheme_name(s));
  j["schemes"] = names;
  j["seeds"] = seeds;
  j["train"] = {{"lr", train.lr},
                {"batch_size", train.batch_size},
                {"validation_fraction", train.validation_fraction},
                {"early_stop_patience", train.early_stop_patience},
                {"anneal_factor", train.anneal_factor},
                {"anneal_patience", train.anneal_patience},
                {"max_epochs", train.max_epochs},
                {"lambda", train.lambda},
                {"domain_loss_weight", train.domain_loss_weight}};
  j["model"] = {{"channels", model.channels},   {"kernel_size", model.kernel_size},
                {"dropout", model.dropout},     {"leaky_slope", model.leaky_slope},
                {"bn_momentum", model.bn_momentum}, {"bn_eps", model.bn_eps}};
  j["preprocess"] = {{"low_cut_hz", preprocess.filter.low_cut_hz},
                     {"high_cut_hz", preprocess.filter.high_cut_hz},
                     {"order", preprocess.filter.order},
                     {"sample_rate_hz", preprocess.filter.sample_rate_hz},
                     {"window_ms", preprocess.window.window_ms},
                     {"overlap_ms", preprocess.window.overlap_ms}};
  j["evaluation"] = {{"trim_transitions_s", evaluation.trim_transitions_s},
                     {"intensity_bin_width", evaluation.intensity_bin_width},
                     {"orientation_grid_deg", evaluation.orientation_grid_deg},
                     {"orientation_min_count", evaluation.orientation_min_count}};
  j["save_checkpoints"] = save_checkpoints;
  return j.dump(2);
}

RunConfig parse_run_config(const std::string& json_text) {
  const json j = parse_json(json_text);
  reject_unknown(j, "", {"dataset", "schemes", "seeds", "train", "model", "preprocess", "evaluation",
                         "output", "save_checkpoints"});
  RunConfig cfg;
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    if (d.is_string()) {
      cfg.dataset_path = d.get<std::string>();
    } else {
      reject_unknown(d, "dataset", {"path", "synth"});
      if (d.contains("path")) cfg.dataset_path = d["path"].get<std::string>();
      if (d.contains("synth")) cfg.synth = synth_from_json(d["synth"]);
    }
  }
  if (j.contains("schemes")) {
    std::vector<std::string> names;
    read_field(j, "schemes", names, "");
    cfg.schemes = parse_scheme_list(names);
  }
  read_field(j, "seeds", cfg.seeds, "");
  if (j.contains("train")) {
    const json& t = j["train"];
    reject_unknown(t, "train", {"lr", "batch_size", "validation_fraction", "early_stop_patience",
                                "anneal_factor", "anneal_patience", "max_epochs", "lambda",
                                "domain_loss_weight"});
    read_field(t, "lr", cfg.train.lr, "train");
    read_field(t, "batch_size", cfg.train.batch_size, "train");
    read_field(t, "validation_fraction", cfg.train.validation_fraction, "train");
    read_field(t, "early_stop_patience", cfg.train.early_stop_patience, "train");
    read_field(t, "anneal_factor", cfg.train.anneal_factor, "train");
    read_field(t, "anneal_patience", cfg.train.anneal_patience, "train");
    read_field(t, "max_epochs", cfg.train.max_epochs, "train");
    read_field(t, "lambda", cfg.train.lambda, "train");
    read_field(t, "domain_loss_weight", cfg.train.domain_loss_weight, "train");
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    reject_unknown(m, "model", {"channels", "kernel_size", "dropout", "leaky_slope", "bn_momentum", "bn_eps"});
    read_field(m, "channels", cfg.model.channels, "model");
    read_field(m, "kernel_size", cfg.model.kernel_size, "model");
    read_field(m, "dropout", cfg.model.dropout, "model");
    read_field(m, "leaky_slope", cfg.model.leaky_slope, "model");
    read_field(m, "bn_momentum", cfg.model.bn_momentum, "model");
    read_field(m, "bn_eps", cfg.model.bn_eps, "model");
  }
  if (j.contains("preprocess")) {
    const json& p = j["preprocess"];
    reject_unknown(p, "preprocess", {"low_cut_hz", "high_cut_hz", "order", "sample_rate_hz", "window_ms", "overlap_ms"});
    read_field(p, "low_cut_hz", cfg.preprocess.filter.low_cut_hz, "preprocess");
    read_field(p, "high_cut_hz", cfg.preprocess.filter.high_cut_hz, "preprocess");
    read_field(p, "order", cfg.preprocess.filter.order, "preprocess");
    read_field(p, "sample_rate_hz", cfg.preprocess.filter.sample_rate_hz, "preprocess");
    read_field(p, "window_ms", cfg.preprocess.window.window_ms, "preprocess");
    read_field(p, "overlap_ms", cfg.preprocess.window.overlap_ms, "preprocess");
  }
  if (j.contains("evaluation")) {
    const json& e = j["evaluation"];
    reject_unknown(e, "evaluation", {"trim_transitions_s", "intensity_bin_width", "orientation_grid_deg",
                                     "orientation_min_count"});
    read_field(e, "trim_transitions_s", cfg.evaluation.trim_transitions_s, "evaluation");
    read_field(e, "intensity_bin_width", cfg.evaluation.intensity_bin_width, "evaluation");
    read_field(e, "orientation_grid_deg", cfg.evaluation.orientation_grid_deg, "evaluation");
    read_field(e, "orientation_min_count", cfg.evaluation.orientation_min_count, "evaluation");
  }
  if (j.contains("output")) cfg.output = j["output"].get<std::string>();
  read_field(j, "save_checkpoints", cfg.save_checkpoints, "");
  return cfg;
}

RunConfig load_run_config(const fs::path& path) { return parse_run_config(read_text(path)); }

SynthSpec parse_synth_spec(const std::string& json_text) { return synth_from_json(parse_json(json_text)); }

std::string preprocess_text(const PreprocessSpec& spec) {
  return "low_cut_hz=" + shortest(spec.filter.low_cut_hz) + "\nhigh_cut_hz=" +
         shortest(spec.filter.high_cut_hz) + "\norder=" + std::to_string(spec.filter.order) +
         "\nsample_rate_hz=" + shortest(spec.filter.sample_rate_hz) + "\nwindow_ms=" +
         shortest(spec.window.window_ms) + "\noverlap_ms=" + shortest(spec.window.overlap_ms) + "\n";
}

std::string preprocess_hash(const PreprocessSpec& spec) {
  const std::string t = preprocess_text(spec);
  return sha256_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(t.data()), t.size()));
}

// --- entry points --------------------------------------------------------------

int run(const std::vector<std::string>& args) {
  CLI::App app{"Long-term sEMG gesture recognition: synthesis, training, calibration schemes, reports"};
  app.name("emgtl");
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical fault.\n"
      "EMGTL_WORKERS=N runs N participant x seed tasks at once (default 1). Reports do not\n"
      "depend on N.");

  Common common;
  Overrides over;

  auto* synth = app.add_subcommand("synth", "Write a synthetic multi-session dataset in canonical form");
  std::optional<std::uint64_t> s_seed;
  std::optional<int> s_participants, s_sessions, s_eval_runs;
  std::optional<double> s_gesture_seconds;
  synth->add_option("-c,--config", common.config, "JSON synth spec, or a run config with dataset.synth");
  synth->add_option("-o,--out", common.out, "Output directory")->required();
  synth->add_flag("--force", common.force, "Replace a non-empty output directory");
  synth->add_option("--seed", s_seed, "Generator seed");
  synth->add_option("--participants", s_participants, "Number of participants");
  synth->add_option("--sessions", s_sessions, "Sessions per participant");
  synth->add_option("--gesture-seconds", s_gesture_seconds, "Seconds per gesture in each cycle");
  synth->add_option("--eval-runs", s_eval_runs, "Evaluation runs per session");

  auto* import = app.add_subcommand("import", "Convert a CSV tree into the canonical format");
  std::string from;
  double import_seconds = 5.0;
  import->add_option("--from", from, "<src>/<participant>/session_<k>/cycle_<c>.csv")->required();
  import->add_option("-o,--out", common.out, "Output directory")->required();
  import->add_option("--gesture-seconds", import_seconds, "Expected seconds per gesture")->capture_default_str();
  import->add_flag("--force", common.force, "Replace a non-empty output directory");

  auto* pre = app.add_subcommand("preprocess", "Filter and window a dataset; writes float32 windows and a summary");
  pre->add_option("-c,--config", common.config, "JSON run configuration (preprocess section used)");
  pre->add_option("--data", over.data, "Canonical dataset directory");
  pre->add_option("-o,--out", common.out, "Output directory")->required();
  pre->add_flag("--force", common.force, "Replace a non-empty output directory");

  auto* train = app.add_subcommand("train", "Train the selected schemes and write checkpoints and accuracies");
  add_run_flags(train, common, over);

  auto* bench = app.add_subcommand("benchmark", "Run every scheme x seed and write all reports");
  add_run_flags(bench, common, over);

  auto* eval = app.add_subcommand("evaluate", "Score one checkpoint on its session");
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint written by train or benchmark")->required();
  eval->add_option("-c,--config", common.config, "Run configuration the checkpoint was trained with");
  eval->add_option("--data", over.data, "Canonical dataset directory");
  eval->add_option("-o,--out", common.out, "Optional output directory for evaluate.tsv and bins");
  eval->add_flag("--force", common.force, "Replace a non-empty output directory");
  eval->add_option("--trim-transitions", over.trim,
                   "Evaluation windows starting less than this many seconds after their cue are dropped");

  auto* report = app.add_subcommand("report", "MAV/MSA day report and/or re-summarise a benchmark");
  std::string report_data, report_bench;
  report->add_option("-c,--config", common.config, "Run configuration (preprocess section used)");
  report->add_option("--data", report_data, "Canonical dataset directory");
  report->add_option("--bench", report_bench, "Benchmark output directory holding accuracy.tsv");
  report->add_option("-o,--out", common.out, "Output directory")->required();
  report->add_flag("--force", common.force, "Replace a non-empty output directory");

  std::vector<std::string> argv_store{"emgtl"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    try {
      app.parse(int(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 1;
    }
    if (*synth) return cmd_synth(common, s_seed, s_participants, s_sessions, s_gesture_seconds, s_eval_runs);
    if (*import) return cmd_import(common, from, import_seconds);
    if (*pre) return cmd_preprocess(common, over);
    if (*train) return run_grid(resolve(common, over), common.force, false);
    if (*bench) return run_grid(resolve(common, over), common.force, true);
    if (*eval) return cmd_evaluate(common, over, checkpoint);
    if (*report) return cmd_report(common, report_data, report_bench);
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalFault& e) {
    std::cerr << "numerical fault: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const DegenerateInput& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args);
}

}  // namespace emgtl::cli
