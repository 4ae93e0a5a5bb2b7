#include "agn/evaluator.hpp"

#include <cmath>
#include <sstream>
#include <thread>

#include "agn/batch.hpp"
#include "agn/error.hpp"
#include "agn/fileio.hpp"
#include "agn/metrics.hpp"

namespace agn {

namespace {

using Json = nlohmann::ordered_json;

template <class T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

std::vector<const Sample*> pointers(std::span<const Sample> samples, std::size_t lo, std::size_t hi) {
  std::vector<const Sample*> p;
  for (std::size_t i = lo; i < hi; ++i) p.push_back(&samples[i]);
  return p;
}

// Runs fn(chunk_index) for every chunk, spread over `jobs` threads. Each chunk
// writes only to its own output slots, so results do not depend on `jobs`.
template <class F>
void for_chunks(std::size_t chunks, std::size_t jobs, F fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, chunks));
  if (jobs == 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(jobs);
  for (std::size_t j = 0; j < jobs; ++j)
    pool.emplace_back([&, j] {
      try {
        for (std::size_t c = j; c < chunks; c += jobs) fn(c);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<std::vector<GenStep>> steps_from(const AdeSteps& s, std::size_t n) {
  const NDArray& p = s.probs.value();
  const NDArray& t = s.timing.value();
  const std::size_t L = p.dim(1), C = p.dim(2);
  std::vector<std::vector<GenStep>> out(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < L; ++i) {
      GenStep g;
      g.class_probs.assign(p.data().begin() + (r * L + i) * C, p.data().begin() + (r * L + i + 1) * C);
      g.timing_pred = t[r * L + i];
      out[r].push_back(std::move(g));
    }
  return out;
}

}  // namespace

SequenceStats sequence_stats(std::span<const ActionSequence> seqs, const ActionVocab& vocab,
                             const PeakModels* peaks) {
  SequenceStats s;
  const auto like = vocab.find("Like"), follow = vocab.find("Follow");
  std::size_t ff = 0, near = 0;
  for (const ActionSequence& q : seqs) {
    ++s.sequences;
    s.monotone += is_monotone(q);
    if (like && follow) {
      auto pl = q.position(*like), pf = q.position(*follow);
      if (pl && pf) {
        ++s.like_and_follow;
        ff += *pf < *pl;
      }
    }
    for (const ActionEvent& e : q.events) {
      if (e.action == vocab.start() || e.action == vocab.leave()) continue;
      ++s.timed_actions;
      if (peaks) {
        auto it = peaks->find(e.action);
        near += it != peaks->end() && it->second.near_peak(e.timing_norm);
      }
    }
  }
  if (s.like_and_follow) {
    s.follow_first = static_cast<double>(ff) / static_cast<double>(s.like_and_follow);
    s.like_first = 1.0 - *s.follow_first;
  }
  if (peaks && s.timed_actions) s.near_peak = static_cast<double>(near) / static_cast<double>(s.timed_actions);
  return s;
}

std::optional<double> action_auc(std::span<const Sample> samples, std::span<const double> scores,
                                 ActionId action) {
  if (samples.size() != scores.size()) throw ShapeError("action_auc: scores and samples differ in length");
  std::vector<int> labels;
  std::size_t pos = 0;
  for (const Sample& s : samples) {
    labels.push_back(s.target_seq.contains(action) ? 1 : 0);
    pos += labels.back();
  }
  if (pos == 0 || pos == samples.size()) return std::nullopt;
  return auc(scores, labels);
}

std::vector<ActionMetrics> action_metrics(std::span<const Sample> samples,
                                          std::span<const std::vector<GenStep>> steps,
                                          const ActionVocab& vocab) {
  if (samples.size() != steps.size()) throw ShapeError("action_metrics: steps and samples differ in length");
  std::vector<ActionMetrics> out;
  for (ActionId a = 0; a < vocab.num_actions(); ++a) {
    ActionMetrics m;
    m.action = vocab.name(a);
    std::vector<double> scores;
    double err = 0, err_raw = 0, err_half = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      scores.push_back(action_probability(steps[i], a, vocab));
      const auto p = samples[i].target_seq.position(a);
      if (!p) {
        ++m.negatives;
        continue;
      }
      ++m.positives;
      const double label = samples[i].target_seq.events[*p].timing_norm;
      ++m.timing_count;
      // a model that never gives the action any mass has no normalized estimate;
      // fall back to the raw one (which is then 0)
      double norm;
      try {
        norm = action_timing_estimate(steps[i], a, true, vocab);
      } catch (const ValueError&) {
        norm = 0.0;
      }
      err += std::fabs(norm - label);
      err_raw += std::fabs(action_timing_estimate(steps[i], a, false, vocab) - label);
      err_half += std::fabs(0.5 - label);
    }
    m.auc = action_auc(samples, scores, a);
    if (m.timing_count) {
      const double c = static_cast<double>(m.timing_count);
      m.mae = err / c;
      m.mae_raw = err_raw / c;
      m.mae_half = err_half / c;
    }
    out.push_back(std::move(m));
  }
  return out;
}

Predictions predict(const Model& model, const ParamStore& store, std::span<const Sample> samples,
                    const EvalOptions& opts) {
  if (opts.batch_size == 0) throw ConfigError("batch_size", "eval batch size must be >= 1");
  Predictions out;
  out.steps.resize(samples.size());
  if (!opts.teacher_forced) out.decoded.resize(samples.size());
  const std::size_t chunks = (samples.size() + opts.batch_size - 1) / opts.batch_size;
  for_chunks(chunks, opts.jobs, [&](std::size_t c) {
    const std::size_t lo = c * opts.batch_size, hi = std::min(samples.size(), lo + opts.batch_size);
    const auto ptrs = pointers(samples, lo, hi);
    const Batch b = make_batch(ptrs, model.vocab(), model.config().history_len);
    if (opts.teacher_forced) {
      Tape tape(false);
      const AdeSteps s = model.teacher_forced(tape, store, b, model.context(tape, store, b));
      auto st = steps_from(s, b.n);
      for (std::size_t r = 0; r < b.n; ++r) out.steps[lo + r] = std::move(st[r]);
    } else {
      auto gen = model.generate(store, b);
      for (std::size_t r = 0; r < b.n; ++r) {
        out.steps[lo + r] = std::move(gen[r].steps);
        out.decoded[lo + r] = std::move(gen[r].decoded);
      }
    }
  });
  return out;
}

LossValues eval_losses(const Model& model, const ParamStore& store, std::span<const Sample> samples,
                       const LossWeights& w, std::size_t batch_size) {
  if (samples.empty()) throw ValueError("eval_losses needs samples");
  if (batch_size == 0) throw ConfigError("batch_size", "eval batch size must be >= 1");
  LossValues sum;
  for (std::size_t lo = 0; lo < samples.size(); lo += batch_size) {
    const std::size_t hi = std::min(samples.size(), lo + batch_size);
    const auto ptrs = pointers(samples, lo, hi);
    const Batch b = make_batch(ptrs, model.vocab(), model.config().history_len);
    Tape tape(false);
    const LossParts p = model.loss(tape, store, b, w);
    const double k = static_cast<double>(hi - lo);
    sum.cls += k * p.cls.value().item();
    sum.reg += k * p.reg.value().item();
    sum.order += k * p.order.value().item();
    sum.total += k * p.total.value().item();
  }
  const double n = static_cast<double>(samples.size());
  return {sum.cls / n, sum.reg / n, sum.order / n, sum.total / n};
}

const ActionMetrics& EvalReport::action(const std::string& name) const {
  for (const ActionMetrics& m : actions)
    if (m.action == name) return m;
  throw ValueError("no metrics for action '" + name + "'");
}

EvalReport evaluate(const Model& model, const ParamStore& store, std::span<const Sample> samples,
                    const EvalOptions& opts) {
  if (samples.empty()) throw ValueError("evaluate needs samples");
  EvalReport r;
  r.mode = opts.teacher_forced ? "teacher" : "free";
  r.samples = samples.size();
  const Predictions p = predict(model, store, samples, opts);
  r.actions = action_metrics(samples, p.steps, model.vocab());
  if (!opts.teacher_forced) r.generated = sequence_stats(p.decoded, model.vocab(), opts.peaks);
  if (opts.loss_weights) r.loss = eval_losses(model, store, samples, *opts.loss_weights, opts.batch_size);
  return r;
}

Json to_json(const ActionMetrics& m) {
  return Json{{"action", m.action},       {"positives", m.positives},   {"negatives", m.negatives},
              {"auc", opt(m.auc)},        {"timing_count", m.timing_count}, {"mae", opt(m.mae)},
              {"mae_raw", opt(m.mae_raw)}, {"mae_const_half", opt(m.mae_half)}};
}

Json to_json(const SequenceStats& s) {
  return Json{{"sequences", s.sequences},
              {"monotone", s.monotone},
              {"order_violation_rate", s.order_violation_rate()},
              {"like_and_follow", s.like_and_follow},
              {"follow_first", opt(s.follow_first)},
              {"like_first", opt(s.like_first)},
              {"timed_actions", s.timed_actions},
              {"near_peak", opt(s.near_peak)}};
}

Json to_json(const LossValues& l) {
  return Json{{"L_cls", l.cls}, {"L_reg", l.reg}, {"L_order", l.order}, {"total", l.total}};
}

Json to_json(const EvalReport& r) {
  Json j{{"mode", r.mode}, {"samples", r.samples}};
  Json a = Json::array();
  for (const ActionMetrics& m : r.actions) a.push_back(to_json(m));
  j["actions"] = a;
  j["generated"] = r.generated ? to_json(*r.generated) : Json(nullptr);
  j["loss"] = r.loss ? to_json(*r.loss) : Json(nullptr);
  return j;
}

std::string eval_table_csv(const std::vector<std::pair<std::string, EvalReport>>& rows,
                           const ActionVocab& vocab) {
  std::ostringstream o;
  o.precision(6);
  o << std::fixed;
  o << "model";
  for (const auto& n : vocab.names()) o << "," << n << "_auc," << n << "_mae";
  o << "\n";
  auto cell = [&](const std::optional<double>& v) {
    if (v) o << *v;
  };
  for (const auto& [name, r] : rows) {
    o << name;
    for (const auto& n : vocab.names()) {
      const ActionMetrics& m = r.action(n);
      o << ",";
      cell(m.auc);
      o << ",";
      cell(m.mae);
    }
    o << "\n";
  }
  return o.str();
}

std::string generation_to_json(const Sample& sample, std::span<const GenStep> steps,
                               const ActionSequence& decoded, const ActionVocab& vocab) {
  const double dur = sample.duration_sec();
  Json dec = Json::array();
  for (const ActionEvent& e : decoded.events)
    dec.push_back(Json{{"action", vocab.name(e.action)}, {"t", e.timing_norm}, {"t_sec", e.timing_norm * dur}});
  Json st = Json::array();
  for (const GenStep& g : steps) {
    Json probs = Json::object();
    for (ActionId c = 0; c < g.class_probs.size(); ++c) probs[vocab.name(c)] = g.class_probs[c];
    st.push_back(Json{{"probs", probs}, {"timing", g.timing_pred}});
  }
  Json pa = Json::object(), tim = Json::object();
  for (ActionId a = 0; a < vocab.num_actions(); ++a) {
    pa[vocab.name(a)] = action_probability(steps, a, vocab);
    double t = 0.0;
    try {
      t = action_timing_estimate(steps, a, true, vocab);
    } catch (const ValueError&) {
    }
    tim[vocab.name(a)] = t;
  }
  return Json{{"id", sample.id}, {"duration_sec", dur}, {"decoded", dec}, {"steps", st}, {"p_act", pa}, {"timing", tim}}
      .dump();
}

void write_generations(const std::string& path, std::span<const Sample> samples, const Predictions& p,
                       const ActionVocab& vocab) {
  if (p.decoded.size() != samples.size() || p.steps.size() != samples.size())
    throw ValueError("generation output needs free-running predictions for every sample");
  std::string out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out += generation_to_json(samples[i], p.steps[i], p.decoded[i], vocab);
    out += "\n";
  }
  write_file_atomic(path, out);
}

std::vector<GenerationRecord> read_generations(const std::string& path, const ActionVocab& vocab) {
  std::istringstream in(read_file(path));
  std::vector<GenerationRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    try {
      const Json j = Json::parse(line);
      GenerationRecord r;
      r.id = j.at("id").get<std::string>();
      r.decoded.duration_sec = j.at("duration_sec").get<double>();
      for (const Json& e : j.at("decoded")) {
        ActionEvent ev{vocab.id(e.at("action").get<std::string>()), e.at("t").get<double>(), std::nullopt};
        if (e.contains("t_sec")) ev.timing_sec = e.at("t_sec").get<double>();
        r.decoded.events.push_back(ev);
      }
      if (j.contains("steps"))
        for (const Json& s : j.at("steps")) {
          GenStep g;
          g.timing_pred = s.at("timing").get<double>();
          g.class_probs.assign(vocab.num_classes(), 0.0);
          for (ActionId c = 0; c < vocab.num_classes(); ++c) g.class_probs[c] = s.at("probs").at(vocab.name(c)).get<double>();
          r.steps.push_back(std::move(g));
        }
      if (auto err = check_sequence(r.decoded, vocab, SequenceChecks{false})) throw FormatError(*err);
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    } catch (const ValueError& e) {
      throw FormatError(where + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  return out;
}

}  // namespace agn
