#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "agn/checkpoint.hpp"
#include "agn/error.hpp"
#include "agn/evaluator.hpp"
#include "agn/fileio.hpp"
#include "agn/gradsuite.hpp"
#include "agn/hash.hpp"
#include "agn/ingest.hpp"
#include "agn/kvconfig.hpp"
#include "agn/model_io.hpp"
#include "agn/ranker.hpp"
#include "agn/synthgen.hpp"
#include "agn/trainer.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using namespace agn;

namespace {

// Config file, then --set overrides, then --seed.
struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

void add_common(CLI::App* app, Common& c, bool with_config = true) {
  if (with_config) {
    app->add_option("--config", c.config, "key=value config file")->check(CLI::ExistingFile);
    app->add_option("--set", c.sets, "override one config key (key=value), repeatable");
  }
  app->add_option("--seed", c.seed, "random seed (overrides the config)");
  app->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

KvConfig merged(const Common& c) {
  KvConfig kv = c.config.empty() ? KvConfig{} : KvConfig::load(c.config);
  for (const std::string& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(s, "--set expects key=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (c.seed) kv.set("seed", std::to_string(*c.seed));
  return kv;
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string kv_text(const KvConfig& kv) {
  std::string t;
  for (const auto& [k, v] : kv.values()) t += k + "=" + v + "\n";
  return t;
}

void print(const Json& j) { std::cout << j.dump() << "\n"; }

// ---- synth

struct SynthArgs {
  Common c;
  std::size_t users = 2000, test_users = 0, items = 200;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  const WorldConfig w = WorldConfig::from_kv(merged(a.c));
  ensure_dir(a.out);
  const ActionVocab v = world_vocab();
  Json rep{{"seed", w.seed}};
  auto emit = [&](const WorldConfig& wc, std::size_t users, const std::string& name) {
    const SynthData d = generate_world(wc, users, a.items);
    write_samples(path_in(a.out, name + ".jsonl"), d.samples, v);
    write_oracle(path_in(a.out, name + ".oracle.csv"), d, v);
    rep[name] = {{"samples", d.samples.size()}, {"oracle_like_auc", oracle_auc(d.samples, d.oracle, v.id("Like"))}};
  };
  emit(w, a.users, "train");
  if (a.test_users) {
    WorldConfig t = w;
    t.seed = derive_seed(w.seed, "test");
    emit(t, a.test_users, "test");
  }
  write_schema(path_in(a.out, "schema.json"), DatasetSchema{v, world_user_spec(w), world_item_spec(w)});
  write_file_atomic(path_in(a.out, "world.kv"), kv_text(w.to_kv()));
  print(rep);
  return 0;
}

// ---- ingest

struct IngestArgs {
  Common c;
  std::string input, format = "tmall-csv", split_date = kTmallSplitDate, out;
  std::size_t history_len = 20;
};

int run_ingest(const IngestArgs& a) {
  const ActionVocab v = ActionVocab::ecommerce();
  const ParseResult p = parse_log(a.input, parse_log_format(a.format), v);
  const auto groups = build_sequences(p.events);
  const SplitResult s = split_and_assemble(groups, end_of_day(a.split_date), a.history_len);
  std::vector<std::string> extras;
  for (const RawEvent& e : p.events)
    for (const auto& [k, val] : e.extra)
      if (std::find(extras.begin(), extras.end(), k) == extras.end()) extras.push_back(k);
  std::sort(extras.begin(), extras.end());
  ensure_dir(a.out);
  write_samples(path_in(a.out, "train.jsonl"), s.train, v);
  write_samples(path_in(a.out, "test.jsonl"), s.test, v);
  write_schema(path_in(a.out, "schema.json"), DatasetSchema{v, tmall_user_spec(), tmall_item_spec(extras)});
  print(Json{{"rows_read", p.rows_read},
             {"rows_skipped", p.rows_skipped},
             {"groups", groups.size()},
             {"train", s.train.size()},
             {"test", s.test.size()}});
  return 0;
}

// ---- train

struct TrainArgs {
  Common c;
  std::string train, heldout, schema, out, resume;
};

int run_train(const TrainArgs& a) {
  const TrainConfig cfg = TrainConfig::from_kv(merged(a.c));
  const DatasetSchema schema = read_schema(a.schema);
  const auto samples = read_samples(a.train, schema.vocab);
  std::vector<Sample> heldout;
  if (!a.heldout.empty()) heldout = read_samples(a.heldout, schema.vocab);
  const Model m(assemble_model(cfg, schema.vocab, schema.user, schema.item));
  ParamStore store = m.init_params(cfg.seed);
  if (!a.resume.empty()) load_into(a.resume, store, m.config().hash());
  ensure_dir(a.out);
  write_model_config(path_in(a.out, "model.json"), m.config());
  write_file_atomic(path_in(a.out, "train.kv"), kv_text(cfg.to_kv()));
  TrainOptions o;
  o.checkpoint = path_in(a.out, "model.ckpt");
  o.heldout = heldout;
  o.jobs = a.c.jobs;
  const TrainReport r = train(m, store, samples, cfg, o);
  write_file_atomic(path_in(a.out, "report.json"), to_json(r).dump(2) + "\n");
  write_file_atomic(path_in(a.out, "timing.json"), Json{{"wall_time_sec", r.wall_time_sec}}.dump() + "\n");
  const double last = r.loss_curve.empty() ? 0.0 : r.loss_curve.back();
  print(Json{{"steps", r.steps}, {"final_step", r.final_step}, {"final_loss", last}});
  return 0;
}

// ---- loading a trained model

struct Loaded {
  Model model;
  ParamStore store;
};

Loaded load_model(const std::string& dir) {
  const ModelConfig cfg = read_model_config(path_in(dir, "model.json"));
  Model m(cfg);
  ParamStore s = m.init_params(0);
  load_into(path_in(dir, "model.ckpt"), s, cfg.hash());
  return {std::move(m), std::move(s)};
}

PeakModels peaks_from(const std::string& path, const ActionVocab& v, std::size_t bins, std::size_t w) {
  const auto samples = read_samples(path, v);
  std::vector<ActionSequence> seqs;
  for (const Sample& s : samples) seqs.push_back(s.target_seq);
  return fit_peak_models(seqs, v, bins, w);
}

// ---- eval / generate

struct EvalArgs {
  Common c;
  std::string model, data, out, csv, peaks;
  bool teacher_forced = false;
  std::size_t batch = 256;
};

int run_eval(const EvalArgs& a) {
  const Loaded l = load_model(a.model);
  const auto samples = read_samples(a.data, l.model.vocab());
  EvalOptions o;
  o.teacher_forced = a.teacher_forced;
  o.batch_size = a.batch;
  o.jobs = a.c.jobs;
  o.loss_weights = LossWeights{};
  PeakModels peaks;
  if (!a.peaks.empty()) {
    peaks = peaks_from(a.peaks, l.model.vocab(), 50, 2);
    o.peaks = &peaks;
  }
  const EvalReport r = evaluate(l.model, l.store, samples, o);
  const std::string text = to_json(r).dump(2) + "\n";
  if (a.out.empty())
    std::cout << text;
  else
    write_file_atomic(a.out, text);
  if (!a.csv.empty())
    write_file_atomic(a.csv, eval_table_csv({{fs::path(a.model).filename().string(), r}}, l.model.vocab()));
  return 0;
}

struct GenerateArgs {
  Common c;
  std::string model, data, out;
  std::size_t batch = 256;
};

int run_generate(const GenerateArgs& a) {
  const Loaded l = load_model(a.model);
  const auto samples = read_samples(a.data, l.model.vocab());
  EvalOptions o;
  o.batch_size = a.batch;
  o.jobs = a.c.jobs;
  const Predictions p = predict(l.model, l.store, samples, o);
  write_generations(a.out, samples, p, l.model.vocab());
  print(Json{{"generated", samples.size()}, {"out", a.out}});
  return 0;
}

// ---- rank

struct RankArgs {
  Common c;
  std::string generations, scores, schema, peaks, out;
};

std::map<std::string, double> read_scores(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::map<std::string, double> out;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (no == 1) {
      if (line.rfind("id,", 0) != 0) throw FormatError(path + ":1: expected header 'id,base'");
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError(path + ":" + std::to_string(no) + ": expected id,base");
    try {
      std::size_t used = 0;
      const std::string num = line.substr(comma + 1);
      const double b = std::stod(num, &used);
      if (used != num.size()) throw std::invalid_argument(num);
      if (!out.emplace(line.substr(0, comma), b).second)
        throw FormatError(path + ":" + std::to_string(no) + ": duplicate id");
    } catch (const std::logic_error&) {
      throw FormatError(path + ":" + std::to_string(no) + ": bad base score");
    }
  }
  return out;
}

int run_rank(const RankArgs& a) {
  const KvConfig kv = merged(a.c);
  kv.integer("seed");  // ranking is deterministic; the seed is accepted and unused
  const BoostPolicy policy = BoostPolicy::from_kv(kv);
  const ActionVocab v = a.schema.empty() ? world_vocab() : read_schema(a.schema).vocab;
  const auto gens = read_generations(a.generations, v);
  const auto scores = read_scores(a.scores);
  PeakModels peaks;
  if (!a.peaks.empty()) peaks = peaks_from(a.peaks, v, policy.bins, policy.smooth_width);
  std::vector<Candidate> cands;
  for (const GenerationRecord& g : gens) {
    const auto it = scores.find(g.id);
    if (it == scores.end()) throw FormatError("no base score for candidate '" + g.id + "'");
    cands.push_back({g.id, it->second, g.decoded});
  }
  const auto ranked = rank_candidates(cands, v, peaks, policy);
  write_file_atomic(a.out, ranking_csv(ranked));
  print(Json{{"ranked", ranked.size()}, {"peak_models", peaks.size()}, {"out", a.out}});
  return 0;
}

// ---- sweep

struct SweepArgs {
  Common c;
  std::string train, test, schema, out;
  std::vector<double> alpha{1.0}, beta{1.0}, gamma{0.0, 0.1, 1.0};
};

int run_sweep(const SweepArgs& a) {
  const TrainConfig base = TrainConfig::from_kv(merged(a.c));
  const DatasetSchema schema = read_schema(a.schema);
  const auto train_set = read_samples(a.train, schema.vocab);
  const auto test_set = read_samples(a.test, schema.vocab);
  std::ostringstream csv;
  csv.precision(17);
  csv << "alpha,beta,gamma";
  for (const auto& n : schema.vocab.names()) csv << "," << n << "_auc," << n << "_mae";
  csv << ",order_violation_rate\n";
  Json rows = Json::array();
  for (double al : a.alpha)
    for (double be : a.beta)
      for (double ga : a.gamma) {
        TrainConfig cfg = base;
        cfg.weights = {al, be, ga};
        cfg.use_order_loss = ga > 0;
        cfg.validate();
        const Model m(assemble_model(cfg, schema.vocab, schema.user, schema.item));
        ParamStore s = m.init_params(cfg.seed);
        train(m, s, train_set, cfg);
        EvalOptions eo;
        eo.jobs = a.c.jobs;
        const EvalReport r = evaluate(m, s, test_set, eo);
        csv << al << "," << be << "," << ga;
        for (const ActionMetrics& am : r.actions) {
          csv << ",";
          if (am.auc) csv << *am.auc;
          csv << ",";
          if (am.mae) csv << *am.mae;
        }
        csv << "," << r.generated->order_violation_rate() << "\n";
        Json row{{"alpha", al}, {"beta", be}, {"gamma", ga}};
        for (const ActionMetrics& am : r.actions) row[am.action + "_auc"] = am.auc ? Json(*am.auc) : Json();
        row["order_violation_rate"] = r.generated->order_violation_rate();
        rows.push_back(std::move(row));
      }
  write_file_atomic(a.out, csv.str());
  print(Json{{"rows", rows}});
  return 0;
}

// ---- gradcheck

struct GradArgs {
  Common c;
  std::size_t seeds = 20;
  bool verbose = false;
};

int run_gradcheck(const GradArgs& a) {
  GradSuiteOptions o;
  o.seeds = a.seeds;
  o.base_seed = a.c.seed.value_or(0);
  const GradSuiteReport r = run_grad_suite(o, [&](const GradSuiteCase& c) {
    if (a.verbose || !c.result.ok)
      print(Json{{"case", c.name},
                 {"seed", c.seed},
                 {"ok", c.result.ok},
                 {"max_rel_error", c.result.max_rel_error},
                 {"worst", c.result.worst},
                 {"checked", c.result.checked},
                 {"skipped", c.result.skipped}});
  });
  print(Json{{"cases", r.cases.size()}, {"failures", r.failures()}, {"max_rel_error", r.max_rel_error()}, {"ok", r.ok()}});
  return r.ok() ? 0 : 1;
}

void error_record(const std::string& kind, const std::string& key, const std::string& msg, Json extra = {}) {
  Json j{{"error", kind}};
  if (!key.empty()) j["key"] = key;
  if (extra.is_object())
    for (auto& [k, v] : extra.items()) j[k] = v;
  j["message"] = msg;
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agn: action-sequence generation for recommendation"};
  app.require_subcommand(1);

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "generate a synthetic world (train/test jsonl, oracle csv, schema)");
  add_common(synth, sy.c);
  synth->add_option("--users", sy.users, "training users");
  synth->add_option("--test-users", sy.test_users, "held-out users (0 = none)");
  synth->add_option("--items", sy.items, "item catalogue size");
  synth->add_option("--out", sy.out, "output directory")->required();

  IngestArgs in;
  auto* ingest = app.add_subcommand("ingest", "turn an event log into train/test jsonl and a schema");
  add_common(ingest, in.c, false);
  ingest->add_option("--input", in.input, "event log")->required()->check(CLI::ExistingFile);
  ingest->add_option("--format", in.format, "tmall-csv or agn-jsonl");
  ingest->add_option("--split-date", in.split_date, "last training day (UTC), YYYY-MM-DD");
  ingest->add_option("--history-len", in.history_len, "history items per sample");
  ingest->add_option("--out", in.out, "output directory")->required();

  TrainArgs tr;
  auto* trainc = app.add_subcommand("train", "train a model (writes model.ckpt, model.json, report.json)");
  add_common(trainc, tr.c);
  trainc->add_option("--train", tr.train, "training samples")->required()->check(CLI::ExistingFile);
  trainc->add_option("--heldout", tr.heldout, "held-out samples for eval points")->check(CLI::ExistingFile);
  trainc->add_option("--schema", tr.schema, "schema.json")->required()->check(CLI::ExistingFile);
  trainc->add_option("--resume", tr.resume, "checkpoint to resume from")->check(CLI::ExistingFile);
  trainc->add_option("--out", tr.out, "output directory")->required();

  EvalArgs ev;
  auto* evalc = app.add_subcommand("eval", "evaluate a trained model (EvalReport JSON)");
  add_common(evalc, ev.c, false);
  evalc->add_option("--model", ev.model, "directory written by train")->required()->check(CLI::ExistingDirectory);
  evalc->add_option("--data", ev.data, "samples to evaluate")->required()->check(CLI::ExistingFile);
  evalc->add_option("--out", ev.out, "report path (default stdout)");
  evalc->add_option("--csv", ev.csv, "also write a one-row metrics table");
  evalc->add_option("--peaks-from", ev.peaks, "samples whose timings define peak models")->check(CLI::ExistingFile);
  evalc->add_option("--batch", ev.batch, "evaluation batch size")->check(CLI::PositiveNumber);
  evalc->add_flag("--teacher-forced", ev.teacher_forced, "score with ground-truth prefixes (diagnosis)");

  GenerateArgs ge;
  auto* gen = app.add_subcommand("generate", "decode action sequences (generation JSONL)");
  add_common(gen, ge.c, false);
  gen->add_option("--model", ge.model, "directory written by train")->required()->check(CLI::ExistingDirectory);
  gen->add_option("--data", ge.data, "samples")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", ge.out, "output jsonl")->required();
  gen->add_option("--batch", ge.batch, "batch size")->check(CLI::PositiveNumber);

  RankArgs ra;
  auto* rank = app.add_subcommand("rank", "re-rank candidates with sequence boosts (CSV)");
  add_common(rank, ra.c, false);
  rank->add_option("--set", ra.c.sets, "override one policy key (key=value), repeatable");
  rank->add_option("--generations", ra.generations, "generation jsonl")->required()->check(CLI::ExistingFile);
  rank->add_option("--scores", ra.scores, "base scores csv (id,base)")->required()->check(CLI::ExistingFile);
  rank->add_option("--policy", ra.c.config, "policy key=value file")->check(CLI::ExistingFile);
  rank->add_option("--schema", ra.schema, "schema.json (default: synthetic vocabulary)")->check(CLI::ExistingFile);
  rank->add_option("--peaks-from", ra.peaks, "samples whose timings define peak models")->check(CLI::ExistingFile);
  rank->add_option("--out", ra.out, "output csv")->required();

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "grid over loss weights; one row per cell");
  add_common(sweep, sw.c);
  sweep->add_option("--train", sw.train, "training samples")->required()->check(CLI::ExistingFile);
  sweep->add_option("--test", sw.test, "test samples")->required()->check(CLI::ExistingFile);
  sweep->add_option("--schema", sw.schema, "schema.json")->required()->check(CLI::ExistingFile);
  sweep->add_option("--alpha", sw.alpha, "alpha values")->delimiter(',');
  sweep->add_option("--beta", sw.beta, "beta values")->delimiter(',');
  sweep->add_option("--gamma", sw.gamma, "gamma values")->delimiter(',');
  sweep->add_option("--out", sw.out, "output csv")->required();

  GradArgs gr;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  add_common(grad, gr.c, false);
  grad->add_option("--seeds", gr.seeds, "random seeds")->check(CLI::PositiveNumber);
  grad->add_flag("--verbose", gr.verbose, "one line per case");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_record("usage", "", e.what());
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(sy);
    if (ingest->parsed()) return run_ingest(in);
    if (trainc->parsed()) return run_train(tr);
    if (evalc->parsed()) return run_eval(ev);
    if (gen->parsed()) return run_generate(ge);
    if (rank->parsed()) return run_rank(ra);
    if (sweep->parsed()) return run_sweep(sw);
    if (grad->parsed()) return run_gradcheck(gr);
  } catch (const ConfigError& e) {
    error_record("config", e.key(), e.what());
    return 2;
  } catch (const TrainError& e) {
    error_record("train", "", e.what(), Json{{"step", e.step()}});
    return 1;
  } catch (const Error& e) {
    error_record(e.kind(), "", e.what());
    return 1;
  } catch (const std::exception& e) {
    error_record("internal", "", e.what());
    return 1;
  }
  return 1;
}
