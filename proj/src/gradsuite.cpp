#include "agn/gradsuite.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "agn/batch.hpp"
#include "agn/cam.hpp"
#include "agn/hash.hpp"
#include "agn/model.hpp"
#include "agn/ops.hpp"
#include "agn/synthgen.hpp"

namespace agn {

namespace {

NDArray random_array(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  NDArray a(std::move(s));
  for (auto& v : a.raw()) v = uniform(rng, lo, hi);
  return a;
}

// Contract the output against fixed random weights so every coordinate matters.
Var project(Var x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ops::sum(ops::mul(x, x.tape->constant(random_array(x.shape(), rng))));
}

struct Case {
  std::string name;
  // builds the loss, the inputs and the parameter store for one seed
  std::function<GradCheckResult(std::uint64_t seed, const GradSuiteOptions& opt)> run;
};

GradCheckResult op_case(std::uint64_t seed, const GradCheckOptions& opt,
                        const std::function<Var(const std::vector<Var>&)>& f, std::vector<NDArray> inputs) {
  const std::uint64_t w = derive_seed(seed, "weights");
  auto loss = [&](Tape&, const ParamStore&, const std::vector<Var>& in) { return project(f(in), w); };
  return gradcheck(loss, ParamStore{}, inputs, opt);
}

// Small random dims so the shapes vary from seed to seed.
std::size_t dim(std::mt19937_64& rng, std::size_t lo, std::size_t hi) { return lo + uniform_index(rng, hi - lo + 1); }

std::vector<Case> op_cases() {
  using In = const std::vector<Var>&;
  auto make = [](std::string name, auto build) {
    return Case{"op:" + name, [build](std::uint64_t seed, const GradSuiteOptions& opt) {
                  std::mt19937_64 rng(derive_seed(seed, "inputs"));
                  auto [f, inputs] = build(rng);
                  return op_case(seed, opt.check, f, std::move(inputs));
                }};
  };
  using Built = std::pair<std::function<Var(const std::vector<Var>&)>, std::vector<NDArray>>;
  std::vector<Case> c;
  c.push_back(make("matmul", [](std::mt19937_64& r) -> Built {
    const std::size_t b = dim(r, 1, 3), m = dim(r, 2, 4), k = dim(r, 2, 5), n = dim(r, 2, 4);
    return {[](In in) { return ops::matmul(in[0], in[1]); }, {random_array({b, m, k}, r), random_array({k, n}, r)}};
  }));
  c.push_back(make("matmul-batched", [](std::mt19937_64& r) -> Built {
    const std::size_t b = dim(r, 1, 3), m = dim(r, 2, 4), k = dim(r, 2, 5), n = dim(r, 2, 4);
    return {[](In in) { return ops::matmul(in[0], in[1]); },
            {random_array({b, m, k}, r), random_array({b, k, n}, r)}};
  }));
  c.push_back(make("transpose", [](std::mt19937_64& r) -> Built {
    return {[](In in) { return ops::transpose(in[0]); }, {random_array({dim(r, 1, 3), dim(r, 2, 4), dim(r, 2, 4)}, r)}};
  }));
  c.push_back(make("add", [](std::mt19937_64& r) -> Built {
    const std::size_t a = dim(r, 1, 3), b = dim(r, 2, 4), d = dim(r, 2, 5);
    return {[](In in) { return ops::add(in[0], in[1]); }, {random_array({a, b, d}, r), random_array({d}, r)}};
  }));
  c.push_back(make("sub", [](std::mt19937_64& r) -> Built {
    const std::size_t a = dim(r, 1, 3), b = dim(r, 2, 4), d = dim(r, 2, 5);
    return {[](In in) { return ops::sub(in[0], in[1]); }, {random_array({a, b, d}, r), random_array({a, 1, d}, r)}};
  }));
  c.push_back(make("mul", [](std::mt19937_64& r) -> Built {
    const std::size_t a = dim(r, 1, 3), b = dim(r, 2, 4), d = dim(r, 2, 5);
    return {[](In in) { return ops::mul(in[0], in[1]); }, {random_array({a, b, d}, r), random_array({a, b, 1}, r)}};
  }));
  c.push_back(make("scale", [](std::mt19937_64& r) -> Built {
    const double k = uniform(r, -3, 3);
    return {[k](In in) { return ops::scale(in[0], k); }, {random_array({dim(r, 1, 4), dim(r, 2, 5)}, r)}};
  }));
  c.push_back(make("concat", [](std::mt19937_64& r) -> Built {
    const std::size_t a = dim(r, 1, 3);
    return {[](In in) { return ops::concat({in[0], in[1], in[2]}); },
            {random_array({a, dim(r, 1, 3)}, r), random_array({a, dim(r, 1, 3)}, r), random_array({a, 1}, r)}};
  }));
  c.push_back(make("slice", [](std::mt19937_64& r) -> Built {
    const std::size_t a = dim(r, 2, 4), b = dim(r, 3, 6);
    const std::size_t axis = uniform_index(r, 2), n = axis ? b : a;
    const std::size_t lo = uniform_index(r, n - 1), hi = lo + 1 + uniform_index(r, n - lo - 1);
    return {[=](In in) { return ops::slice(in[0], axis, lo, hi); }, {random_array({a, b}, r)}};
  }));
  c.push_back(make("reshape", [](std::mt19937_64& r) -> Built {
    const std::size_t a = dim(r, 2, 3), b = dim(r, 2, 4);
    return {[=](In in) { return ops::reshape(in[0], {b, a}); }, {random_array({a, b}, r)}};
  }));
  c.push_back(make("relu", [](std::mt19937_64& r) -> Built {
    return {[](In in) { return ops::relu(in[0]); }, {random_array({dim(r, 2, 4), dim(r, 3, 6)}, r)}};
  }));
  c.push_back(make("sigmoid", [](std::mt19937_64& r) -> Built {
    return {[](In in) { return ops::sigmoid(in[0]); }, {random_array({dim(r, 2, 4), dim(r, 3, 6)}, r, -4, 4)}};
  }));
  c.push_back(make("log", [](std::mt19937_64& r) -> Built {
    return {[](In in) { return ops::log(in[0]); }, {random_array({dim(r, 2, 4), dim(r, 3, 6)}, r, 0.2, 3)}};
  }));
  c.push_back(make("softmax", [](std::mt19937_64& r) -> Built {
    return {[](In in) { return ops::softmax(in[0]); }, {random_array({dim(r, 1, 3), dim(r, 2, 3), dim(r, 2, 6)}, r, -3, 3)}};
  }));
  c.push_back(make("log_softmax", [](std::mt19937_64& r) -> Built {
    return {[](In in) { return ops::log_softmax(in[0]); }, {random_array({dim(r, 2, 4), dim(r, 2, 6)}, r, -3, 3)}};
  }));
  c.push_back(make("layer_norm", [](std::mt19937_64& r) -> Built {
    return {[](In in) { return ops::layer_norm(in[0]); }, {random_array({dim(r, 2, 4), dim(r, 3, 7)}, r, -2, 2)}};
  }));
  c.push_back(make("embedding", [](std::mt19937_64& r) -> Built {
    const std::size_t v = dim(r, 3, 6);
    std::vector<std::size_t> idx(dim(r, 2, 7));
    for (auto& i : idx) i = uniform_index(r, v);
    return {[idx](In in) { return ops::embedding(in[0], idx); }, {random_array({v, dim(r, 2, 4)}, r)}};
  }));
  c.push_back(make("masked_fill", [](std::mt19937_64& r) -> Built {
    const std::size_t a = dim(r, 2, 4), b = dim(r, 3, 6);
    NDArray mask({a, b});
    for (auto& m : mask.raw()) m = uniform01(r) < 0.4 ? 1.0 : 0.0;
    for (std::size_t i = 0; i < a; ++i) mask[i * b] = 0.0;  // keep a visible key per row
    return {[mask](In in) { return ops::softmax(ops::masked_fill(in[0], mask, -1e9)); }, {random_array({a, b}, r)}};
  }));
  c.push_back(make("sum", [](std::mt19937_64& r) -> Built {
    return {[](In in) { return ops::sum(in[0]); }, {random_array({dim(r, 1, 4), dim(r, 2, 5)}, r)}};
  }));
  c.push_back(make("mean", [](std::mt19937_64& r) -> Built {
    return {[](In in) { return ops::mean(in[0]); }, {random_array({dim(r, 1, 4), dim(r, 2, 5)}, r)}};
  }));
  c.push_back(make("sum_axis", [](std::mt19937_64& r) -> Built {
    const std::size_t axis = uniform_index(r, 3);
    const bool keep = uniform01(r) < 0.5;
    return {[=](In in) { return ops::sum_axis(in[0], axis, keep); },
            {random_array({dim(r, 2, 3), dim(r, 2, 4), dim(r, 2, 4)}, r)}};
  }));
  c.push_back(make("squared_error", [](std::mt19937_64& r) -> Built {
    const std::size_t a = dim(r, 2, 4), b = dim(r, 2, 5);
    return {[](In in) { return ops::squared_error(in[0], in[1]); }, {random_array({a, b}, r), random_array({a, b}, r)}};
  }));
  return c;
}

ModelConfig suite_model(HseMode mode, bool use_cam, const WorldConfig& w) {
  ModelConfig c;
  c.vocab = world_vocab();
  c.user_spec = world_user_spec(w);
  c.item_spec = world_item_spec(w);
  c.d_model = 8;
  c.n_heads = 2;
  c.mlp_hidden = 8;
  c.gate_hidden = 6;
  c.tower_hidden = 6;
  c.history_len = 3;
  c.hse_mode = mode;
  c.use_cam = use_cam;
  return c;
}

// Three synthetic requests; the last one has its history dropped so the
// no-history path is exercised too.
std::vector<Sample> suite_samples(const WorldConfig& w) {
  SynthData d = generate_world(w, 3, 6);
  d.samples.resize(3);
  d.samples.back().history.clear();
  return d.samples;
}

WorldConfig suite_world(std::uint64_t seed) {
  WorldConfig w;
  w.seed = derive_seed(seed, "world");
  w.hist_min = 2;
  w.hist_max = 4;
  w.history_len = 3;
  w.like_base = 0.4;
  w.follow_base = 0.4;
  w.forward_base = 0.4;
  w.collect_base = 0.4;
  return w;
}

GradCheckOptions module_options(const GradSuiteOptions& opt, std::uint64_t seed) {
  GradCheckOptions o = opt.check;
  o.max_coords = opt.module_coords;
  o.seed = derive_seed(seed, "coords");
  return o;
}

std::vector<Case> module_cases() {
  std::vector<Case> c;
  for (bool causal : {false, true}) {
    c.push_back({std::string("module:cam_forward") + (causal ? "-causal" : ""),
                 [causal](std::uint64_t seed, const GradSuiteOptions& opt) {
                   std::mt19937_64 rng(derive_seed(seed, "cam"));
                   CamConfig k;
                   k.d_model = 8;
                   k.n_heads = 2;
                   k.d_ctx = 5;
                   k.mlp_hidden = 8;
                   k.gate_hidden = 6;
                   k.causal = causal;
                   Cam cam("cam", k);
                   ParamStore s(derive_seed(seed, "cam.params"));
                   cam.register_params(s);
                   const std::size_t n = 2, l = 4;
                   NDArray mask({n, l}, 0.0);
                   mask[n * l - 1] = 1.0;
                   const std::uint64_t wseed = derive_seed(seed, "weights");
                   auto loss = [&](Tape&, const ParamStore& st, const std::vector<Var>& in) {
                     return project(cam.forward(*in[0].tape, st, in[0], in[1], mask).out, wseed);
                   };
                   GradCheckOptions o = module_options(opt, seed);
                   o.max_coords = 0;
                   return gradcheck(loss, s, {random_array({n, l, 8}, rng), random_array({n, 5}, rng)}, o);
                 }});
  }
  for (HseMode mode : {HseMode::kFull, HseMode::kNoActionSeq, HseMode::kSumPool}) {
    c.push_back({std::string("module:encode_history-") + hse_mode_name(mode),
                 [mode](std::uint64_t seed, const GradSuiteOptions& opt) {
                   const WorldConfig w = suite_world(seed);
                   const Model m(suite_model(mode, true, w));
                   const ParamStore s = m.init_params(derive_seed(seed, "params"));
                   const std::vector<Sample> samples = suite_samples(w);
                   const Batch b = make_batch(samples, m.vocab(), m.config().history_len);
                   std::mt19937_64 rng(derive_seed(seed, "hse"));
                   const std::size_t di = m.config().d_item();
                   const std::uint64_t wseed = derive_seed(seed, "weights");
                   auto loss = [&](Tape& t, const ParamStore& st, const std::vector<Var>& in) {
                     return project(m.hse().encode(t, st, b, in[0], in[1]), wseed);
                   };
                   return gradcheck(loss, s, {random_array({b.n * b.hist_len, di}, rng), random_array({b.n, di}, rng)},
                                    module_options(opt, seed));
                 }});
  }
  for (bool use_cam : {true, false}) {
    c.push_back({std::string("module:teacher_forced_logits") + (use_cam ? "" : "-plain"),
                 [use_cam](std::uint64_t seed, const GradSuiteOptions& opt) {
                   const WorldConfig w = suite_world(seed);
                   const Model m(suite_model(HseMode::kFull, use_cam, w));
                   const ParamStore s = m.init_params(derive_seed(seed, "params"));
                   const std::vector<Sample> samples = suite_samples(w);
                   const Batch b = make_batch(samples, m.vocab(), m.config().history_len);
                   std::mt19937_64 rng(derive_seed(seed, "ade"));
                   const std::uint64_t wseed = derive_seed(seed, "weights");
                   auto loss = [&](Tape& t, const ParamStore& st, const std::vector<Var>& in) {
                     const AdeSteps a = m.teacher_forced(t, st, b, in[0]);
                     return ops::add(project(a.log_probs, wseed), project(a.timing, wseed + 1));
                   };
                   return gradcheck(loss, s, {random_array({b.n, m.config().d_ctx()}, rng)}, module_options(opt, seed));
                 }});
  }
  for (HseMode mode : {HseMode::kFull, HseMode::kNoActionSeq, HseMode::kSumPool}) {
    c.push_back({std::string("module:total_loss-") + hse_mode_name(mode),
                 [mode](std::uint64_t seed, const GradSuiteOptions& opt) {
                   const WorldConfig w = suite_world(seed);
                   const Model m(suite_model(mode, true, w));
                   const ParamStore s = m.init_params(derive_seed(seed, "params"));
                   const std::vector<Sample> samples = suite_samples(w);
                   const Batch b = make_batch(samples, m.vocab(), m.config().history_len);
                   std::mt19937_64 rng(derive_seed(seed, "weights"));
                   const LossWeights lw{uniform(rng, 0.5, 2), uniform(rng, 0.5, 2), uniform(rng, 0.05, 1)};
                   auto loss = [&](Tape& t, const ParamStore& st, const std::vector<Var>&) {
                     return m.loss(t, st, b, lw).total;
                   };
                   return gradcheck(loss, s, {}, module_options(opt, seed));
                 }});
  }
  return c;
}

std::vector<Case> all_cases() {
  std::vector<Case> c = op_cases();
  for (Case& m : module_cases()) c.push_back(std::move(m));
  return c;
}

}  // namespace

bool GradSuiteReport::ok() const { return failures() == 0 && !cases.empty(); }

double GradSuiteReport::max_rel_error() const {
  double e = 0.0;
  for (const auto& c : cases) e = std::max(e, c.result.max_rel_error);
  return e;
}

std::size_t GradSuiteReport::failures() const {
  return static_cast<std::size_t>(std::count_if(cases.begin(), cases.end(), [](const GradSuiteCase& c) {
    return !c.result.ok || c.result.checked == 0;
  }));
}

std::vector<std::string> grad_suite_cases() {
  std::vector<std::string> names;
  for (const Case& c : all_cases()) names.push_back(c.name);
  return names;
}

GradSuiteReport run_grad_suite(const GradSuiteOptions& opt, const std::function<void(const GradSuiteCase&)>& on_case) {
  const std::vector<Case> cases = all_cases();
  GradSuiteReport rep;
  for (std::size_t i = 0; i < opt.seeds; ++i) {
    const std::uint64_t seed = opt.base_seed + i;
    for (const Case& c : cases) {
      GradSuiteCase r{c.name, seed, c.run(seed, opt)};
      if (on_case) on_case(r);
      rep.cases.push_back(std::move(r));
    }
  }
  return rep;
}

}  // namespace agn
