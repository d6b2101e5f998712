/**
 * Copyright 2026 The FDML Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Prints one PASS/FAIL line per acceptance criterion and exits non-zero if
// any fails. Arguments select a subset, e.g. `acceptance 3 6`.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fdml/trainer.h"
#include "fdml/transport.h"
#include "fdml/verify.h"

namespace fdml {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const DatasetSplit& a9a() {
  static const DatasetSplit split = [] {
    const std::string dir = FDML_DATA_DIR;
    return load_split(dir + "/a9a", dir + "/a9a.t", 124);
  }();
  return split;
}

TrainingConfig a9a_config(Scheme scheme, SubModelSpec::Kind model, std::uint64_t seed) {
  TrainingConfig c;
  c.scheme = scheme;
  c.model = model;
  c.partition_sizes = {67, 57};
  c.seed = seed;
  return c;
}

double final_auc(const TrainingResult& r) { return r.trace.back().test_auc; }

bool within(double v, double target, double tol) { return std::abs(v - target) <= tol; }

Outcome criterion1() {
  const auto& data = a9a();
  const auto kLr = SubModelSpec::Kind::kLinear;
  const double local = final_auc(run_training(a9a_config(Scheme::kLocal, kLr, 1), data));
  const double central =
      final_auc(run_training(a9a_config(Scheme::kCentralized, kLr, 1), data));
  const auto fdml = run_training(a9a_config(Scheme::kFdml, kLr, 1), data);
  TrainingConfig sync = a9a_config(Scheme::kFdml, kLr, 1);
  sync.tau = 0;
  const double fdml_tau0 = final_auc(run_training(sync, data));
  const bool pass = within(local, 0.8850, 0.005) && within(central, 0.9025, 0.005) &&
                    within(final_auc(fdml), 0.9026, 0.005) &&
                    within(fdml.trace.back().test_logloss, 0.3246, 0.01) &&
                    within(fdml_tau0, 0.9026, 0.005);
  return {pass, "local " + fmt("%.4f", local) + ", centralized " + fmt("%.4f", central) +
                    ", fdml tau=8 " + fmt("%.4f", final_auc(fdml)) + " logloss " +
                    fmt("%.4f", fdml.trace.back().test_logloss) + " (" +
                    fmt("%.1f", fdml.seconds) + " s), fdml tau=0 " + fmt("%.4f", fdml_tau0)};
}

Outcome criterion2() {
  const auto& data = a9a();
  const auto kNn = SubModelSpec::Kind::kFeedForward;
  double sums[3] = {0, 0, 0};
  int ordered = 0;
  double slowest = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto local = run_training(a9a_config(Scheme::kLocal, kNn, seed), data);
    const auto central = run_training(a9a_config(Scheme::kCentralized, kNn, seed), data);
    TrainingConfig fc = a9a_config(Scheme::kFdml, kNn, seed);
    fc.interleave_seed = seed;
    const auto fdml = run_training(fc, data);
    const double l = final_auc(local), c = final_auc(central), f = final_auc(fdml);
    sums[0] += l;
    sums[1] += c;
    sums[2] += f;
    if (l < f && f <= c) ++ordered;
    slowest = std::max({slowest, local.seconds, central.seconds, fdml.seconds});
  }
  const double l = sums[0] / 5, c = sums[1] / 5, f = sums[2] / 5;
  const bool pass = within(l, 0.8864, 0.01) && within(c, 0.9042, 0.01) &&
                    within(f, 0.9035, 0.01) && ordered >= 4;
  return {pass, "mean local " + fmt("%.4f", l) + ", centralized " + fmt("%.4f", c) +
                    ", fdml " + fmt("%.4f", f) + ", ordered in " + std::to_string(ordered) +
                    "/5 seeds, slowest run " + fmt("%.1f", slowest) + " s"};
}

Outcome criterion3() {
  const auto& data = a9a();
  TrainingConfig c = a9a_config(Scheme::kCentralized, SubModelSpec::Kind::kLinear, 1);
  c.tau = 0;
  c.deterministic = true;
  c.use_bias = false;
  c.reduction = BatchReduction::kMean;
  c.epochs = 4;
  c.evaluate_epochs = false;
  std::map<std::uint64_t, std::vector<double>> central;
  TrainingHooks ch;
  ch.recorder = [&](const StepRecord& s) { central[s.iteration] = s.params_before; };
  const auto rc = run_training(c, data, ch);
  c.scheme = Scheme::kFdml;
  std::map<std::pair<int, std::uint64_t>, std::vector<double>> fdml;
  TrainingHooks fh;
  fh.recorder = [&](const StepRecord& s) { fdml[{s.party, s.iteration}] = s.params_before; };
  const auto rf = run_training(c, data, fh);

  std::size_t matched = 0;
  bool equal = fdml.size() == 2 * central.size();
  for (const auto& [t, full] : central) {
    if (!equal) break;
    std::vector<double> joined = fdml[{0, t}];
    const auto& p1 = fdml[{1, t}];
    joined.insert(joined.end(), p1.begin(), p1.end());
    if (joined != full) {
      equal = false;
      break;
    }
    ++matched;
  }
  std::vector<double> final_joined = rf.model.blocks[0].values;
  final_joined.insert(final_joined.end(), rf.model.blocks[1].values.begin(),
                      rf.model.blocks[1].values.end());
  equal = equal && final_joined == rc.model.blocks[0].values;
  return {equal && matched >= 1000,
          std::to_string(matched) + " consecutive steps bit-identical" +
              (equal ? ", final parameters identical" : ", mismatch")};
}

Outcome criterion4() {
  const auto lr = check_gradients(SubModelSpec::Kind::kLinear, 100, 1);
  const auto nn = check_gradients(SubModelSpec::Kind::kFeedForward, 100, 1);
  const bool pass = lr.cases == 100 && nn.cases == 100 && lr.failures == 0 &&
                    nn.failures == 0;
  return {pass, "LR " + std::to_string(lr.coordinates) + " coordinates max rel err " +
                    fmt("%.2e", lr.max_relative_error) + ", NN " +
                    std::to_string(nn.coordinates) + " coordinates max rel err " +
                    fmt("%.2e", nn.max_relative_error)};
}

Outcome criterion5() {
  const StepIdentityCheck c = check_step_identity(1000, 16, 1);
  const bool pass = c.steps >= 1000 && c.non_applicable == 0 && c.max_residual < 1e-8 &&
                    c.max_lag >= 1 && c.max_lag <= 16;
  return {pass, std::to_string(c.steps) + " steps, max residual " +
                    fmt("%.2e", c.max_residual) + ", max observed lag " +
                    std::to_string(c.max_lag)};
}

// Sum of 1/sqrt(t) over [a, b] from long-double prefix sums, against the
// closed form written as 2(b-(a-1))/(sqrt(b)+sqrt(a-1)) to avoid cancellation.
Outcome criterion6() {
  constexpr std::uint64_t kMax = 1000000;
  std::vector<long double> prefix(kMax + 1, 0.0L);
  for (std::uint64_t t = 1; t <= kMax; ++t) {
    prefix[t] = prefix[t - 1] + 1.0L / std::sqrt(static_cast<long double>(t));
  }
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::uint64_t> pick(1, kMax);
  std::size_t violations = 0;
  long double tightest = 1e300L;
  for (int i = 0; i < 10000; ++i) {
    std::uint64_t a = pick(rng), b = pick(rng);
    if (a > b) std::swap(a, b);
    const long double lhs = prefix[b] - prefix[a - 1];
    const long double am1 = static_cast<long double>(a - 1);
    const long double rhs = 2.0L * (static_cast<long double>(b) - am1) /
                            (std::sqrt(static_cast<long double>(b)) + std::sqrt(am1));
    if (!(lhs <= rhs)) ++violations;
    tightest = std::min(tightest, rhs - lhs);
  }
  return {violations == 0, "10000 pairs, " + std::to_string(violations) +
                               " violations, smallest slack " +
                               fmt("%.3e", static_cast<double>(tightest))};
}

Outcome criterion7() {
  const std::vector<std::uint64_t> cps = {250, 1000, 4000};
  bool pass = true;
  std::string detail;
  for (std::uint64_t tau : {0ULL, 4ULL, 16ULL}) {
    std::vector<double> r1, r2, r3;
    bool enveloped = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const RegretRun run = regret_experiment(seed, tau, cps);
      r1.push_back(run.points[0].regret);
      r2.push_back(run.points[1].regret);
      r3.push_back(run.points[2].regret);
      for (std::size_t i = 0; i < cps.size(); ++i) {
        if (!(run.points[i].regret <= run.envelope[i])) enveloped = false;
      }
    }
    auto median = [](std::vector<double> v) {
      std::nth_element(v.begin(), v.begin() + 2, v.end());
      return v[2];
    };
    const double m1 = median(r1), m2 = median(r2), m3 = median(r3);
    const bool ok = m2 <= 0.7 * m1 && m3 <= 0.7 * m2 && enveloped;
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += "tau=" + std::to_string(tau) + " median R " + fmt("%.3e", m1) + " -> " +
              fmt("%.3e", m2) + " -> " + fmt("%.3e", m3) +
              (enveloped ? ", envelope holds" : ", envelope violated");
  }
  return {pass, detail};
}

Outcome criterion8() {
  const auto& data = a9a();
  bool pass = true;
  std::string detail;
  for (std::uint64_t tau : {0ULL, 2ULL, 8ULL}) {
    TrainingConfig c = a9a_config(Scheme::kFdml, SubModelSpec::Kind::kLinear, 1);
    c.tau = tau;
    c.epochs = 1;
    std::atomic<std::uint64_t> grants{0}, worst{0};
    std::atomic<bool> violated{false};
    std::mutex rng_mu;
    std::mt19937_64 rng(100 + tau);
    TrainingHooks h;
    h.grant_observer = [&](const GrantRecord& g) {
      const std::uint64_t t_min = *std::min_element(g.pushed.begin(), g.pushed.end());
      const std::uint64_t t_max = *std::max_element(g.granted.begin(), g.granted.end());
      const std::uint64_t spread = t_max > t_min ? t_max - t_min : 0;
      std::uint64_t w = worst.load();
      while (spread > w && !worst.compare_exchange_weak(w, spread)) {
      }
      if (spread > tau || g.iteration - g.slowest > tau) violated = true;
      ++grants;
    };
    h.before_step = [&](int, std::uint64_t) {
      std::uint64_t us;
      {
        std::lock_guard lock(rng_mu);
        us = std::uniform_int_distribution<std::uint64_t>(0, 50000)(rng);
      }
      std::this_thread::sleep_for(std::chrono::microseconds(us));
    };
    const auto r = run_training(c, data, h);
    bool ok = !violated;
    std::string extra;
    if (tau == 0) {
      TrainingConfig sync = c;
      sync.deterministic = true;
      const auto oracle = run_training(sync, data);
      const bool same = oracle.model.blocks[0].values == r.model.blocks[0].values &&
                        oracle.model.blocks[1].values == r.model.blocks[1].values;
      ok = ok && same;
      extra = same ? ", equals synchronous oracle" : ", differs from synchronous oracle";
    }
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += "tau=" + std::to_string(tau) + " " + std::to_string(grants.load()) +
              " grants, max spread " + std::to_string(worst.load()) + ", " +
              std::to_string(r.rejections) + " rejections" + extra;
  }
  return {pass, detail};
}

Outcome criterion9() {
  const auto& data = a9a();
  const double levels[3] = {0.0, 1.0, 3.0};
  double means[3] = {0, 0, 0};
  int above_local = 0;
  for (int li = 0; li < 3; ++li) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      TrainingConfig c = a9a_config(Scheme::kFdml, SubModelSpec::Kind::kLinear, seed);
      c.noise = {NoiseMechanism::kLaplace, levels[li], seed};
      const double a = final_auc(run_training(c, data));
      means[li] += a / 5;
      if (li == 2 && a > 0.8850) ++above_local;
    }
  }
  const bool pass = above_local >= 4 && means[0] >= means[1] && means[1] >= means[2];
  return {pass, "mean AUC b=0 " + fmt("%.4f", means[0]) + ", b=1 " + fmt("%.4f", means[1]) +
                    ", b=3 " + fmt("%.4f", means[2]) + ", b=3 above 0.8850 in " +
                    std::to_string(above_local) + "/5 seeds"};
}

Outcome criterion10() {
  const ProtocolCheck p = check_protocol(10000, 10000, 10);
  bool pass = p.reference_bytes_ok && p.round_trips == 10000 && p.round_trip_failures == 0 &&
              p.fuzzed == 10000 && p.fuzz_crashes == 0;
  const auto& data = a9a();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    TrainingConfig c = a9a_config(Scheme::kFdml, SubModelSpec::Kind::kLinear, seed);
    const double in_process = final_auc(run_training(c, data));
    c.carrier = CarrierKind::kSocket;
    const double socket = final_auc(run_training(c, data));
    worst = std::max(worst, std::abs(in_process - socket));
  }
  pass = pass && worst <= 0.002;
  return {pass, std::to_string(p.round_trips) + " round trips, " +
                    std::to_string(p.round_trip_failures) + " failures, " +
                    std::to_string(p.fuzzed) + " fuzzed frames, " +
                    std::to_string(p.fuzz_crashes) + " crashes, socket vs in-process max " +
                    "AUC gap " + fmt("%.5f", worst) + " over 3 seeds"};
}

}  // namespace
}  // namespace fdml

int main(int argc, char** argv) {
  using Check = std::function<fdml::Outcome()>;
  const std::vector<std::pair<const char*, Check>> criteria = {
      {"a9a LR reproduction", fdml::criterion1},
      {"a9a NN reproduction", fdml::criterion2},
      {"LR exact equivalence", fdml::criterion3},
      {"gradient checks", fdml::criterion4},
      {"one-step identity under staleness", fdml::criterion5},
      {"inverse square root sum bound", fdml::criterion6},
      {"regret decay", fdml::criterion7},
      {"SSP admission", fdml::criterion8},
      {"noise robustness", fdml::criterion9},
      {"protocol robustness", fdml::criterion10},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    fdml::Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d %s: %s (%s) [%.1f s]\n", number, o.pass ? "PASS" : "FAIL",
                criteria[i].first, o.detail.c_str(), s);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
