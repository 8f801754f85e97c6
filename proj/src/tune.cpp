/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

#include "strata/tune.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include <json.hpp>

namespace strata {

SearchSpace SearchSpace::hyb_c_grid(int k0, bool scan_k, bool include_csr) {
  SearchSpace s;
  if (include_csr) s.formats.push_back("csr");
  for (int c : {1, 2, 4, 8, 16}) {
    if (scan_k && k0 >= 0) {
      for (int off : {-1, 0, 1}) {
        int k = std::max(0, k0 + off);
        s.formats.push_back("hyb:c=" + std::to_string(c) + ",k=" + std::to_string(k));
      }
    } else if (k0 >= 0) {
      s.formats.push_back("hyb:c=" + std::to_string(c) + ",k=" + std::to_string(k0));
    } else {
      s.formats.push_back("hyb:c=" + std::to_string(c));
    }
  }
  s.schedules.push_back("");
  return s;
}

std::vector<SearchPoint> enumerate(const SearchSpace& space) {
  std::vector<SearchPoint> out;
  std::vector<std::string> formats = space.formats.empty() ? std::vector<std::string>{"csr"}
                                                           : space.formats;
  std::vector<std::string> schedules =
      space.schedules.empty() ? std::vector<std::string>{""} : space.schedules;
  int id = 0;
  for (const auto& f : formats)
    for (const auto& s : schedules) out.push_back({id++, f, s});
  return out;
}

namespace {

/*! \brief max/mean of real per-row work within each bucket sub-matrix. */
double hyb_balance(const std::vector<FormatRewriteRule>& rules) {
  double worst = 1.0;
  for (const auto& rule : rules) {
    if (rule.storage.kind != FormatKind::EllBucket) continue;
    const Axis& ja = rule.storage.axes.at(rule.storage.buffer_axes[2]);
    const IntArray& jx = rule.storage.arr(ja.indices_name);
    int64_t w = ja.nnz_cols;
    int64_t nrows = static_cast<int64_t>(jx.size()) / std::max<int64_t>(1, w);
    if (nrows == 0) continue;
    int64_t max_work = 0, total = 0;
    for (int64_t r = 0; r < nrows; ++r) {
      int64_t real = 0;
      for (int64_t k = 0; k < w; ++k) {
        if (k > 0 && jx[r * w + k] == jx[r * w + k - 1]) continue;
        ++real;
      }
      max_work = std::max(max_work, real);
      total += real;
    }
    double mean = static_cast<double>(total) / static_cast<double>(nrows);
    if (mean > 0) worst = std::max(worst, static_cast<double>(max_work) / mean);
  }
  return worst;
}

void thrash_cache(std::vector<char>& junk) {
  if (junk.empty()) junk.assign(64 << 20, 1);
  // Touch one byte per cache line to evict resident data between repeats.
  volatile char sink = 0;
  for (size_t i = 0; i < junk.size(); i += 64) {
    junk[i] = static_cast<char>(junk[i] + 1);
    sink = static_cast<char>(sink + junk[i]);
  }
  (void)sink;
}

double storage_padding(const std::vector<FormatRewriteRule>& rules) {
  int64_t pads = 0, slots = 0;
  for (const auto& rule : rules) {
    pads += rule.storage.pad_slots;
    slots += static_cast<int64_t>(rule.storage.values.size());
  }
  return slots == 0 ? 0.0 : static_cast<double>(pads) / static_cast<double>(slots);
}

}  // namespace

TuneReport run_trials(KernelOp op, const CooMatrix& m, int64_t d, DType dtype,
                      const SearchSpace& space, int repeats, int warmup, bool flush_cache,
                      uint64_t seed) {
  if (repeats < 1) fail(ErrKind::Usage, "repeats must be >= 1");
  TuneReport report;
  std::vector<char> junk;

  // One shared dense operand so all points run identical work.
  std::mt19937 rng(static_cast<uint32_t>(seed));
  std::uniform_int_distribution<int> val(-3, 3);
  DenseMatrix x(m.cols, d);
  for (auto& v : x.v) v = val(rng);

  for (const SearchPoint& pt : enumerate(space)) {
    TrialResult tr;
    tr.point = pt;
    try {
      FormatRequest fmt = FormatRequest::parse(pt.format);
      PipelineOptions opts;
      opts.schedule_script = pt.schedule;
      opts.preconverted = true;  // conversion runs at pre-processing, untimed
      Pipeline pl = build_matrix_pipeline(op, m, d, dtype, fmt, opts);
      TensorData xd = TensorData::zeros(dtype, x.v.size());
      for (size_t i = 0; i < x.v.size(); ++i) xd.set(i, x.v[i]);
      pl.bindings.buffers["X"] = xd;

      // Correctness gate: a point that fails the oracle is never reported best.
      VerifyResult v = verify_pipeline(op, m, d, dtype, fmt, opts, seed + 17);
      tr.correct = v.pass;
      if (!v.pass) tr.error = v.detail;
      tr.padding = storage_padding(pl.rules);
      tr.balance = hyb_balance(pl.rules);

      std::vector<double> samples;
      for (int rep = 0; rep < warmup + repeats; ++rep) {
        if (flush_cache) thrash_cache(junk);
        auto t0 = std::chrono::steady_clock::now();
        ExecReport er = interpret(pl.stage3, pl.bindings, pl.exec_opts);
        auto t1 = std::chrono::steady_clock::now();
        if (rep == 0) {
          tr.flops = er.stats.flops;
          tr.loads = er.stats.loads;
        }
        if (rep >= warmup)
          samples.push_back(
              std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
      }
      std::sort(samples.begin(), samples.end());
      tr.median_ns = samples[samples.size() / 2];
      tr.valid = true;
    } catch (const Error& e) {
      tr.valid = false;
      tr.error = e.what();
    }
    report.trials.push_back(std::move(tr));
  }

  for (size_t i = 0; i < report.trials.size(); ++i) {
    const TrialResult& tr = report.trials[i];
    if (!tr.valid || !tr.correct) continue;
    if (report.best < 0 || tr.median_ns < report.trials[report.best].median_ns)
      report.best = static_cast<int>(i);
  }
  if (report.best < 0) fail(ErrKind::Usage, "tuner: no valid point in the search space");
  return report;
}

std::string report_json(const TuneReport& report) {
  nlohmann::json j;
  j["trials"] = nlohmann::json::array();
  for (const auto& tr : report.trials) {
    nlohmann::json t;
    t["point"] = tr.point.id;
    t["params"] = {{"format", tr.point.format}, {"schedule", tr.point.schedule}};
    t["median_ns"] = tr.median_ns;
    t["flops"] = tr.flops;
    t["loads"] = tr.loads;
    t["valid"] = tr.valid;
    t["correct"] = tr.correct;
    t["padding_ratio"] = tr.padding;
    t["row_work_balance"] = tr.balance;
    if (!tr.error.empty()) t["error"] = tr.error;
    t["best"] = false;
    j["trials"].push_back(t);
  }
  if (report.best >= 0) j["trials"][report.best]["best"] = true;
  j["best_point"] = report.best >= 0 ? report.trials[report.best].point.id : -1;
  return j.dump(2);
}

}  // namespace strata
