#pragma once

// Per-stage records shared by the reconstruction pipeline and the CLI.

#include <chrono>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bbconic/errors.hpp"

namespace bbconic {

/// Named integer tallies in insertion order.
class Counts {
 public:
  void set(const std::string& key, std::int64_t value) {
    for (auto& [k, v] : items_) {
      if (k == key) {
        v = value;
        return;
      }
    }
    items_.emplace_back(key, value);
  }
  void add(const std::string& key, std::int64_t delta = 1) {
    for (auto& [k, v] : items_) {
      if (k == key) {
        v += delta;
        return;
      }
    }
    items_.emplace_back(key, delta);
  }
  std::int64_t get(const std::string& key, std::int64_t fallback = -1) const {
    for (const auto& [k, v] : items_) {
      if (k == key) return v;
    }
    return fallback;
  }
  bool has(const std::string& key) const {
    for (const auto& item : items_) {
      if (item.first == key) return true;
    }
    return false;
  }
  const std::vector<std::pair<std::string, std::int64_t>>& items() const noexcept { return items_; }

 private:
  std::vector<std::pair<std::string, std::int64_t>> items_;
};

enum class Verdict { pass, fail, warn, skipped, no_verdict };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::warn: return "warn";
    case Verdict::skipped: return "skipped";
    case Verdict::no_verdict: return "no-verdict";
  }
  return "?";
}

struct StageRecord {
  std::string name;
  Verdict verdict = Verdict::skipped;
  Counts counts;
  std::string error;    // error kind, empty on success
  std::string message;
  std::string witness;
  double millis = 0;
};

struct PipelineReport {
  std::vector<StageRecord> stages;
  bool exploratory = false;

  Verdict verdict() const {
    if (exploratory) return Verdict::no_verdict;
    for (const auto& s : stages) {
      if (s.verdict != Verdict::pass) return Verdict::fail;
    }
    return stages.empty() ? Verdict::fail : Verdict::pass;
  }

  const StageRecord* first_failure() const {
    for (const auto& s : stages) {
      if (s.verdict == Verdict::fail || s.verdict == Verdict::warn) return &s;
    }
    return nullptr;
  }

  const StageRecord* stage(const std::string& name) const {
    for (const auto& s : stages) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }
};

/// Runs stages in order. After the first failure every later stage is
/// recorded as skipped; in exploratory mode the failure is kept as a warning.
class StageRunner {
 public:
  explicit StageRunner(PipelineReport& report) : report_(report) {}

  bool halted() const noexcept { return halted_; }

  template <class Fn>
  bool run(const std::string& name, Fn&& fn) {
    StageRecord rec;
    rec.name = name;
    if (halted_) {
      report_.stages.push_back(std::move(rec));
      return false;
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(rec.counts);
      rec.verdict = Verdict::pass;
    } catch (const Error& e) {
      rec.verdict = report_.exploratory ? Verdict::warn : Verdict::fail;
      rec.error = e.kind();
      rec.message = e.what();
      rec.witness = e.witness();
      halted_ = true;
    }
    rec.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    report_.stages.push_back(std::move(rec));
    return !halted_;
  }

 private:
  PipelineReport& report_;
  bool halted_ = false;
};

}  // namespace bbconic
