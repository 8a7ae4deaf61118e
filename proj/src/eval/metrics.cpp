// Copyright 2026 The fovlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "fovlab/errors.hpp"
#include "fovlab/eval.hpp"

namespace fovlab::eval {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

ConfusionCounts confusion(std::span<const std::uint8_t> pred,
                          std::span<const std::uint8_t> truth) {
  if (pred.size() != truth.size()) throw DataError("confusion: mask sizes differ");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) {
      ++c.tp;
    } else if (p) {
      ++c.fp;
    } else if (t) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

ConfusionCounts confusion(const FovMask& pred, const FovMask& truth) {
  if (!(pred.spec == truth.spec)) throw DataError("confusion: grids differ");
  return confusion(pred.visible, truth.visible);
}

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

Metrics metrics(const ConfusionCounts& c) {
  Metrics m;
  const auto tp = static_cast<double>(c.tp);
  m.precision = ratio(tp, tp + static_cast<double>(c.fp));
  m.recall = ratio(tp, tp + static_cast<double>(c.fn));
  m.accuracy = ratio(tp + static_cast<double>(c.tn), static_cast<double>(c.total()));
  m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
  return m;
}

double auprc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw DataError("auprc: size mismatch");
  const auto positives = static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](std::uint8_t v) { return v != 0; }));
  if (positives == 0) throw DataError("auprc: ground truth has no positive cell");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double p_total = static_cast<double>(positives);
  double area = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]]) ++tp;
      ++j;
    }
    seen = j;
    const double recall = static_cast<double>(tp) / p_total;
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

double auprc(const ProbMap& pm, const FovMask& truth) {
  if (!(pm.spec == truth.spec)) throw DataError("auprc: grids differ");
  return auprc(pm.values, truth.visible);
}

void Accumulator::add(std::span<const std::uint8_t> pred, std::span<const double> scores,
                      std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) throw DataError("accumulator: size mismatch");
  counts_ += confusion(pred, truth);
  scores_.insert(scores_.end(), scores.begin(), scores.end());
  labels_.insert(labels_.end(), truth.begin(), truth.end());
  ++frames_;
}

void Accumulator::add(const FovMask& pred, const FovMask& truth) {
  if (!(pred.spec == truth.spec)) throw DataError("accumulator: grids differ");
  std::vector<double> s(pred.visible.begin(), pred.visible.end());
  add(pred.visible, s, truth.visible);
}

double Accumulator::auprc() const {
  if (counts_.tp + counts_.fn == 0) return std::numeric_limits<double>::quiet_NaN();
  return eval::auprc(scores_, labels_);
}

nlohmann::ordered_json MetricRecord::to_json() const {
  nlohmann::ordered_json j = labels;
  j["precision"] = metrics.precision;
  j["recall"] = metrics.recall;
  j["accuracy"] = metrics.accuracy;
  j["f1"] = metrics.f1;
  if (std::isfinite(auprc)) {
    j["auprc"] = auprc;
  } else {
    j["auprc"] = nullptr;
  }
  j["frames"] = frames;
  return j;
}

MetricRecord make_record(nlohmann::ordered_json labels, const Accumulator& acc) {
  MetricRecord r;
  r.labels = std::move(labels);
  r.metrics = acc.metrics();
  r.auprc = acc.auprc();
  r.frames = acc.frames();
  return r;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  return os;
}

std::string label_text(const nlohmann::ordered_json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

std::string number_text(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<std::string> label_columns(std::span<const MetricRecord> rows) {
  std::vector<std::string> cols;
  for (const auto& r : rows) {
    for (const auto& [k, _] : r.labels.items()) {
      if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
    }
  }
  return cols;
}

std::string cell(const MetricRecord& r, const std::string& key) {
  return r.labels.contains(key) ? label_text(r.labels.at(key)) : "";
}

}  // namespace

void write_jsonl(const std::filesystem::path& path, std::span<const MetricRecord> rows) {
  auto os = open_out(path);
  for (const auto& r : rows) os << r.to_json().dump() << "\n";
}

void write_csv(const std::filesystem::path& path, std::span<const MetricRecord> rows) {
  auto os = open_out(path);
  const auto cols = label_columns(rows);
  for (const auto& c : cols) os << c << ",";
  os << "precision,recall,accuracy,f1,auprc,frames\n";
  for (const auto& r : rows) {
    for (const auto& c : cols) os << cell(r, c) << ",";
    os << number_text(r.metrics.precision) << "," << number_text(r.metrics.recall) << ","
       << number_text(r.metrics.accuracy) << "," << number_text(r.metrics.f1) << ","
       << number_text(r.auprc) << "," << r.frames << "\n";
  }
}

void write_long_csv(const std::filesystem::path& path, std::span<const MetricRecord> rows) {
  auto os = open_out(path);
  const auto cols = label_columns(rows);
  for (const auto& c : cols) os << c << ",";
  os << "metric,value\n";
  for (const auto& r : rows) {
    const std::pair<const char*, double> vals[] = {{"precision", r.metrics.precision},
                                                   {"recall", r.metrics.recall},
                                                   {"accuracy", r.metrics.accuracy},
                                                   {"f1", r.metrics.f1},
                                                   {"auprc", r.auprc}};
    for (const auto& [name, v] : vals) {
      for (const auto& c : cols) os << cell(r, c) << ",";
      os << name << "," << number_text(v) << "\n";
    }
  }
}

std::string format_table(std::span<const MetricRecord> rows) {
  auto cols = label_columns(rows);
  std::vector<std::string> header = cols;
  for (const char* m : {"precision", "recall", "accuracy", "f1", "auprc", "frames"}) {
    header.emplace_back(m);
  }
  std::vector<std::vector<std::string>> body;
  for (const auto& r : rows) {
    std::vector<std::string> line;
    for (const auto& c : cols) line.push_back(cell(r, c));
    for (double v : {r.metrics.precision, r.metrics.recall, r.metrics.accuracy, r.metrics.f1,
                     r.auprc}) {
      std::ostringstream os;
      if (std::isfinite(v)) {
        os << std::fixed << std::setprecision(4) << v;
      } else {
        os << "-";
      }
      line.push_back(os.str());
    }
    line.push_back(std::to_string(r.frames));
    body.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& line : body) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i) os << "  ";
      const bool numeric = i >= cols.size();
      os << (numeric ? std::right : std::left) << std::setw(static_cast<int>(width[i]))
         << line[i];
    }
    os << "\n";
  };
  emit(header);
  for (const auto& line : body) emit(line);
  return os.str();
}

nlohmann::ordered_json TimingStats::to_json() const {
  nlohmann::ordered_json j;
  j["samples"] = samples;
  j["median_seconds"] = median_seconds;
  j["p95_seconds"] = p95_seconds;
  j["median_hz"] = median_hz;
  j["p95_hz"] = p95_hz;
  return j;
}

TimingStats summarize_timings(std::vector<double> seconds) {
  if (seconds.empty()) throw DataError("no timing samples");
  std::sort(seconds.begin(), seconds.end());
  const std::size_t n = seconds.size();
  auto rank = [&](double q) {
    auto r = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
    return seconds[std::clamp<std::size_t>(r, 1, n) - 1];
  };
  TimingStats t;
  t.samples = n;
  t.median_seconds = n % 2 ? seconds[n / 2] : 0.5 * (seconds[n / 2 - 1] + seconds[n / 2]);
  t.p95_seconds = rank(0.95);
  t.median_hz = t.median_seconds > 0.0 ? 1.0 / t.median_seconds : 0.0;
  t.p95_hz = t.p95_seconds > 0.0 ? 1.0 / t.p95_seconds : 0.0;
  return t;
}

}  // namespace fovlab::eval
