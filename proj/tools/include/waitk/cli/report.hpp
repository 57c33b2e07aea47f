#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "waitk/metrics.hpp"
#include "waitk/stream.hpp"

namespace waitk::cli {

// One evaluated (model set, k, mode) run.
struct CurvePoint {
  std::string model;  // comma-joined ids for ensembles
  std::string k;      // integer or "inf"
  std::string mode;   // "greedy" or "lookahead"
  bool seg = false;
  double bleu = 0.0;
  double al = 0.0;
  double ap = 0.0;
  double dal = 0.0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

inline constexpr const char* kCurveHeader = "model,k,mode,seg,bleu,al,ap,dal";

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points);
// Throws DataError on a bad header or row.
std::vector<CurvePoint> read_curve_csv(std::istream& in);

nlohmann::json curve_json(std::span<const CurvePoint> points, const nlohmann::json& meta);
std::vector<CurvePoint> curve_from_json(const nlohmann::json& report);

// Stable sort by AL.
std::vector<CurvePoint> merge_curve(std::vector<CurvePoint> points);

// One line per sentence; segments separated by " | ", each written as
// "src_len tgt_len g1 g2 ...". A failed sentence is written as "-".
void write_traces(std::ostream& out, std::span<const SentenceRecord> records);

struct TraceLine {
  bool ok = false;
  std::vector<DelayTrace> segments;
};
std::vector<TraceLine> read_traces(std::istream& in);

// Offsets and concatenates segment traces into one line-level trace.
DelayTrace concatenate(std::span<const DelayTrace> segments);

}  // namespace waitk::cli
