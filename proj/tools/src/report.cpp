#include "waitk/cli/report.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "waitk/error.hpp"

namespace waitk::cli {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  if (quoted) throw DataError("unterminated quote in CSV row");
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw DataError("bad number '" + s + "'");
  return v;
}

}  // namespace

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points) {
  out << kCurveHeader << '\n';
  for (const auto& p : points)
    out << csv_field(p.model) << ',' << csv_field(p.k) << ',' << csv_field(p.mode) << ','
        << (p.seg ? "on" : "off") << ',' << format_double(p.bleu) << ',' << format_double(p.al) << ','
        << format_double(p.ap) << ',' << format_double(p.dal) << '\n';
}

std::vector<CurvePoint> read_curve_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCurveHeader) throw DataError("report CSV lacks the expected header");
  std::vector<CurvePoint> points;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto f = split_csv(line);
      if (f.size() != 8) throw DataError("expected 8 fields");
      if (f[3] != "on" && f[3] != "off") throw DataError("seg must be on or off");
      points.push_back({f[0], f[1], f[2], f[3] == "on", parse_double(f[4]), parse_double(f[5]),
                        parse_double(f[6]), parse_double(f[7])});
    } catch (const DataError& e) {
      throw DataError("report CSV line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return points;
}

nlohmann::json curve_json(std::span<const CurvePoint> points, const nlohmann::json& meta) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : points)
    rows.push_back({{"model", p.model}, {"k", p.k}, {"mode", p.mode}, {"seg", p.seg ? "on" : "off"},
                    {"bleu", p.bleu}, {"al", p.al}, {"ap", p.ap}, {"dal", p.dal}});
  return {{"meta", meta}, {"rows", rows}};
}

std::vector<CurvePoint> curve_from_json(const nlohmann::json& report) {
  std::vector<CurvePoint> points;
  try {
    for (const auto& r : report.at("rows"))
      points.push_back({r.at("model").get<std::string>(), r.at("k").get<std::string>(),
                        r.at("mode").get<std::string>(), r.at("seg").get<std::string>() == "on",
                        r.at("bleu").get<double>(), r.at("al").get<double>(), r.at("ap").get<double>(),
                        r.at("dal").get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report JSON: ") + e.what());
  }
  return points;
}

std::vector<CurvePoint> merge_curve(std::vector<CurvePoint> points) {
  std::stable_sort(points.begin(), points.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.al < b.al; });
  return points;
}

void write_traces(std::ostream& out, std::span<const SentenceRecord> records) {
  for (const auto& r : records) {
    if (!r.ok()) {
      out << "-\n";
      continue;
    }
    for (std::size_t s = 0; s < r.segments.size(); ++s) {
      const auto& t = r.segments[s];
      if (s > 0) out << " | ";
      out << t.src_len << ' ' << t.tgt_len;
      for (auto g : t.g) out << ' ' << g;
    }
    out << '\n';
  }
}

std::vector<TraceLine> read_traces(std::istream& in) {
  std::vector<TraceLine> lines;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    TraceLine tl;
    if (line == "-") {
      lines.push_back(tl);
      continue;
    }
    tl.ok = true;
    std::size_t start = 0;
    while (start <= line.size()) {
      auto bar = line.find('|', start);
      std::istringstream seg(line.substr(start, bar == std::string::npos ? std::string::npos : bar - start));
      DelayTrace t;
      if (!(seg >> t.src_len >> t.tgt_len)) throw DataError("traces line " + std::to_string(lineno) + ": bad segment");
      for (std::size_t g; seg >> g;) t.g.push_back(g);
      if (!seg.eof()) throw DataError("traces line " + std::to_string(lineno) + ": bad delay value");
      try {
        t.validate();
      } catch (const DataError& e) {
        throw DataError("traces line " + std::to_string(lineno) + ": " + e.what());
      }
      tl.segments.push_back(std::move(t));
      if (bar == std::string::npos) break;
      start = bar + 1;
    }
    lines.push_back(std::move(tl));
  }
  return lines;
}

DelayTrace concatenate(std::span<const DelayTrace> segments) {
  DelayTrace out;
  for (const auto& s : segments) {
    for (auto g : s.g) out.g.push_back(g + out.src_len);
    out.src_len += s.src_len;
    out.tgt_len += s.tgt_len;
  }
  return out;
}

}  // namespace waitk::cli
