#include "psn/results.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "psn/checkpoint.hpp"
#include "psn/error.hpp"

namespace psn {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double cell_double(const std::string& s) {
  if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw std::invalid_argument("malformed number '" + s + "' in CSV");
  return v;
}

template <typename Int>
Int cell_int(const std::string& s) {
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw std::invalid_argument("malformed integer '" + s + "' in CSV");
  return v;
}

std::string cell(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

void check_header(std::istream& in, const char* expected) {
  std::string header;
  if (!std::getline(in, header) || header != expected)
    throw std::invalid_argument(std::string("CSV header mismatch, expected '") + expected + "'");
}

}  // namespace

void write_run_csv(const RunResult& result, std::ostream& out) {
  out << kRunCsvHeader << '\n';
  for (const auto& r : result.rows)
    out << r.episode << ',' << r.steps << ',' << cell(r.train_return) << ','
        << cell(r.eval_return) << ',' << cell(r.sigma) << ',' << cell(r.distance) << ','
        << r.solved_streak << '\n';
}

void write_run_csv(const RunResult& result, const std::string& path) {
  auto out = open_out(path);
  write_run_csv(result, out);
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<EpisodeRow> read_run_csv(std::istream& in) {
  check_header(in, kRunCsvHeader);
  std::vector<EpisodeRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 7) throw std::invalid_argument("run CSV row needs 7 columns: '" + line + "'");
    rows.push_back(EpisodeRow{cell_int<int>(c[0]), cell_int<long long>(c[1]), cell_double(c[2]),
                              cell_double(c[3]), cell_double(c[4]), cell_double(c[5]),
                              cell_int<int>(c[6])});
  }
  return rows;
}

std::vector<EpisodeRow> read_run_csv(const std::string& path) {
  auto in = open_in(path);
  return read_run_csv(in);
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: no values");
  if (!(q >= 0.0 && q <= 100.0)) throw std::invalid_argument("percentile: q must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

Aggregate aggregate_runs(std::span<const RunResult> results, const std::string& series,
                         int abort_cap) {
  if (results.empty()) throw std::invalid_argument("aggregate_runs: no results");
  Aggregate agg;
  std::map<int, std::vector<double>> by_episode;
  for (const auto& run : results)
    for (const auto& row : run.rows)
      if (std::isfinite(row.eval_return)) by_episode[row.episode].push_back(row.eval_return);
  for (const auto& [episode, values] : by_episode)
    agg.rows.push_back(AggregateRow{series, episode, static_cast<int>(values.size()),
                                    percentile(values, 50.0), percentile(values, 25.0),
                                    percentile(values, 75.0)});

  std::vector<double> to_solve;
  for (const auto& run : results) {
    ++agg.solve.runs;
    if (run.status == RunStatus::failed) ++agg.solve.failed;
    if (run.solved_at) ++agg.solve.solved;
    to_solve.push_back(run.solved_at ? static_cast<double>(*run.solved_at)
                                     : static_cast<double>(abort_cap));
  }
  std::vector<double> finals;
  for (const auto& run : results)
    for (auto it = run.rows.rbegin(); it != run.rows.rend(); ++it)
      if (std::isfinite(it->eval_return)) {
        finals.push_back(it->eval_return);
        break;
      }
  agg.solve.final_eval_median =
      finals.empty() ? std::numeric_limits<double>::quiet_NaN() : percentile(finals, 50.0);
  agg.solve.peak_eval_median = std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : agg.rows)
    if (!(row.median <= agg.solve.peak_eval_median)) agg.solve.peak_eval_median = row.median;
  agg.solve.median_episodes = percentile(to_solve, 50.0);
  agg.solve.p25_episodes = percentile(to_solve, 25.0);
  agg.solve.p75_episodes = percentile(to_solve, 75.0);
  return agg;
}

void write_aggregate_csv(std::span<const AggregateRow> rows, std::ostream& out) {
  out << kAggregateCsvHeader << '\n';
  for (const auto& r : rows)
    out << r.series << ',' << r.episode << ',' << r.seeds << ',' << cell(r.median) << ','
        << cell(r.p25) << ',' << cell(r.p75) << '\n';
}

void write_aggregate_csv(std::span<const AggregateRow> rows, const std::string& path) {
  auto out = open_out(path);
  write_aggregate_csv(rows, out);
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<AggregateRow> read_aggregate_csv(std::istream& in) {
  check_header(in, kAggregateCsvHeader);
  std::vector<AggregateRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 6)
      throw std::invalid_argument("aggregate CSV row needs 6 columns: '" + line + "'");
    rows.push_back(AggregateRow{c[0], cell_int<int>(c[1]), cell_int<int>(c[2]), cell_double(c[3]),
                                cell_double(c[4]), cell_double(c[5])});
  }
  return rows;
}

std::vector<AggregateRow> read_aggregate_csv(const std::string& path) {
  auto in = open_in(path);
  return read_aggregate_csv(in);
}

std::string format_summary(const std::string& series, const SolveSummary& s, bool solve_stats) {
  std::ostringstream out;
  out << series << ": runs=" << s.runs << " failed=" << s.failed;
  if (solve_stats)
    out << " solved=" << s.solved << " episodes_to_solve median=" << s.median_episodes
        << " p25=" << s.p25_episodes << " p75=" << s.p75_episodes;
  out << " final_eval_median=" << s.final_eval_median << " peak_eval_median=" << s.peak_eval_median;
  return out.str();
}

}  // namespace psn
