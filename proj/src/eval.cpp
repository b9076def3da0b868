#include "deepsep/eval.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "deepsep/error.hpp"

namespace deepsep {

namespace {

void check_same_shape(const Matrix& y, const Matrix& s) {
  if (y.rows() != s.rows() || y.cols() != s.cols())
    throw DimensionError("output and reference shapes differ");
}

}  // namespace

std::vector<double> step_errors(const Matrix& y, const Matrix& s) {
  check_same_shape(y, s);
  std::vector<double> out(static_cast<std::size_t>(y.cols()));
  for (Eigen::Index t = 0; t < y.cols(); ++t) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double d = s(i, t) - y(i, t);
      acc += d * d;
    }
    out[static_cast<std::size_t>(t)] = acc;
  }
  return out;
}

double average_mse(const Matrix& y, const Matrix& s) {
  const auto errs = step_errors(y, s);
  if (errs.empty()) return 0.0;
  return std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(errs.size());
}

Matrix Alignment::apply(const Matrix& y) const {
  Matrix out(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    out.row(i) = static_cast<double>(sign[static_cast<std::size_t>(i)]) *
                 y.row(permutation[static_cast<std::size_t>(i)]);
  return out;
}

AlignmentResult best_alignment(const Matrix& y, const Matrix& s) {
  check_same_shape(y, s);
  const int m = static_cast<int>(y.rows());
  if (m > kMaxAlignmentSources)
    throw DimensionError("exhaustive alignment supports at most 6 sources");
  AlignmentResult best;
  if (m == 0) return best;

  // cost[j][i][k]: squared error of matching source j with sign_k * y_i.
  // Signs are independent per matched pair, so the search over 2^m sign
  // patterns reduces to a per-pair minimum without losing optimality.
  std::vector<std::vector<std::array<double, 2>>> cost(
      static_cast<std::size_t>(m), std::vector<std::array<double, 2>>(static_cast<std::size_t>(m)));
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      double pos = 0.0;
      double neg = 0.0;
      for (Eigen::Index t = 0; t < y.cols(); ++t) {
        const double dp = s(j, t) - y(i, t);
        const double dn = s(j, t) + y(i, t);
        pos += dp * dp;
        neg += dn * dn;
      }
      cost[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = {pos, neg};
    }
  }

  std::vector<int> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  double best_total = 0.0;
  bool first = true;
  do {
    double total = 0.0;
    for (int j = 0; j < m; ++j) {
      const auto& c = cost[static_cast<std::size_t>(j)][static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
      total += std::min(c[0], c[1]);
    }
    if (first || total < best_total) {
      first = false;
      best_total = total;
      best.alignment.permutation = perm;
      best.alignment.sign.assign(static_cast<std::size_t>(m), 1);
      for (int j = 0; j < m; ++j) {
        const auto& c = cost[static_cast<std::size_t>(j)][static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
        if (c[1] < c[0]) best.alignment.sign[static_cast<std::size_t>(j)] = -1;
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  best.aligned_mse = y.cols() == 0 ? 0.0 : best_total / static_cast<double>(y.cols());
  return best;
}

void attach_errors(RunRecord& rec, const Matrix& s) {
  rec.sq_err = step_errors(rec.y, s);
  if (rec.y.rows() <= kMaxAlignmentSources) {
    const auto aligned = best_alignment(rec.y, s);
    rec.aligned_sq_err = step_errors(aligned.alignment.apply(rec.y), s);
  } else {
    rec.aligned_sq_err.clear();
  }
}

std::vector<double> cumulative_mean(std::span<const double> values) {
  std::vector<double> out(values.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += values[i];
    out[i] = acc / static_cast<double>(i + 1);
  }
  return out;
}

ErrorKind default_error_kind(const std::string& algorithm) {
  return (algorithm == "rls" || algorithm == "easi") ? ErrorKind::Aligned : ErrorKind::Raw;
}

const std::vector<double>& CurveTable::column(const std::string& algorithm) const {
  for (std::size_t i = 0; i < algorithms.size(); ++i)
    if (algorithms[i] == algorithm) return columns[i];
  throw ConfigError("no curve for algorithm '" + algorithm + "'");
}

CsvTable CurveTable::to_csv_table() const {
  CsvTable table;
  table.header.push_back("t");
  for (const auto& a : algorithms) table.header.push_back(a);
  for (int t = 0; t < length(); ++t) {
    std::vector<double> row{static_cast<double>(t + 1)};
    for (const auto& c : columns) row.push_back(c[static_cast<std::size_t>(t)]);
    table.rows.push_back(std::move(row));
  }
  return table;
}

CurveTable convergence_curve(std::span<const RunRecord> records, CurveMode mode,
                             const std::function<ErrorKind(const std::string&)>& kind_for) {
  CurveTable table;
  std::vector<int> counts;
  int length = -1;
  for (const auto& rec : records) {
    const auto& errs = kind_for(rec.algorithm) == ErrorKind::Aligned ? rec.aligned_sq_err
                                                                     : rec.sq_err;
    if (static_cast<int>(errs.size()) != rec.T())
      throw DimensionError("record '" + rec.algorithm + "' has no errors of the requested kind");
    if (length < 0) length = rec.T();
    if (rec.T() != length)
      throw DimensionError("records have different lengths: " + std::to_string(length) +
                           " vs " + std::to_string(rec.T()));
    const std::vector<double> curve =
        mode == CurveMode::Cumulative ? cumulative_mean(errs) : errs;
    auto it = std::find(table.algorithms.begin(), table.algorithms.end(), rec.algorithm);
    std::size_t idx = 0;
    if (it == table.algorithms.end()) {
      table.algorithms.push_back(rec.algorithm);
      table.columns.emplace_back(curve.size(), 0.0);
      counts.push_back(0);
      idx = table.algorithms.size() - 1;
    } else {
      idx = static_cast<std::size_t>(it - table.algorithms.begin());
    }
    for (std::size_t t = 0; t < curve.size(); ++t) table.columns[idx][t] += curve[t];
    ++counts[idx];
  }
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    for (double& v : table.columns[i]) v /= static_cast<double>(counts[i]);
  return table;
}

CurveTable convergence_curve(std::span<const RunRecord> records, CurveMode mode,
                             ErrorKind kind) {
  return convergence_curve(records, mode, [kind](const std::string&) { return kind; });
}

CurveTable curve_from_csv_table(const CsvTable& table) {
  if (table.header.empty() || table.header.front() != "t")
    throw IoError("curve CSV must start with a 't' column");
  CurveTable curve;
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    curve.algorithms.push_back(table.header[c]);
    std::vector<double> col;
    for (const auto& row : table.rows) col.push_back(row[c]);
    curve.columns.push_back(std::move(col));
  }
  return curve;
}

CsvTable run_record_table(const RunRecord& rec) {
  CsvTable table;
  table.header.push_back("t");
  for (Eigen::Index i = 0; i < rec.y.rows(); ++i)
    table.header.push_back("y_" + std::to_string(i + 1));
  const bool has_err = static_cast<int>(rec.sq_err.size()) == rec.T();
  if (has_err) {
    table.header.push_back("sq_err");
    table.header.push_back("cum_avg_mse");
  }
  const auto cum = has_err ? cumulative_mean(rec.sq_err) : std::vector<double>{};
  for (int t = 0; t < rec.T(); ++t) {
    std::vector<double> row{static_cast<double>(t + 1)};
    for (Eigen::Index i = 0; i < rec.y.rows(); ++i) row.push_back(rec.y(i, t));
    if (has_err) {
      row.push_back(rec.sq_err[static_cast<std::size_t>(t)]);
      row.push_back(cum[static_cast<std::size_t>(t)]);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace deepsep
