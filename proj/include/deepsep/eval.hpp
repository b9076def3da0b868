#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "deepsep/csv.hpp"
#include "deepsep/run_record.hpp"
#include "deepsep/types.hpp"

namespace deepsep {

// (1/T) sum_t ||s(t) - y(t)||^2.
double average_mse(const Matrix& y, const Matrix& s);

// Per-step ||s(t) - y(t)||^2.
std::vector<double> step_errors(const Matrix& y, const Matrix& s);

// Row i of the aligned output is sign[i] * y.row(permutation[i]).
struct Alignment {
  std::vector<int> permutation;
  std::vector<int> sign;

  Matrix apply(const Matrix& y) const;
};

struct AlignmentResult {
  Alignment alignment;
  double aligned_mse = 0.0;
};

inline constexpr int kMaxAlignmentSources = 6;

// Exhaustive search over every permutation and sign pattern of the rows
// of y; the result is the global minimizer of average_mse.
AlignmentResult best_alignment(const Matrix& y, const Matrix& s);

// Fills rec.sq_err and rec.aligned_sq_err against the reference sources.
void attach_errors(RunRecord& rec, const Matrix& s);

enum class ErrorKind { Raw, Aligned };

enum class CurveMode {
  Cumulative,  // mean of per-step errors over 1..t
  PerStep,     // per-step error at t
};

// One column per algorithm id (in first-seen order), averaged over the
// records that share an id. Row t-1 holds the value at step t.
struct CurveTable {
  std::vector<std::string> algorithms;
  std::vector<std::vector<double>> columns;

  int length() const { return columns.empty() ? 0 : static_cast<int>(columns.front().size()); }
  const std::vector<double>& column(const std::string& algorithm) const;
  CsvTable to_csv_table() const;
};

// Per-record error kind can differ (e.g. aligned for the classical
// algorithms, raw for trained networks); `kind_for` picks it by id.
CurveTable convergence_curve(std::span<const RunRecord> records, CurveMode mode,
                             ErrorKind kind);
CurveTable convergence_curve(std::span<const RunRecord> records, CurveMode mode,
                             const std::function<ErrorKind(const std::string&)>& kind_for);

// Cumulative mean of a per-step series.
std::vector<double> cumulative_mean(std::span<const double> values);

// Aligned for "rls"/"easi", raw for everything else.
ErrorKind default_error_kind(const std::string& algorithm);

CurveTable curve_from_csv_table(const CsvTable& table);

// Columns t, y_1..y_m, sq_err, cum_avg_mse.
CsvTable run_record_table(const RunRecord& rec);

}  // namespace deepsep
