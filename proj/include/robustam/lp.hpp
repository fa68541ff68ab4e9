#pragma once

// Dense revised simplex for the small and medium linear programs that arise
// from scenario lattices (a few thousand columns at most).

#include <limits>
#include <string>
#include <vector>

namespace robustam::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { minimize, maximize };
enum class RowType { less_equal, greater_equal, equal };
enum class Status { optimal, infeasible, unbounded, numerical_failure };

const char* to_string(Status s);

struct Term {
  int var;
  double coef;
};

struct Row {
  std::vector<Term> terms;
  RowType type;
  double rhs;
  std::string name;
};

class LinearProgram {
 public:
  explicit LinearProgram(Sense sense = Sense::minimize) : sense_(sense) {}

  int add_variable(double cost, double lower = 0.0, double upper = kInf, std::string name = {});
  int add_row(std::vector<Term> terms, RowType type, double rhs, std::string name = {});

  void set_cost(int var, double cost) { cost_.at(var) = cost; }

  Sense sense() const { return sense_; }
  int num_variables() const { return static_cast<int>(cost_.size()); }
  int num_rows() const { return static_cast<int>(rows_.size()); }
  const std::vector<double>& costs() const { return cost_; }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<Row>& rows() const { return rows_; }
  const std::string& variable_name(int j) const { return names_.at(j); }

  // Throws InvalidArgument on inconsistent dimensions or non-finite data.
  void validate() const;

 private:
  Sense sense_;
  std::vector<double> cost_, lower_, upper_;
  std::vector<std::string> names_;
  std::vector<Row> rows_;
};

struct Options {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  int refactor_every = 64;
  // 0 selects a limit proportional to the problem size.
  long max_iterations = 0;
  // Consecutive degenerate pivots before switching to Bland's rule.
  int degenerate_switch = 25;
};

struct Solution {
  Status status = Status::numerical_failure;
  double objective = 0.0;
  std::vector<double> x;
  // Shadow prices d(objective)/d(rhs), one per row, in the caller's sense.
  std::vector<double> duals;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double duality_gap = 0.0;  // relative
  long iterations = 0;

  bool optimal() const { return status == Status::optimal; }
};

Solution solve(const LinearProgram& lp, const Options& opt = {});

// Recomputes the certificate residuals of `sol` against `lp` (primal
// feasibility, dual feasibility of the reduced costs, relative gap).
void certify(const LinearProgram& lp, Solution& sol);

}  // namespace robustam::lp
