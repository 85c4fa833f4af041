#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace homent {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitNumericalFailure = 3;

inline constexpr int kOutputSchemaVersion = 1;

/// Malformed CSV input; `line` is one-based (the header is line 1).
class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct CsvPanel {
  std::vector<std::string> header;
  Eigen::MatrixXd values;  // one row per data line
};

/// Comma-separated numbers with a header row; blank lines are skipped.
CsvPanel read_csv_panel(std::istream& in);

/// Entry point of the `homent` tool. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace homent
