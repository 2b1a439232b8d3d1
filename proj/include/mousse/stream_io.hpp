#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>

#include <Eigen/Dense>

#include "mousse/datagen.hpp"
#include "mousse/subset_model.hpp"

namespace mousse {

// Stream file: a header line "D=<int>", then one line per step with D
// comma-separated decimals; the token NaN marks a missing entry.
void write_stream_header(std::ostream& out, Eigen::Index ambient_dim);
void write_complete_row(std::ostream& out, const Eigen::VectorXd& x);
void write_observation_row(std::ostream& out, const Observation& obs, Eigen::Index ambient_dim);

// Truth sidecar: one JSON object per tracked step.
void write_truth_line(std::ostream& out, const Sample& sample);

/// Line-oriented reader. Errors carry the 1-based line number as DataError.
class StreamReader {
 public:
  explicit StreamReader(std::istream& in, double scale = 1.0);

  Eigen::Index ambient_dim() const { return dim_; }
  // Next row as an observation stamped with time t, or nullopt at the end.
  // A row without observed entries yields an empty observation.
  std::optional<Observation> next(std::size_t t);
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  double scale_;
  Eigen::Index dim_ = 0;
  std::size_t line_ = 0;
  std::string buffer_;
};

// Shortest decimal that reads back to the same double.
std::string format_double(double v);

}  // namespace mousse
