#include "mousse/stream_io.hpp"

#include <charconv>
#include <cmath>

#include <json.hpp>

#include "mousse/errors.hpp"

namespace mousse {

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

void write_stream_header(std::ostream& out, Eigen::Index ambient_dim) { out << "D=" << ambient_dim << '\n'; }

void write_complete_row(std::ostream& out, const Eigen::VectorXd& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i > 0) out << ',';
    out << format_double(x(i));
  }
  out << '\n';
}

void write_observation_row(std::ostream& out, const Observation& obs, Eigen::Index ambient_dim) {
  std::size_t next = 0;
  for (Eigen::Index i = 0; i < ambient_dim; ++i) {
    if (i > 0) out << ',';
    if (next < obs.omega.size() && obs.omega[next] == i) {
      out << format_double(obs.values(static_cast<Eigen::Index>(next)));
      ++next;
    } else {
      out << "NaN";
    }
  }
  out << '\n';
}

void write_truth_line(std::ostream& out, const Sample& sample) {
  nlohmann::json j;
  j["t"] = sample.obs.t;
  j["theta"] = sample.theta;
  j["schedule"] = sample.schedule_value;
  j["after_change"] = sample.after_change;
  j["v"] = std::vector<double>(sample.truth.data(), sample.truth.data() + sample.truth.size());
  out << j.dump() << '\n';
}

StreamReader::StreamReader(std::istream& in, double scale) : in_(in), scale_(scale) {
  if (!std::getline(in_, buffer_)) throw DataError("line 1: missing stream header D=<int>");
  line_ = 1;
  if (!buffer_.empty() && buffer_.back() == '\r') buffer_.pop_back();
  const std::string_view header(buffer_);
  if (header.substr(0, 2) != "D=") throw DataError("line 1: expected header D=<int>, got '" + buffer_ + "'");
  long long dim = 0;
  const auto [ptr, ec] = std::from_chars(header.data() + 2, header.data() + header.size(), dim);
  if (ec != std::errc() || ptr != header.data() + header.size() || dim < 1)
    throw DataError("line 1: invalid ambient dimension in '" + buffer_ + "'");
  dim_ = static_cast<Eigen::Index>(dim);
}

std::optional<Observation> StreamReader::next(std::size_t t) {
  while (true) {
    if (!std::getline(in_, buffer_)) return std::nullopt;
    ++line_;
    if (!buffer_.empty() && buffer_.back() == '\r') buffer_.pop_back();
    if (!buffer_.empty()) break;
  }
  const auto where = [this] { return "line " + std::to_string(line_) + ": "; };

  std::vector<double> values;
  std::vector<Eigen::Index> omega;
  const std::string_view row(buffer_);
  std::size_t start = 0;
  Eigen::Index field = 0;
  while (true) {
    const auto comma = row.find(',', start);
    std::string_view tok = row.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    if (field >= dim_) throw DataError(where() + "more than D=" + std::to_string(dim_) + " fields");
    if (tok != "NaN") {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
        throw DataError(where() + "field " + std::to_string(field + 1) + " is not a number: '" + std::string(tok) + "'");
      values.push_back(v * scale_);
      omega.push_back(field);
    }
    ++field;
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (field != dim_)
    throw DataError(where() + "expected " + std::to_string(dim_) + " fields, got " + std::to_string(field));

  Observation obs;
  obs.t = t;
  obs.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  obs.omega = std::move(omega);
  return obs;
}

}  // namespace mousse
