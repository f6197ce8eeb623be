#include "ddenoc/history.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace ddenoc {

HistoryFunction HistoryFunction::constant(Vec x) {
  HistoryFunction h;
  h.constant_ = std::move(x);
  return h;
}

HistoryFunction HistoryFunction::piecewise_linear(std::vector<double> times,
                                                  std::vector<Vec> states) {
  if (times.size() < 2 || times.size() != states.size()) {
    throw ConfigError("piecewise-linear history needs >= 2 samples with matching states");
  }
  for (std::size_t j = 1; j < times.size(); ++j) {
    if (!(times[j] > times[j - 1])) throw ConfigError("history times must be strictly increasing");
    if (states[j].size() != states[0].size()) throw ConfigError("history state sizes differ");
  }
  HistoryFunction h;
  h.constant_ = states.front();
  h.times_ = std::move(times);
  h.states_ = std::move(states);
  return h;
}

double HistoryFunction::span_begin() const {
  return is_constant() ? -std::numeric_limits<double>::infinity() : times_.front();
}

double HistoryFunction::span_end() const {
  return is_constant() ? std::numeric_limits<double>::infinity() : times_.back();
}

bool HistoryFunction::covers(double t) const {
  return is_constant() || (t >= times_.front() && t <= times_.back());
}

Vec HistoryFunction::operator()(double t) const {
  if (is_constant()) return constant_;
  if (!covers(t)) {
    std::ostringstream msg;
    msg << "history evaluated at t = " << t << " outside [" << times_.front() << ", "
        << times_.back() << "]";
    throw DomainError(msg.str());
  }
  return interpolate_linear(times_, states_, t);
}

Vec interpolate_linear(const std::vector<double>& times, const std::vector<Vec>& values,
                       double t) {
  auto hi = std::upper_bound(times.begin(), times.end(), t);
  if (hi == times.begin()) return values.front();
  if (hi == times.end()) return values.back();
  const auto j = static_cast<std::size_t>(hi - times.begin());
  const double t0 = times[j - 1];
  const double t1 = times[j];
  const double s = (t - t0) / (t1 - t0);
  return (1.0 - s) * values[j - 1] + s * values[j];
}

}  // namespace ddenoc
