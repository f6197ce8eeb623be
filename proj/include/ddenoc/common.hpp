#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace ddenoc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;
using VecRef = Eigen::Ref<const Eigen::VectorXd>;
using MatRef = Eigen::Ref<const Eigen::MatrixXd>;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An evaluator was called outside its mathematical domain (e.g. v <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid options, dimensions or problem data.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A model produced a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// A delayed time fell outside the span covered by the history.
class HistoryUnderflow : public Error {
 public:
  HistoryUnderflow(int delay_index, double query_time, const std::string& what)
      : Error(what), delay_index_(delay_index), query_time_(query_time) {}
  int delay_index() const { return delay_index_; }
  double query_time() const { return query_time_; }

 private:
  int delay_index_;
  double query_time_;
};

/// Newton iteration inside a time step did not converge.
class StepFailure : public Error {
 public:
  StepFailure(double time, const std::string& what) : Error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// The mass matrix of the linearized-delay pencil is numerically singular.
class DegeneratePencil : public Error {
 public:
  DegeneratePencil(double condition, const std::string& what)
      : Error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

/// The point handed to a steady-state routine is not a steady state.
class SteadyStateError : public Error {
 public:
  SteadyStateError(double residual, const std::string& what)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

}  // namespace ddenoc
