#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace copolicy {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad CSV, bad config document, unknown keys. The CLI maps
/// this family to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  using InputError::InputError;
};

/// A single field-level validation failure.
struct FieldIssue {
  std::string field;
  std::string message;
};

class InvalidConfig : public InputError {
 public:
  explicit InvalidConfig(std::vector<FieldIssue> issues);
  InvalidConfig(std::string field, std::string message)
      : InvalidConfig(std::vector<FieldIssue>{{std::move(field), std::move(message)}}) {}

  const std::vector<FieldIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<FieldIssue> issues_;
};

class UnbalancedPanel : public Error {
 public:
  struct Cell {
    std::string unit_id;
    int year;
  };
  explicit UnbalancedPanel(std::vector<Cell> missing);

  const std::vector<Cell>& missing() const noexcept { return missing_; }

 private:
  std::vector<Cell> missing_;
};

class InvalidValue : public Error {
 public:
  using Error::Error;
};

class KTooLarge : public Error {
 public:
  using Error::Error;
};

class InfeasibleWindow : public Error {
 public:
  using Error::Error;
};

class MissingExposure : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class TooFewYears : public Error {
 public:
  using Error::Error;
};

class TooFewClusters : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class MixedTruths : public Error {
 public:
  using Error::Error;
};

class AbortThreshold : public Error {
 public:
  using Error::Error;
};

class Cancelled : public Error {
 public:
  using Error::Error;
};

class MissingCells : public Error {
 public:
  explicit MissingCells(std::vector<std::string> cells);

  const std::vector<std::string>& cells() const noexcept { return cells_; }

 private:
  std::vector<std::string> cells_;
};

class UnknownFigure : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace copolicy
