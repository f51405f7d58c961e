#pragma once

#include <stdexcept>
#include <string>

namespace consult {

// Base for all errors raised by this library.
class ConsultError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Corpus / taxonomy / index file problems.
class FileError : public ConsultError {
 public:
  using ConsultError::ConsultError;
};

class ValidationError : public ConsultError {
 public:
  using ConsultError::ConsultError;
};

// Action grammar errors.
class MalformedAction : public ConsultError {
 public:
  using ConsultError::ConsultError;
};

class UnknownPhase : public MalformedAction {
 public:
  explicit UnknownPhase(const std::string& name)
      : MalformedAction("unknown phase: " + name), phase_name(name) {}
  std::string phase_name;
};

class UnknownCategory : public MalformedAction {
 public:
  UnknownCategory(const std::string& phase, const std::string& category)
      : MalformedAction("unknown category \"" + category + "\" under phase " + phase),
        phase_name(phase),
        category_name(category) {}
  std::string phase_name;
  std::string category_name;
};

// FSM errors.
class ActionAfterTermination : public ConsultError {
 public:
  ActionAfterTermination() : ConsultError("action applied to a terminated consultation") {}
};

// Agent errors.
class NonInquiryAction : public ConsultError {
 public:
  NonInquiryAction() : ConsultError("patient agent only answers Inquiry actions") {}
};

class NonExaminationAction : public ConsultError {
 public:
  NonExaminationAction() : ConsultError("examiner agent only answers Examination actions") {}
};

// Backend errors.
class BackendFailure : public ConsultError {
 public:
  using ConsultError::ConsultError;
};

class FixtureExhausted : public BackendFailure {
 public:
  FixtureExhausted() : BackendFailure("scripted fixture exhausted") {}
};

class FixtureMismatch : public BackendFailure {
 public:
  explicit FixtureMismatch(const std::string& detail)
      : BackendFailure("scripted fixture mismatch: " + detail) {}
};

// Evaluation errors.
class EvaluatorParseFailure : public ConsultError {
 public:
  using ConsultError::ConsultError;
};

class ConfigError : public ConsultError {
 public:
  using ConsultError::ConsultError;
};

}  // namespace consult
