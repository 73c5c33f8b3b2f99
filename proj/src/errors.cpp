#include "copolicy/errors.hpp"

namespace copolicy {

namespace {

std::string describe(const std::vector<FieldIssue>& issues) {
  std::string msg = "invalid configuration:";
  for (const auto& issue : issues) msg += " " + issue.field + ": " + issue.message + ";";
  if (!issues.empty()) msg.pop_back();
  return msg;
}

std::string describe(const std::vector<UnbalancedPanel::Cell>& missing) {
  std::string msg = "unbalanced panel: " + std::to_string(missing.size()) + " missing unit-year cell(s):";
  std::size_t shown = 0;
  for (const auto& cell : missing) {
    if (shown++ == 20) {
      msg += " ...";
      break;
    }
    msg += " (" + cell.unit_id + ", " + std::to_string(cell.year) + ")";
  }
  return msg;
}

std::string describe(const std::vector<std::string>& cells) {
  std::string msg = "results are missing required scenario cells:";
  for (const auto& c : cells) msg += "\n  " + c;
  return msg;
}

}  // namespace

InvalidConfig::InvalidConfig(std::vector<FieldIssue> issues) : InputError(describe(issues)), issues_(std::move(issues)) {}

UnbalancedPanel::UnbalancedPanel(std::vector<Cell> missing) : Error(describe(missing)), missing_(std::move(missing)) {}

MissingCells::MissingCells(std::vector<std::string> cells) : Error(describe(cells)), cells_(std::move(cells)) {}

}  // namespace copolicy
