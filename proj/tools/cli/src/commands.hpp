#pragma once

#include <iosfwd>

#include "config.hpp"

namespace fuq::cli {

json fit_defaults();
json fragility_defaults();
json gsa_defaults();
json testbed_defaults();
json validate_defaults();

int cmd_fit(const Config& cfg, std::ostream& out, std::ostream& err);
int cmd_fragility(const Config& cfg, std::ostream& out, std::ostream& err);
int cmd_gsa(const Config& cfg, std::ostream& out, std::ostream& err);
int cmd_testbed(const Config& cfg, std::ostream& out, std::ostream& err);
int cmd_validate(const Config& cfg, std::ostream& out, std::ostream& err);

}  // namespace fuq::cli
