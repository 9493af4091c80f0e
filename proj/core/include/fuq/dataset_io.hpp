#pragma once

#include <filesystem>
#include <iosfwd>

#include "fuq/gp.hpp"

namespace fuq {

// Header `a,x1,...,xd,y`, one simulation per row. Parse failures raise InputError
// naming the 1-based line.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

}  // namespace fuq
