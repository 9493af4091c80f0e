#include "fuq/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "fuq/error.hpp"
#include "fuq/format.hpp"

namespace fuq {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw InputError("dataset line " + std::to_string(line) + ": " + what);
}

double parse_field(std::string_view field, std::size_t line) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || end != field.data() + field.size() || field.empty())
    fail(line, "cannot parse '" + std::string(field) + "' as a number");
  if (!std::isfinite(v)) fail(line, "non-finite value");
  return v;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in) {
  std::string text;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  Dataset data;
  while (std::getline(in, text)) {
    ++line_no;
    std::string_view line = text;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (columns == 0) {
      if (fields.size() < 2 || fields.front() != "a" || fields.back() != "y")
        fail(line_no, "header must read a,x1,...,xd,y");
      columns = fields.size();
      continue;
    }
    if (fields.size() != columns)
      fail(line_no, "expected " + std::to_string(columns) + " fields, got " +
                        std::to_string(fields.size()));
    InputPoint p;
    p.im = parse_field(fields.front(), line_no);
    if (!(p.im > 0.0)) fail(line_no, "IM must be positive");
    for (std::size_t k = 1; k + 1 < columns; ++k) p.params.push_back(parse_field(fields[k], line_no));
    data.responses.push_back(parse_field(fields.back(), line_no));
    data.points.push_back(std::move(p));
  }
  if (columns == 0) throw InputError("dataset is empty");
  if (data.size() == 0) throw InputError("dataset has a header but no rows");
  return data;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset " + path.string());
  return read_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  const std::size_t d = data.param_dim();
  out << "a";
  for (std::size_t k = 1; k <= d; ++k) out << ",x" << k;
  out << ",y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << format_double(data.points[i].im);
    for (double x : data.points[i].params) out << ',' << format_double(x);
    out << ',' << format_double(data.responses[i]) << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  write_dataset_csv(out, data);
}

}  // namespace fuq
