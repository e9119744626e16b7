#pragma once

#include <string>
#include <vector>

namespace slowflow::io {

/// Shortest decimal form that round-trips a double exactly.
std::string format_exact(double v);
/// Fixed 6-decimal form for report files.
std::string format_fixed(double v);

/// Writes content to path via a temp file and rename, so readers never see a
/// half-written file.
void atomic_write(const std::string& path, const std::string& content);

/// Whole text file.
std::string read_text(const std::string& path);

/// Splits one CSV line on commas (no quoting; our files never need it).
std::vector<std::string> split_csv_line(const std::string& line);

/// Parses a double or throws IngestionError mentioning context.
double parse_double(const std::string& token, const std::string& context);

}  // namespace slowflow::io
