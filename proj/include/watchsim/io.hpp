#pragma once

#include <string>
#include <vector>

namespace watchsim {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

// RFC-4180-style field quoting (only when needed).
std::string csv_escape(const std::string& field);
std::vector<std::string> split_csv_line(const std::string& line,
                                        std::size_t line_number);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace watchsim
