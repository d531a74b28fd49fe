#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace aghq {

// 17 significant digits, '.' decimal separator, locale independent.
std::string format_double(double value);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws ConfigError
};

// Comma-separated, LF line endings, no quoting.
CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
std::string to_csv_string(const CsvTable& table);

double parse_double(const std::string& text);

// Header row of names, then one row of 17-digit values per matrix row.
void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                      const Eigen::MatrixXd& values);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path, std::vector<std::string>* names);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& value);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// FNV-1a 64-bit digest rendered as 16 hex characters.
std::string digest_hex(const std::string& text);

}  // namespace aghq
