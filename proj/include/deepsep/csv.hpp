#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "deepsep/types.hpp"

namespace deepsep {

// 17 significant digits ("%.17g"); round-trips every double.
std::string format_double(double v);

std::string matrix_to_csv(const Matrix& m);
Matrix matrix_from_csv(std::string_view text);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);

// A header row plus numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

std::string table_to_csv(const CsvTable& table);
CsvTable table_from_csv(std::string_view text);

// FNV-1a, 64 bit, rendered as 16 lowercase hex digits.
std::string digest_hex(std::string_view bytes);

}  // namespace deepsep
