#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace hhsplit {

inline constexpr int kFormatVersion = 1;

/// Shortest text that reads back to the same double (17 significant digits).
std::string format_double(double x);

/// Comma-separated table built in memory; written in one go.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns);

    CsvTable& cell(double x);
    CsvTable& cell(std::int64_t x);
    CsvTable& cell(int x) { return cell(static_cast<std::int64_t>(x)); }
    CsvTable& cell(bool x) { return cell(static_cast<std::int64_t>(x)); }
    CsvTable& cell(std::string_view s);
    CsvTable& cell(const char* s) { return cell(std::string_view(s)); }
    void end_row();

    const std::vector<std::string>& columns() const { return columns_; }
    std::size_t rows() const { return rows_; }
    const std::string& text() const { return text_; }

private:
    std::vector<std::string> columns_;
    std::string text_;
    std::size_t rows_ = 0;
    std::size_t in_row_ = 0;
};

/// Writes `name` into dir together with `name.json` holding the metadata
/// (format_version and columns are added). Returns the CSV path.
std::filesystem::path write_csv(const std::filesystem::path& dir, const std::string& name, const CsvTable& table,
                                nlohmann::ordered_json metadata);

}  // namespace hhsplit
