#include "hhsplit/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace hhsplit {

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (i) text_ += ',';
        text_ += columns_[i];
    }
    text_ += '\n';
}

CsvTable& CsvTable::cell(double x) { return cell(std::string_view(format_double(x))); }

CsvTable& CsvTable::cell(std::int64_t x) { return cell(std::string_view(std::to_string(x))); }

CsvTable& CsvTable::cell(std::string_view s) {
    if (in_row_ == columns_.size()) throw std::logic_error("CSV row has more cells than columns");
    if (s.find_first_of(",\"\n") != std::string_view::npos) throw std::invalid_argument("CSV cell needs quoting");
    if (in_row_++) text_ += ',';
    text_ += s;
    return *this;
}

void CsvTable::end_row() {
    if (in_row_ != columns_.size()) throw std::logic_error("CSV row has fewer cells than columns");
    text_ += '\n';
    in_row_ = 0;
    ++rows_;
}

std::filesystem::path write_csv(const std::filesystem::path& dir, const std::string& name, const CsvTable& table,
                                nlohmann::ordered_json metadata) {
    std::filesystem::create_directories(dir);
    const auto csv_path = dir / name;
    {
        std::ofstream out(csv_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + csv_path.string());
        out << table.text();
    }
    nlohmann::ordered_json meta;
    meta["format_version"] = kFormatVersion;
    meta["file"] = name;
    meta["columns"] = table.columns();
    meta["rows"] = table.rows();
    for (auto& [k, v] : metadata.items()) meta[k] = v;
    std::ofstream side(dir / (name + ".json"), std::ios::binary);
    if (!side) throw std::runtime_error("cannot write metadata for " + csv_path.string());
    side << meta.dump(2) << '\n';
    return csv_path;
}

}  // namespace hhsplit
