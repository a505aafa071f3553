#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

namespace subpop::cli {

// shortest representation that parses back to the same double
inline std::string format17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// A rectangular result table.  Cells are JSON scalars so the CSV and JSON
// emitters render the same values; doubles go out with 17 significant digits.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<nlohmann::ordered_json>> rows;

    void add_row(std::vector<nlohmann::ordered_json> cells) {
        rows.push_back(std::move(cells));
    }

    std::string to_csv() const {
        std::string out;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (c) out += ',';
            out += columns[c];
        }
        out += '\n';
        for (const auto& row : rows) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (c) out += ',';
                const auto& cell = row[c];
                if (cell.is_number_float())
                    out += format17(cell.get<double>());
                else if (cell.is_string())
                    out += cell.get<std::string>();
                else
                    out += cell.dump();
            }
            out += '\n';
        }
        return out;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& row : rows) {
            nlohmann::ordered_json obj;
            for (std::size_t c = 0; c < row.size(); ++c)
                obj[columns[c]] = row[c];
            arr.push_back(std::move(obj));
        }
        return arr;
    }

    std::string render(const std::string& format) const {
        if (format == "csv") return to_csv();
        return to_json().dump(2) + "\n";
    }
};

}  // namespace subpop::cli
