#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace abclim {

// One line of JSON (shape header) followed by the tensors as little-endian
// float64 in column-major order.
void write_binary_blob(std::ostream& os, const nlohmann::json& header,
                       const std::vector<const Eigen::MatrixXd*>& tensors);
std::pair<nlohmann::json, std::vector<Eigen::MatrixXd>> read_binary_blob(std::istream& is);

// Column-oriented table written as CSV ('.' decimal, '\n' newlines).
class Table {
public:
    explicit Table(std::vector<std::string> columns);

    void add_row(std::vector<double> values);
    const std::vector<std::string>& columns() const { return columns_; }
    const std::vector<std::vector<double>>& rows() const { return rows_; }
    bool empty() const { return rows_.empty(); }
    std::size_t column_index(const std::string& name) const;

    void write_csv(std::ostream& os) const;
    nlohmann::json to_json() const;

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<double>> rows_;
};

// Shortest decimal that round-trips.
std::string format_double(double v);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace abclim
