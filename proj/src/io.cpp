#include "abclim/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace abclim {

static_assert(std::endian::native == std::endian::little, "binary blobs assume a little-endian host");

void write_binary_blob(std::ostream& os, const nlohmann::json& header,
                       const std::vector<const Eigen::MatrixXd*>& tensors) {
    os << header.dump() << '\n';
    for (const auto* m : tensors)
        os.write(reinterpret_cast<const char*>(m->data()),
                 static_cast<std::streamsize>(m->size() * sizeof(double)));
    if (!os) throw std::runtime_error("failed writing binary blob");
}

std::pair<nlohmann::json, std::vector<Eigen::MatrixXd>> read_binary_blob(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("missing blob header");
    nlohmann::json header = nlohmann::json::parse(line);
    std::vector<Eigen::MatrixXd> tensors;
    for (const auto& shape : header.at("tensors")) {
        Eigen::MatrixXd m(shape.at("rows").get<Eigen::Index>(), shape.at("cols").get<Eigen::Index>());
        is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
        if (!is) throw std::runtime_error("truncated binary blob");
        tensors.push_back(std::move(m));
    }
    return {std::move(header), std::move(tensors)};
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

Table::Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

void Table::add_row(std::vector<double> values) {
    if (values.size() != columns_.size()) throw std::invalid_argument("row width does not match header");
    rows_.push_back(std::move(values));
}

std::size_t Table::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i] == name) return i;
    throw std::out_of_range("no column '" + name + "'");
}

void Table::write_csv(std::ostream& os) const {
    if (rows_.empty()) throw std::runtime_error("refusing to write an empty result table");
    for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
    os << '\n';
    for (const auto& r : rows_) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_double(r[i]);
        os << '\n';
    }
}

nlohmann::json Table::to_json() const {
    if (rows_.empty()) throw std::runtime_error("refusing to write an empty result table");
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows_) {
        nlohmann::json obj = nlohmann::json::object();
        for (std::size_t i = 0; i < r.size(); ++i) obj[columns_[i]] = r[i];
        j.push_back(obj);
    }
    return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    os << text;
    if (!os) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace abclim
