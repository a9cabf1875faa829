#pragma once

// CSV input and deterministic CSV/JSON output.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "spline.hpp"
#include "vb_lasso.hpp"

namespace vblasso::io {

/// Malformed input; the message names the line (1-based, header is line 1)
/// and column.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Table {
    std::vector<std::string> header;
    Eigen::MatrixXd values;  // rows x columns

    Eigen::Index column(const std::string& name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return static_cast<Eigen::Index>(j);
        throw ParseError("column '" + name + "' not found in header");
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// Splits one record on commas; double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw ParseError("line " + std::to_string(line_no) + ": unterminated quoted field");
    fields.push_back(trim(cur));
    return fields;
}

}  // namespace detail

inline Table parse_csv(std::istream& in) {
    Table t;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        if (t.header.empty()) {
            t.header = detail::split_record(line, line_no);
            continue;
        }
        const auto fields = detail::split_record(line, line_no);
        if (fields.size() != t.header.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                             " fields, found " + std::to_string(fields.size()));
        std::vector<double> row(fields.size());
        for (std::size_t j = 0; j < fields.size(); ++j) {
            const std::string& f = fields[j];
            const char* end = f.data() + f.size();
            auto [ptr, ec] = std::from_chars(f.data(), end, row[j]);
            if (f.empty() || ec != std::errc() || ptr != end || !std::isfinite(row[j]))
                throw ParseError("line " + std::to_string(line_no) + ", column " + std::to_string(j + 1) + " ('" +
                                 t.header[j] + "'): not a finite number: '" + f + "'");
        }
        rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw ParseError("input is empty");
    if (rows.empty()) throw ParseError("input has a header but no data rows");
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return t;
}

inline Table read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open input file '" + path + "'");
    return parse_csv(in);
}

/// Response `response` against every other column.
inline Dataset to_dataset(const Table& t, const std::string& response = "y") {
    const Eigen::Index yc = t.column(response);
    Dataset d;
    d.y = t.values.col(yc);
    d.X.resize(t.values.rows(), t.values.cols() - 1);
    Eigen::Index c = 0;
    for (Eigen::Index j = 0; j < t.values.cols(); ++j) {
        if (j == yc) continue;
        d.X.col(c++) = t.values.col(j);
        d.feature_names.push_back(t.header[static_cast<std::size_t>(j)]);
    }
    return d;
}

/// Shortest round-trip representation.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string quote_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// Accumulates a CSV document row by row.
class CsvWriter {
public:
    explicit CsvWriter(const std::vector<std::string>& header) { row(header); }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << quote_field(fields[i]);
        }
        out_ << '\n';
    }
    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
}

inline nlohmann::ordered_json to_json(const Eigen::VectorXd& v) {
    auto a = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline nlohmann::ordered_json to_json(const Eigen::MatrixXd& m) {
    auto a = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
    return a;
}

/// Every variational hyperparameter by name; see docs/state-json.md.
inline nlohmann::ordered_json state_to_json(const VariationalState& s) {
    nlohmann::ordered_json j;
    j["m_beta"] = to_json(s.m_beta);
    j["C_beta"] = to_json(s.C_beta);
    j["a_phi"] = s.a_phi;
    j["b_phi"] = s.b_phi;
    j["c_tau"] = s.c_tau;
    j["d_tau"] = s.d_tau;
    j["f_tau"] = to_json(s.f_tau);
    j["g_lambda"] = s.g_lambda;
    j["h_lambda"] = s.h_lambda;
    j["iteration"] = s.iteration;
    j["converged"] = s.converged;
    j["seed"] = s.seed;
    j["elbo"] = s.elbo_trace.empty() ? 0.0 : s.elbo_trace.back();
    return j;
}

inline nlohmann::ordered_json state_to_json(const SplineVariationalState& s) {
    nlohmann::ordered_json j = state_to_json(static_cast<const VariationalState&>(s));
    j["m_beta1"] = to_json(s.m_beta1);
    j["C_beta1"] = to_json(s.C_beta1);
    return j;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
    return v;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& a) {
    const auto rows = static_cast<Eigen::Index>(a.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(a[0].size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index k = 0; k < cols; ++k)
            m(i, k) = a[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
    return m;
}

inline VariationalState state_from_json(const nlohmann::json& j) {
    VariationalState s;
    s.m_beta = vector_from_json(j.at("m_beta"));
    s.C_beta = matrix_from_json(j.at("C_beta"));
    s.a_phi = j.at("a_phi").get<double>();
    s.b_phi = j.at("b_phi").get<double>();
    s.c_tau = j.at("c_tau").get<double>();
    s.d_tau = j.at("d_tau").get<double>();
    s.f_tau = vector_from_json(j.at("f_tau"));
    s.g_lambda = j.at("g_lambda").get<double>();
    s.h_lambda = j.at("h_lambda").get<double>();
    s.iteration = j.at("iteration").get<int>();
    s.converged = j.at("converged").get<bool>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

/// 64-bit FNV-1a, used to fingerprint run configurations.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace vblasso::io
