#include "csa/libsvm.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

namespace csa::io {

namespace {

double parse_number(const std::string& token, std::size_t line, const char* what) {
    const char* begin = token.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    if (end != begin + token.size() || token.empty()) {
        throw ParseError(line, std::string("cannot parse ") + what + " '" + token + "'");
    }
    if (errno == ERANGE || !std::isfinite(v)) {
        throw ParseError(line, std::string(what) + " '" + token + "' is out of range");
    }
    return v;
}

}  // namespace

LibsvmData parse_libsvm(std::istream& in, const ParseOptions& opts) {
    std::vector<double> labels;
    std::vector<std::vector<std::pair<std::size_t, double>>> rows;
    std::size_t width = 0;
    std::size_t line_no = 0;

    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();

        std::istringstream fields(line);
        std::string token;
        if (!(fields >> token)) {
            throw ParseError(line_no, "empty example (no label)");
        }
        labels.push_back(parse_number(token, line_no, "label"));

        std::vector<std::pair<std::size_t, double>> entries;
        std::size_t prev_index = 0;
        while (fields >> token) {
            const std::size_t colon = token.find(':');
            if (colon == std::string::npos) {
                throw ParseError(line_no, "malformed pair '" + token + "' (missing ':')");
            }
            const std::string index_str = token.substr(0, colon);
            const std::string value_str = token.substr(colon + 1);
            if (index_str.empty()) {
                throw ParseError(line_no, "malformed pair '" + token + "' (missing index)");
            }
            if (value_str.empty()) {
                throw ParseError(line_no, "malformed pair '" + token + "' (missing value)");
            }
            if (index_str.find_first_not_of("0123456789") != std::string::npos) {
                throw ParseError(line_no, "cannot parse feature index '" + index_str + "'");
            }
            const unsigned long long raw_index = std::strtoull(index_str.c_str(), nullptr, 10);
            if (raw_index < 1) {
                throw ParseError(line_no, "feature indices are 1-based, got '" + index_str + "'");
            }
            if (raw_index > opts.max_feature_index) {
                throw ParseError(line_no, "feature index " + index_str + " exceeds the limit of " +
                                              std::to_string(opts.max_feature_index));
            }
            const std::size_t index = static_cast<std::size_t>(raw_index);
            if (index <= prev_index) {
                throw ParseError(line_no, "feature indices must be strictly increasing (" +
                                              std::to_string(prev_index) + " then " +
                                              std::to_string(index) + ")");
            }
            const double value = parse_number(value_str, line_no, "feature value");
            entries.emplace_back(index, value);
            prev_index = index;
            width = std::max(width, index);
        }
        rows.push_back(std::move(entries));
    }
    if (rows.empty()) {
        throw ParseError(0, "empty file");
    }

    LibsvmData out;
    out.rows = rows.size();
    out.cols = width;
    out.raw_labels = labels;
    out.data.X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                       static_cast<Eigen::Index>(width));
    out.data.y.resize(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (const auto& [index, value] : rows[i]) {
            out.data.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(index - 1)) = value;
        }
        out.data.y[static_cast<Eigen::Index>(i)] = labels[i];
    }

    if (opts.map_binary_labels) {
        std::set<double> distinct(labels.begin(), labels.end());
        if (distinct.size() == 2) {
            out.labels_mapped = true;
            out.negative_label = *distinct.begin();
            out.positive_label = *distinct.rbegin();
            for (Eigen::Index i = 0; i < out.data.y.size(); ++i) {
                out.data.y[i] = (out.data.y[i] == out.negative_label) ? -1.0 : 1.0;
            }
        }
    }
    return out;
}

LibsvmData load_libsvm_file(const std::string& path, const ParseOptions& opts) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return parse_libsvm(in, opts);
}

void write_libsvm(std::ostream& out, const learners::Dataset& data) {
    data.validate();
    out.precision(17);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        out << data.y[i];
        for (Eigen::Index j = 0; j < data.cols(); ++j) {
            if (data.X(i, j) != 0.0) {
                out << ' ' << (j + 1) << ':' << data.X(i, j);
            }
        }
        out << '\n';
    }
}

}  // namespace csa::io
