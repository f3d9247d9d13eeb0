#include "tcal/io.hpp"

#include "tcal/common.hpp"
#include "tcal/tests.hpp" // binarize_top1

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tcal {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

[[noreturn]] void fail(const std::string& name, std::size_t line, const std::string& msg) {
    throw DataError(name + ":" + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    auto res = std::from_chars(t.data(), t.data() + t.size(), out);
    return res.ec == std::errc() && res.ptr == t.data() + t.size();
}

bool parse_int(const std::string& s, long long& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    auto res = std::from_chars(t.data(), t.data() + t.size(), out);
    return res.ec == std::errc() && res.ptr == t.data() + t.size();
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

// Validates one parsed row through the shared sample validator so file ingest
// and in-memory construction agree on clamping/renormalization semantics.
void validate_row(std::vector<double>& z, std::uint32_t label, std::size_t K,
                  const IngestOptions& opt, const std::string& name, std::size_t line) {
    CalibrationSample one;
    one.n = 1;
    one.K = K;
    one.p = z;
    one.y = {label};
    try {
        validate_sample(one, ValidationOptions{opt.tolerance, opt.renormalize});
    } catch (const DataError& e) {
        std::string msg = e.what();
        const std::string prefix = "sample row 0: ";
        if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
        fail(name, line, msg);
    }
    z = one.p; // renormalization/clamping may have adjusted the row
}

CalibrationSample ingest_csv(std::istream& is, const IngestOptions& opt,
                             const std::string& name) {
    CalibrationSample s;
    BinarySample shortform;
    bool binary_form = false;
    std::size_t cols = 0;
    std::size_t lineno = 0;
    bool saw_data = false;
    std::string line;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_csv(line);

        double probe = 0.0;
        if (!saw_data && !parse_double(fields[0], probe)) continue; // header line

        if (!saw_data) {
            if (fields.size() < 2)
                fail(name, lineno, "expected at least two columns");
            cols = fields.size();
            binary_form = (cols == 2);
            saw_data = true;
            if (!binary_form) s.K = cols - 1;
        } else if (fields.size() != cols) {
            fail(name, lineno, "expected " + std::to_string(cols) + " columns, got " +
                                   std::to_string(fields.size()));
        }

        if (binary_form) {
            double z = 0.0;
            long long y = 0;
            if (!parse_double(fields[0], z)) fail(name, lineno, "bad probability '" + trim(fields[0]) + "'");
            if (!parse_int(fields[1], y) || (y != 0 && y != 1))
                fail(name, lineno, "binary outcome must be 0 or 1");
            std::vector<double> row = {z, 1.0 - z};
            validate_row(row, y == 1 ? 0u : 1u, 2, opt, name, lineno);
            shortform.z.push_back(row[0]);
            shortform.y.push_back(static_cast<std::uint8_t>(y));
        } else {
            std::vector<double> row(cols - 1);
            for (std::size_t j = 0; j + 1 < cols; ++j)
                if (!parse_double(fields[j], row[j]))
                    fail(name, lineno, "bad probability '" + trim(fields[j]) + "'");
            long long label = 0;
            if (!parse_int(fields[cols - 1], label))
                fail(name, lineno, "bad label '" + trim(fields[cols - 1]) + "'");
            if (label < 1 || label > static_cast<long long>(cols - 1))
                fail(name, lineno, "label " + std::to_string(label) + " outside [1, " +
                                       std::to_string(cols - 1) + "]");
            validate_row(row, static_cast<std::uint32_t>(label - 1), cols - 1, opt,
                         name, lineno);
            s.push_row(row.data(), static_cast<std::uint32_t>(label - 1));
        }
    }
    if (!saw_data) throw DataError(name + ": no data rows");
    return binary_form ? from_binary(shortform) : s;
}

CalibrationSample ingest_jsonl(std::istream& is, const IngestOptions& opt,
                               const std::string& name) {
    CalibrationSample s;
    std::size_t lineno = 0;
    std::string line;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(name, lineno, std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object() || !j.contains("p") || !j.contains("label"))
            fail(name, lineno, "expected an object with \"p\" and \"label\"");
        const auto& pj = j["p"];
        if (!pj.is_array() || pj.empty())
            fail(name, lineno, "\"p\" must be a non-empty array");
        std::vector<double> row;
        row.reserve(pj.size());
        for (const auto& v : pj) {
            if (!v.is_number()) fail(name, lineno, "\"p\" entries must be numbers");
            row.push_back(v.get<double>());
        }
        if (!j["label"].is_number_integer())
            fail(name, lineno, "\"label\" must be an integer");
        const auto label = j["label"].get<long long>();
        if (s.n == 0) {
            if (row.size() < 2) fail(name, lineno, "need at least 2 classes");
            s.K = row.size();
        } else if (row.size() != s.K) {
            fail(name, lineno, "expected " + std::to_string(s.K) + " probabilities, got " +
                                   std::to_string(row.size()));
        }
        if (label < 1 || label > static_cast<long long>(s.K))
            fail(name, lineno, "label " + std::to_string(label) + " outside [1, " +
                                   std::to_string(s.K) + "]");
        validate_row(row, static_cast<std::uint32_t>(label - 1), s.K, opt, name, lineno);
        s.push_row(row.data(), static_cast<std::uint32_t>(label - 1));
    }
    if (s.n == 0) throw DataError(name + ": no data rows");
    return s;
}

FileFormat detect_format(const std::string& path) {
    const auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return (ext == "jsonl" || ext == "json") ? FileFormat::Jsonl : FileFormat::Csv;
}

} // namespace

CalibrationSample ingest_stream(std::istream& is, FileFormat format,
                                const IngestOptions& opt, const std::string& name) {
    if (format == FileFormat::Auto) format = detect_format(name);
    CalibrationSample s = format == FileFormat::Jsonl ? ingest_jsonl(is, opt, name)
                                                      : ingest_csv(is, opt, name);
    if (opt.binarize_top1) s = from_binary(binarize_top1(s));
    return s;
}

CalibrationSample ingest_file(const std::string& path, const IngestOptions& opt) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open " + path);
    return ingest_stream(f, opt.format, opt, path);
}

void emit_csv(const CalibrationSample& s, std::ostream& os) {
    for (std::size_t k = 1; k <= s.K; ++k) os << "p" << k << ",";
    os << "label\n";
    for (std::size_t i = 0; i < s.n; ++i) {
        const double* z = s.row(i);
        for (std::size_t k = 0; k < s.K; ++k) os << format_double(z[k]) << ",";
        os << (s.y[i] + 1) << "\n";
    }
}

void emit_jsonl(const CalibrationSample& s, std::ostream& os) {
    for (std::size_t i = 0; i < s.n; ++i) {
        nlohmann::ordered_json j;
        j["p"] = std::vector<double>(s.row(i), s.row(i) + s.K);
        j["label"] = s.y[i] + 1;
        os << j.dump() << "\n";
    }
}

namespace {

nlohmann::json parse_toml_value(const std::string& raw, const std::string& name,
                                std::size_t lineno) {
    const std::string v = trim(raw);
    if (v.empty()) fail(name, lineno, "missing value");
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') fail(name, lineno, "unterminated string");
        return v.substr(1, v.size() - 2);
    }
    if (v == "true") return true;
    if (v == "false") return false;
    if (v.front() == '[') {
        if (v.back() != ']') fail(name, lineno, "unterminated array");
        nlohmann::json arr = nlohmann::json::array();
        const std::string body = trim(v.substr(1, v.size() - 2));
        if (body.empty()) return arr;
        for (const std::string& part : split_csv(body))
            arr.push_back(parse_toml_value(part, name, lineno));
        return arr;
    }
    if (v.find_first_of(".eE") == std::string::npos) {
        long long i = 0;
        if (parse_int(v, i)) return i;
    }
    double d = 0.0;
    if (parse_double(v, d)) return d;
    fail(name, lineno, "cannot parse value '" + v + "'");
}

} // namespace

nlohmann::json load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open config " + path);
    const auto dot = path.find_last_of('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    if (ext == "json") {
        try {
            return nlohmann::json::parse(f);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ": invalid JSON: " + e.what());
        }
    }
    // flat TOML subset
    nlohmann::json obj = nlohmann::json::object();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        // strip comments (quotes in our configs never contain '#')
        bool in_str = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_str = !in_str;
            else if (line[i] == '#' && !in_str) { line.resize(i); break; }
        }
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[')
            fail(path, lineno, "tables are not supported; use flat key = value pairs");
        const auto eq = t.find('=');
        if (eq == std::string::npos) fail(path, lineno, "expected key = value");
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) fail(path, lineno, "empty key");
        obj[key] = parse_toml_value(t.substr(eq + 1), path, lineno);
    }
    return obj;
}

} // namespace tcal
