#include "lora/harness/records.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lora/error.hpp"

namespace lora::harness {

namespace {

constexpr const char* kColumns =
    "experiment,evaluator,seed,budget,epoch,status,entrywise_error,frobenius_error,value_suboptimality,"
    "condition_number,consumed,d_hat,anchor_rows,anchor_cols,warnings";
constexpr std::size_t kColumnCount = 15;

double parse_double(const std::string& s) {
    if (s.empty()) return ExperimentRecord::nan;
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw ConfigError("records: bad number '" + s + "'");
    return v;
}

std::uint64_t parse_uint(const std::string& s) {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw ConfigError("records: bad integer '" + s + "'");
    return v;
}

}  // namespace

std::string format_number(double v) {
    if (std::isnan(v)) return {};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string join_warnings(const std::vector<std::string>& warnings) {
    std::string out;
    for (const auto& w : warnings) {
        if (!out.empty()) out += ';';
        for (char ch : w) out += (ch == ',' || ch == '\n' || ch == '\r' || ch == ';' || ch == '"') ? ' ' : ch;
    }
    return out;
}

std::string csv_preamble() { return std::string(kRecordsVersion) + "\n" + kColumns + "\n"; }

std::string to_csv_row(const ExperimentRecord& r) {
    std::ostringstream os;
    os << r.experiment << ',' << r.evaluator << ',' << r.seed << ',' << r.budget << ',' << r.epoch << ','
       << r.status << ',' << format_number(r.entrywise_error) << ',' << format_number(r.frobenius_error) << ','
       << format_number(r.value_suboptimality) << ',' << format_number(r.condition_number) << ',' << r.consumed
       << ',' << r.d_hat << ',' << r.anchor_rows << ',' << r.anchor_cols << ',' << r.warnings << '\n';
    return os.str();
}

ExperimentRecord parse_csv_row(const std::string& line) {
    std::vector<std::string> f;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            f.push_back(cur);
            cur.clear();
        } else if (ch != '\n' && ch != '\r') {
            cur += ch;
        }
    }
    f.push_back(cur);
    if (f.size() != kColumnCount)
        throw ConfigError("records: expected " + std::to_string(kColumnCount) + " fields, got " +
                          std::to_string(f.size()));
    ExperimentRecord r;
    try {
        r.experiment = f[0];
        r.evaluator = f[1];
        r.seed = parse_uint(f[2]);
        r.budget = parse_uint(f[3]);
        r.epoch = static_cast<int>(parse_uint(f[4]));
        r.status = f[5];
        r.entrywise_error = parse_double(f[6]);
        r.frobenius_error = parse_double(f[7]);
        r.value_suboptimality = parse_double(f[8]);
        r.condition_number = parse_double(f[9]);
        r.consumed = parse_uint(f[10]);
        r.d_hat = static_cast<int>(parse_uint(f[11]));
        r.anchor_rows = static_cast<int>(parse_uint(f[12]));
        r.anchor_cols = static_cast<int>(parse_uint(f[13]));
        r.warnings = f[14];
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("records: malformed row: ") + e.what());
    }
    return r;
}

std::vector<ExperimentRecord> read_records(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("records: cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    std::vector<ExperimentRecord> out;
    std::size_t start = 0;
    while (start < text.size()) {
        const std::size_t end = text.find('\n', start);
        if (end == std::string::npos) break;
        const std::string line = text.substr(start, end - start);
        start = end + 1;
        if (line.empty() || line.front() == '#' || line.rfind("experiment,", 0) == 0) continue;
        out.push_back(parse_csv_row(line));
    }
    return out;
}

}  // namespace lora::harness
