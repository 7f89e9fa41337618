#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace agentry::bench {

// One CSV row per metric record; schema identical across scenarios:
//   scenario,params,metric,value,unit,timestamp
class CsvWriter {
public:
    CsvWriter() = default;
    explicit CsvWriter(const std::string& path);

    void row(const std::string& scenario, const std::string& params, const std::string& metric,
             double value, const std::string& unit);

    bool active() const { return out_.is_open(); }

private:
    std::ofstream out_;
};

double median(std::vector<double> values);
// Median absolute deviation.
double mad(std::vector<double> values);

// Embedded acceptance bounds; a failed gate turns the CLI exit code nonzero.
struct GateReport {
    struct Entry {
        std::string name;
        bool pass = false;
        std::string detail;
    };
    std::vector<Entry> entries;

    void check(const std::string& name, bool pass, const std::string& detail);
    bool all_pass() const;
    void print(const std::string& scenario) const;
};

}  // namespace agentry::bench
