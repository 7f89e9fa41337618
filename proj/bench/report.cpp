#include "report.hpp"

#include <chrono>
#include <cstdio>

namespace agentry::bench {

CsvWriter::CsvWriter(const std::string& path) {
    if (path.empty()) return;
    bool fresh = true;
    {
        std::ifstream probe(path);
        fresh = !probe.is_open() || probe.peek() == std::ifstream::traits_type::eof();
    }
    out_.open(path, std::ios::app);
    if (fresh && out_.is_open()) {
        out_ << "scenario,params,metric,value,unit,timestamp\n";
    }
}

void CsvWriter::row(const std::string& scenario, const std::string& params,
                    const std::string& metric, double value, const std::string& unit) {
    if (!out_.is_open()) return;
    auto ts = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::system_clock::now().time_since_epoch())
                  .count();
    out_ << scenario << ',' << params << ',' << metric << ',' << value << ',' << unit << ','
         << ts << '\n';
    out_.flush();
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return (values[mid - 1] + values[mid]) / 2.0;
}

double mad(std::vector<double> values) {
    if (values.empty()) return 0.0;
    double m = median(values);
    std::vector<double> dev;
    dev.reserve(values.size());
    for (double v : values) dev.push_back(std::fabs(v - m));
    return median(std::move(dev));
}

void GateReport::check(const std::string& name, bool pass, const std::string& detail) {
    entries.push_back({name, pass, detail});
}

bool GateReport::all_pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const Entry& e) { return e.pass; });
}

void GateReport::print(const std::string& scenario) const {
    for (const auto& e : entries) {
        std::printf("[%s] %s: %s (%s)\n", e.pass ? "PASS" : "FAIL", scenario.c_str(),
                    e.name.c_str(), e.detail.c_str());
    }
}

}  // namespace agentry::bench
