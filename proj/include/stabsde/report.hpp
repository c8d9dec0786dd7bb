#pragma once

#include "stabsde/experiments.hpp"

#include <string>
#include <vector>

namespace stabsde {

struct Table {
    std::string file;  // relative to the report directory
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

struct Report {
    std::string name;  // subdirectory
    std::vector<std::string> summary;
    std::vector<Table> tables;
    std::vector<std::pair<std::string, DensityGrid>> densities;  // file, grid
};

Report make_report(const std::string& name, const ConvergenceReport& r);
Report make_report(const std::string& name, const SeriesResult& r);
Report make_report(const std::string& name, const DensityGrid& d);
Report make_report(const std::string& name, const DensityGapResult& r);
Report make_report(const std::string& name, const BoundSuiteResult& r);
Report make_sample_report(const std::string& name, const Mat& samples);

// Layout: dir/config.txt (config echo), dir/summary.txt, dir/<name>/<file>.csv.
// An existing non-empty dir is an error unless force is set; force overwrites in place.
void write_reports(const std::string& dir, const ExperimentConfig& cfg, const std::vector<Report>& reports,
                   bool force);

std::string summary_text(const std::vector<Report>& reports);

} // namespace stabsde
