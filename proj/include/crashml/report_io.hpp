#ifndef CRASHML_REPORT_IO_HPP
#define CRASHML_REPORT_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "crashml/counterfactual.hpp"
#include "crashml/ensemble.hpp"

namespace crashml {

// Writes via a temp file plus rename, so readers never see partial content.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

// CSV tables shaped like the report: omnibus test, percent changes, pairwise
// p-values (lower triangle), and per group box-plot data.
std::string kruskal_to_csv(const KruskalWallisResult& result);
std::string percent_changes_to_csv(const PercentChangeTable& table);
std::string pairwise_to_csv(const PairwiseMatrix& matrix);
std::string boxplot_data_to_csv(const EffectReport& report);
std::string sensitivity_to_csv(const std::vector<SensitivityCurve>& curves);

// Standalone SVG documents.
std::string render_boxplot_svg(const EffectReport& report, const std::string& title,
                               const std::string& y_label);
std::string render_sensitivity_svg(const std::vector<SensitivityCurve>& curves,
                                   bool use_mse, const std::string& title);

}  // namespace crashml

#endif  // CRASHML_REPORT_IO_HPP
