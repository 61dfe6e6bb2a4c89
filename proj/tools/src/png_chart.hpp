#pragma once

#include <filesystem>
#include <vector>

#include "cloudpatch/eval.hpp"

namespace cloudpatch::cli {

// Grouped bars of rmse_mean per band, one colour per model, with whiskers at
// +/- rmse_std. No text is rendered.
void write_rmse_chart(const std::vector<ReportRow>& rows, const std::filesystem::path& path);

}  // namespace cloudpatch::cli
