#pragma once

#include <string>
#include <vector>

#include "superct/core.hpp"

namespace superct {

// sqrt(sum_j (xhat_j - xstar_j)^2 / N_p); both images in HU.
double rmse_hu(const Image& xhat_hu, const Image& xstar_hu);

// Mean local SSIM, 8x8 uniform window, images clipped to the [800, 1200] HU
// display window; C1 = (0.01 L)^2, C2 = (0.03 L)^2 with L the window width.
double ssim(const Image& xhat_hu, const Image& xstar_hu);

struct MetricReport {
    std::string method;
    std::vector<double> rmse;  // per image, HU
    std::vector<double> ssim;
    double mean_rmse = 0.0;
    double mean_ssim = 0.0;
};

MetricReport evaluate_method(const std::string& method,
                             const std::vector<Image>& reconstructions,
                             const std::vector<Image>& references);

void write_report_csv(const std::vector<MetricReport>& reports, const std::string& path);
std::string format_report_table(const std::vector<MetricReport>& reports);

}  // namespace superct
