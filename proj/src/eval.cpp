#include "superct/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace superct {

double rmse_hu(const Image& xhat_hu, const Image& xstar_hu) {
    if (!xhat_hu.same_shape(xstar_hu))
        throw std::invalid_argument("rmse_hu: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < xhat_hu.size(); ++i) {
        const double d = xhat_hu.data[i] - xstar_hu.data[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(xhat_hu.size()));
}

double ssim(const Image& xhat_hu, const Image& xstar_hu) {
    if (!xhat_hu.same_shape(xstar_hu))
        throw std::invalid_argument("ssim: shape mismatch");
    static constexpr double lo = 800.0, hi = 1200.0;
    constexpr double L = hi - lo;
    constexpr double c1 = (0.01 * L) * (0.01 * L);
    constexpr double c2 = (0.03 * L) * (0.03 * L);
    constexpr int win = 8;
    const int rows = xhat_hu.rows, cols = xhat_hu.cols;
    if (rows < win || cols < win) throw std::invalid_argument("ssim: image smaller than window");

    auto clip = [](double v) { return std::clamp(v, lo, hi); };
    const int nwr = rows - win + 1, nwc = cols - win + 1;
    double total = 0.0;
#pragma omp parallel for reduction(+ : total) schedule(static)
    for (int wr = 0; wr < nwr; ++wr) {
        for (int wc = 0; wc < nwc; ++wc) {
            double ma = 0.0, mb = 0.0;
            for (int r = 0; r < win; ++r)
                for (int c = 0; c < win; ++c) {
                    ma += clip(xhat_hu.at(wr + r, wc + c));
                    mb += clip(xstar_hu.at(wr + r, wc + c));
                }
            const double n = win * win;
            ma /= n;
            mb /= n;
            double va = 0.0, vb = 0.0, cov = 0.0;
            for (int r = 0; r < win; ++r)
                for (int c = 0; c < win; ++c) {
                    const double da = clip(xhat_hu.at(wr + r, wc + c)) - ma;
                    const double db = clip(xstar_hu.at(wr + r, wc + c)) - mb;
                    va += da * da;
                    vb += db * db;
                    cov += da * db;
                }
            va /= n - 1;
            vb /= n - 1;
            cov /= n - 1;
            const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            total += num / den;
        }
    }
    return total / (static_cast<double>(nwr) * nwc);
}

MetricReport evaluate_method(const std::string& method,
                             const std::vector<Image>& reconstructions,
                             const std::vector<Image>& references) {
    if (reconstructions.size() != references.size())
        throw std::invalid_argument("evaluate_method: count mismatch");
    MetricReport rep;
    rep.method = method;
    for (std::size_t i = 0; i < reconstructions.size(); ++i) {
        rep.rmse.push_back(rmse_hu(reconstructions[i], references[i]));
        rep.ssim.push_back(ssim(reconstructions[i], references[i]));
    }
    for (double v : rep.rmse) rep.mean_rmse += v;
    for (double v : rep.ssim) rep.mean_ssim += v;
    if (!rep.rmse.empty()) {
        rep.mean_rmse /= static_cast<double>(rep.rmse.size());
        rep.mean_ssim /= static_cast<double>(rep.ssim.size());
    }
    return rep;
}

void write_report_csv(const std::vector<MetricReport>& reports, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "method,image,rmse_hu,ssim\n";
    char buf[160];
    for (const auto& rep : reports) {
        for (std::size_t i = 0; i < rep.rmse.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%s,%zu,%.17g,%.17g\n", rep.method.c_str(), i,
                          rep.rmse[i], rep.ssim[i]);
            f << buf;
        }
        std::snprintf(buf, sizeof(buf), "%s,mean,%.17g,%.17g\n", rep.method.c_str(),
                      rep.mean_rmse, rep.mean_ssim);
        f << buf;
    }
}

std::string format_report_table(const std::vector<MetricReport>& reports) {
    std::ostringstream os;
    char buf[120];
    std::snprintf(buf, sizeof(buf), "%-18s %12s %10s\n", "method", "mean RMSE", "mean SSIM");
    os << buf;
    for (const auto& rep : reports) {
        std::snprintf(buf, sizeof(buf), "%-18s %12.2f %10.4f\n", rep.method.c_str(),
                      rep.mean_rmse, rep.mean_ssim);
        os << buf;
    }
    return os.str();
}

}  // namespace superct
