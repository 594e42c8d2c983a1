#include "treebark/error.hpp"
#include "treebark/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace treebark {

namespace fs = std::filesystem;

namespace {

struct Series {
    std::string label;
    std::vector<double> values;
    cv::Scalar colour;  // BGR
};

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

void draw_chart(const fs::path& path, const std::string& title, const std::string& y_label,
                const std::vector<Series>& series, std::optional<std::pair<double, double>> fixed_range) {
    constexpr int width = 800;
    constexpr int height = 560;
    constexpr int left = 90;
    constexpr int right = 30;
    constexpr int top = 60;
    constexpr int bottom = 70;
    const int plot_w = width - left - right;
    const int plot_h = height - top - bottom;
    cv::Mat canvas(height, width, CV_8UC3, cv::Scalar(255, 255, 255));

    std::size_t points = 0;
    double lo = 0.0;
    double hi = 1.0;
    if (fixed_range) {
        std::tie(lo, hi) = *fixed_range;
    } else {
        hi = 0.0;
        for (const auto& s : series) {
            for (double v : s.values) hi = std::max(hi, v);
        }
        hi = hi > 0.0 ? hi * 1.05 : 1.0;
    }
    for (const auto& s : series) points = std::max(points, s.values.size());
    const double x_lo = points > 1 ? 1.0 : 0.0;
    const double x_hi = points > 1 ? static_cast<double>(points) : 2.0;

    auto to_px = [&](double epoch, double v) {
        const double fx = (epoch - x_lo) / (x_hi - x_lo);
        const double fy = (std::clamp(v, lo, hi) - lo) / (hi - lo);
        return cv::Point(left + static_cast<int>(std::lround(fx * plot_w)), top + plot_h - static_cast<int>(std::lround(fy * plot_h)));
    };

    const cv::Scalar grid(225, 225, 225);
    const cv::Scalar ink(40, 40, 40);
    const auto font = cv::FONT_HERSHEY_SIMPLEX;
    for (int i = 0; i <= 5; ++i) {
        const double v = lo + (hi - lo) * i / 5.0;
        const auto p = to_px(x_lo, v);
        cv::line(canvas, p, {left + plot_w, p.y}, grid, 1);
        cv::putText(canvas, tick_label(v), {10, p.y + 5}, font, 0.45, ink, 1, cv::LINE_AA);
    }
    const int step = points > 1 ? static_cast<int>((points - 1 + 9) / 10) : 1;
    std::vector<int> x_ticks;
    for (int e = static_cast<int>(x_lo); e <= static_cast<int>(x_hi); e += step) x_ticks.push_back(e);
    if (x_ticks.back() != static_cast<int>(x_hi)) x_ticks.push_back(static_cast<int>(x_hi));
    for (int e : x_ticks) {
        const auto p = to_px(e, lo);
        cv::line(canvas, p, {p.x, p.y + 5}, ink, 1);
        cv::putText(canvas, std::to_string(e), {p.x - 6, p.y + 22}, font, 0.45, ink, 1, cv::LINE_AA);
    }
    cv::rectangle(canvas, {left, top}, {left + plot_w, top + plot_h}, ink, 1);
    cv::putText(canvas, title, {left, top - 25}, font, 0.7, ink, 2, cv::LINE_AA);
    cv::putText(canvas, "Epoch", {left + plot_w / 2 - 25, height - 20}, font, 0.55, ink, 1, cv::LINE_AA);
    cv::putText(canvas, y_label, {10, top - 14}, font, 0.5, ink, 1, cv::LINE_AA);

    int legend_x = left + plot_w - 260;
    for (const auto& s : series) {
        if (s.values.empty()) continue;
        std::vector<cv::Point> pts;
        for (std::size_t i = 0; i < s.values.size(); ++i) pts.push_back(to_px(static_cast<double>(i + 1), s.values[i]));
        if (pts.size() > 1) cv::polylines(canvas, pts, false, s.colour, 2, cv::LINE_AA);
        for (const auto& p : pts) cv::circle(canvas, p, 3, s.colour, cv::FILLED, cv::LINE_AA);
        cv::line(canvas, {legend_x, top - 30}, {legend_x + 30, top - 30}, s.colour, 2);
        cv::putText(canvas, s.label, {legend_x + 38, top - 25}, font, 0.5, ink, 1, cv::LINE_AA);
        legend_x += 130;
    }
    if (!cv::imwrite(path.string(), canvas)) throw IoError("cannot write plot: " + path.string());
}

}  // namespace

PlotFiles plot_history(const TrainingHistory& history, const fs::path& out_dir) {
    if (history.epochs.empty()) throw ValidationError("cannot plot an empty training history");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) throw IoError("cannot create plot directory: " + out_dir.string());

    Series train_acc{"train", {}, {180, 110, 30}};
    Series val_acc{"validation", {}, {30, 130, 240}};
    Series train_loss = train_acc;
    Series val_loss = val_acc;
    for (const auto& e : history.epochs) {
        train_acc.values.push_back(e.train_accuracy);
        train_loss.values.push_back(e.train_loss);
        if (e.val_accuracy) val_acc.values.push_back(*e.val_accuracy);
        if (e.val_loss) val_loss.values.push_back(*e.val_loss);
    }

    PlotFiles files{out_dir / "accuracy.png", out_dir / "loss.png", out_dir / "history.csv"};
    draw_chart(files.accuracy, "Accuracy vs Epoch", "Accuracy", {train_acc, val_acc}, std::pair{0.0, 1.0});
    draw_chart(files.loss, "Loss vs Epoch", "Loss", {train_loss, val_loss}, std::nullopt);
    history.save_csv(files.csv);
    return files;
}

}  // namespace treebark
