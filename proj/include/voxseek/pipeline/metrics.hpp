#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "voxseek/error.hpp"

namespace voxseek::pipeline {

struct ClassMetrics {
    std::string name;
    long true_points = 0;
    long predicted_points = 0;
    long correct = 0;
    bool present = false;    // class occurs in the ground truth
    double accuracy = 0.0;   // correct / true_points * 100
    double precision = 0.0;  // correct / predicted_points * 100
};

/// Per-class accuracy and precision plus the mean accuracy over classes
/// present in the ground truth (absent classes render as a dash).
struct MetricsTable {
    std::vector<ClassMetrics> rows;
    double mean_accuracy = 0.0;
};

/// `predicted` and `truth` are per-point class ids over the same point set;
/// ids index `class_names`.
inline MetricsTable evaluate_metrics(const std::vector<int>& predicted, const std::vector<int>& truth,
                                     const std::vector<std::string>& class_names) {
    if (predicted.size() != truth.size())
        throw InputError("evaluate_metrics: predicted and truth point sets differ in size");
    const int n_classes = static_cast<int>(class_names.size());
    MetricsTable table;
    table.rows.resize(class_names.size());
    for (int c = 0; c < n_classes; ++c) table.rows[static_cast<size_t>(c)].name = class_names[static_cast<size_t>(c)];

    for (size_t i = 0; i < truth.size(); ++i) {
        int t = truth[i], p = predicted[i];
        if (t >= 0 && t < n_classes) {
            ++table.rows[static_cast<size_t>(t)].true_points;
            if (p == t) ++table.rows[static_cast<size_t>(t)].correct;
        }
        if (p >= 0 && p < n_classes) ++table.rows[static_cast<size_t>(p)].predicted_points;
    }

    int present = 0;
    double acc_sum = 0;
    for (auto& row : table.rows) {
        row.present = row.true_points > 0;
        if (row.present) {
            row.accuracy = 100.0 * static_cast<double>(row.correct) / static_cast<double>(row.true_points);
            ++present;
            acc_sum += row.accuracy;
        }
        if (row.predicted_points > 0)
            row.precision = 100.0 * static_cast<double>(row.correct) / static_cast<double>(row.predicted_points);
    }
    table.mean_accuracy = present > 0 ? acc_sum / present : 0.0;
    return table;
}

/// Aligned text table; absent classes print a dash and are excluded from the
/// mean column.
inline void write_metrics_text(std::ostream& out, const MetricsTable& table) {
    size_t width = 5;
    for (const auto& r : table.rows) width = std::max(width, r.name.size());
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-*s %9s %9s\n", static_cast<int>(width), "class", "accuracy", "precision");
    out << buf;
    for (const auto& r : table.rows) {
        if (r.present) {
            std::snprintf(buf, sizeof(buf), "%-*s %9.2f %9.2f\n", static_cast<int>(width), r.name.c_str(),
                          r.accuracy, r.predicted_points > 0 ? r.precision : 0.0);
        } else {
            std::snprintf(buf, sizeof(buf), "%-*s %9s %9s\n", static_cast<int>(width), r.name.c_str(), "-", "-");
        }
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "%-*s %9.2f\n", static_cast<int>(width), "mean", table.mean_accuracy);
    out << buf;
}

inline void write_metrics_csv(std::ostream& out, const MetricsTable& table) {
    out << "class,accuracy,precision,true_points,predicted_points,correct\n";
    char buf[160];
    for (const auto& r : table.rows) {
        if (r.present)
            std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%ld,%ld,%ld\n", r.name.c_str(), r.accuracy, r.precision,
                          r.true_points, r.predicted_points, r.correct);
        else
            std::snprintf(buf, sizeof(buf), "%s,-,-,0,%ld,0\n", r.name.c_str(), r.predicted_points);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "mean,%.4f,,,,\n", table.mean_accuracy);
    out << buf;
}

/// Deterministic seeded split of scene indices into train/test.
inline std::pair<std::vector<size_t>, std::vector<size_t>> split_dataset(size_t n, double fraction,
                                                                         uint64_t seed) {
    if (n < 2) throw InputError("split_dataset: need at least two scenes");
    if (!(fraction > 0.0 && fraction < 1.0)) throw InputError("split_dataset: fraction must be in (0,1)");
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    num::RngState rng(seed);
    rng.shuffle(idx);
    size_t train_n = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
    train_n = std::min(std::max<size_t>(train_n, 1), n - 1);
    std::vector<size_t> train(idx.begin(), idx.begin() + static_cast<long>(train_n));
    std::vector<size_t> test(idx.begin() + static_cast<long>(train_n), idx.end());
    return {train, test};
}

} // namespace voxseek::pipeline
