#include "mosaic/metrics.hpp"

#include <array>
#include <cmath>
#include <numeric>

namespace mosaic {

CameraTransform::CameraTransform(double distance_m, double azimuth_deg)
    : distance_m_(distance_m), azimuth_deg_(std::fmod(azimuth_deg, 360.0)) {
    if (!(distance_m > 0.0) || !std::isfinite(distance_m)) {
        throw MetricsError("camera distance must be positive");
    }
    if (!std::isfinite(azimuth_deg)) {
        throw MetricsError("camera azimuth must be finite");
    }
    if (azimuth_deg_ < 0.0) {
        azimuth_deg_ += 360.0;
    }
    if (azimuth_deg_ >= 360.0) {
        azimuth_deg_ = 0.0;
    }
}

TransformSet parse_transform_set(const std::string& name) {
    if (name == "training") return TransformSet::training;
    if (name == "testing") return TransformSet::testing;
    throw MetricsError("unknown transform set '" + name + "' (expected training|testing)");
}

std::string to_string(TransformSet set) {
    return set == TransformSet::training ? "training" : "testing";
}

namespace {

std::vector<CameraTransform> grid(std::span<const double> distances, int angle_count) {
    std::vector<CameraTransform> out;
    out.reserve(distances.size() * static_cast<std::size_t>(angle_count));
    const double step = 360.0 / angle_count;
    for (double d : distances) {
        for (int k = 0; k < angle_count; ++k) {
            out.emplace_back(d, step * k);
        }
    }
    return out;
}

}  // namespace

std::vector<CameraTransform> training_grid() {
    static constexpr std::array<double, 2> kDistances{5.0, 8.0};
    return grid(kDistances, 8);
}

std::vector<CameraTransform> testing_grid() {
    static constexpr std::array<double, 4> kDistances{5.0, 8.0, 12.0, 15.0};
    return grid(kDistances, 24);
}

std::vector<CameraTransform> transform_grid(TransformSet set) {
    return set == TransformSet::training ? training_grid() : testing_grid();
}

EvalReport compute_report(std::span<const double> scores, double threshold) {
    if (scores.empty()) {
        throw MetricsError("cannot report on an empty score list");
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw MetricsError("threshold must lie in [0, 1]");
    }
    std::size_t detected = 0;
    for (double s : scores) {
        if (!(s >= 0.0 && s <= 1.0)) {
            throw MetricsError("score " + std::to_string(s) + " outside [0, 1]");
        }
        if (s >= threshold) {
            ++detected;
        }
    }
    EvalReport r;
    r.scores.assign(scores.begin(), scores.end());
    r.s_avg = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
    r.p_05 = static_cast<double>(detected) / static_cast<double>(scores.size());
    r.threshold = threshold;
    return r;
}

std::span<const ReferenceRow> reference_er_table() {
    static const std::array<ReferenceRow, 9> kRows{{
        {"clean", "-", 0.89, 0.91},
        {"random", "E7-R0", 0.73, 0.75},
        {"random", "E6-R1", 0.68, 0.71},
        {"random", "E5-R2", 0.56, 0.57},
        {"random", "E4-R3", 0.60, 0.59},
        {"search", "E7-R0", 0.64, 0.67},
        {"search", "E6-R1", 0.56, 0.51},
        {"search", "E5-R2", 0.43, 0.39},
        {"search", "E4-R3", 0.49, 0.47},
    }};
    return kRows;
}

std::span<const ReferenceRow> reference_render_table() {
    static const std::array<ReferenceRow, 4> kRows{{
        {"clean", "-", 0.89, 0.91},
        {"bilinear-random", "-", 0.85, 0.88},
        {"er-random", "E5-R2", 0.56, 0.57},
        {"er-search", "E5-R2", 0.43, 0.39},
    }};
    return kRows;
}

nlohmann::json reference_tables_json() {
    auto rows = [](std::span<const ReferenceRow> table) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& r : table) {
            out.push_back({{"method", r.method}, {"setting", r.setting}, {"s_avg", r.s_avg},
                           {"p_05", r.p_05}});
        }
        return out;
    };
    return {
        {"note", "published simulator + detector results; synthetic oracle numbers are not comparable"},
        {"er_settings", rows(reference_er_table())},
        {"render_methods", rows(reference_render_table())},
    };
}

nlohmann::json report_document(const EvalReport& report,
                               std::span<const CameraTransform> transforms,
                               const std::string& er_label) {
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t i = 0; i < report.scores.size(); ++i) {
        nlohmann::json row{{"score", report.scores[i]}};
        if (i < transforms.size()) {
            row["distance_m"] = transforms[i].distance_m();
            row["azimuth_deg"] = transforms[i].azimuth_deg();
        }
        per.push_back(std::move(row));
    }
    return {
        {"er_label", er_label},
        {"threshold", report.threshold},
        {"s_avg", report.s_avg},
        {"p_05", report.p_05},
        {"transform_count", report.scores.size()},
        {"per_transform", std::move(per)},
        {"reference", reference_tables_json()},
    };
}

}  // namespace mosaic
