#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace mosaic {

class MetricsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A viewpoint around the vehicle. Height and pitch belong to the simulator side.
class CameraTransform {
public:
    /// Throws MetricsError unless distance > 0; azimuth is wrapped into [0, 360).
    CameraTransform(double distance_m, double azimuth_deg);

    [[nodiscard]] double distance_m() const noexcept { return distance_m_; }
    [[nodiscard]] double azimuth_deg() const noexcept { return azimuth_deg_; }

    friend bool operator==(const CameraTransform&, const CameraTransform&) = default;

private:
    double distance_m_;
    double azimuth_deg_;
};

enum class TransformSet { training, testing };

[[nodiscard]] TransformSet parse_transform_set(const std::string& name);
[[nodiscard]] std::string to_string(TransformSet set);

// Distance-major, azimuth ascending from 0 deg.
[[nodiscard]] std::vector<CameraTransform> training_grid();  // {5, 8} m x 8 azimuths
[[nodiscard]] std::vector<CameraTransform> testing_grid();   // {5, 8, 12, 15} m x 24 azimuths
[[nodiscard]] std::vector<CameraTransform> transform_grid(TransformSet set);

inline constexpr double kDetectionThreshold = 0.5;

struct EvalReport {
    std::vector<double> scores;
    double s_avg{0.0};
    double p_05{0.0};  ///< fraction of scores >= threshold
    double threshold{kDetectionThreshold};
};

/// Throws MetricsError on empty input or any score / threshold outside [0, 1].
[[nodiscard]] EvalReport compute_report(std::span<const double> scores,
                                        double threshold = kDetectionThreshold);

/// Reference rows of the published simulator results, shown next to synthetic numbers.
struct ReferenceRow {
    std::string method;
    std::string setting;
    double s_avg;
    double p_05;
};
[[nodiscard]] std::span<const ReferenceRow> reference_er_table();
[[nodiscard]] std::span<const ReferenceRow> reference_render_table();

/// Structured report document: scores, aggregates, ER label and the reference rows.
[[nodiscard]] nlohmann::json report_document(const EvalReport& report,
                                             std::span<const CameraTransform> transforms,
                                             const std::string& er_label);

[[nodiscard]] nlohmann::json reference_tables_json();

}  // namespace mosaic
